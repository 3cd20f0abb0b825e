"""
Atomic routing games on a network of single-source single-target paths.

Paths are edge-disjoint chains unless an explicit edge list says otherwise;
edge e costs c_e(j) = slope_e * j + intercept_e when j players use it.
"""
import itertools
import logging
from dataclasses import dataclass, field
from typing import List, Optional, Sequence, Tuple, Union

import numpy as np

from app.core.exceptions import InvalidParameterError, get_dimension_exception
from app.services.constraints import ConstraintSet, gas_budget
from app.services.game import ActionSpace, Game

logger = logging.getLogger(__name__)

ROUTING_PATHS: Tuple[Tuple[str, int], ...] = (("R1", 2), ("R2", 3), ("R3", 4), ("HW", 10))
DEFAULT_BUDGETS: Tuple[float, ...] = (2, 3, 4, 6, 9)
YELLOW_SLOPE = 1.0
HW_SLOPE = 0.01


@dataclass(frozen=True)
class Edge:
    slope: float
    intercept: float = 0.0

    def cost(self, load: int) -> float:
        return self.slope * load + self.intercept

    def cumulative(self, load: int) -> float:
        """sum_{j=1}^{load} c_e(j)"""
        return self.slope * load * (load + 1) / 2 + self.intercept * load


@dataclass(frozen=True)
class Network:
    edges: Tuple[Edge, ...]
    paths: Tuple[Tuple[int, ...], ...]
    gas: Tuple[float, ...]
    names: Tuple[str, ...] = field(default=())

    def __post_init__(self):
        object.__setattr__(self, "edges", tuple(self.edges))
        object.__setattr__(self, "paths", tuple(tuple(int(e) for e in p) for p in self.paths))
        object.__setattr__(self, "gas", tuple(float(g) for g in self.gas))
        if not self.names:
            object.__setattr__(self, "names", tuple(f"P{k + 1}" for k in range(len(self.paths))))
        if not self.paths:
            raise InvalidParameterError("a network needs at least one path")
        if len(self.gas) != len(self.paths) or len(self.names) != len(self.paths):
            raise get_dimension_exception("per-path gas costs and names", len(self.paths), (len(self.gas), len(self.names)))
        for k, path in enumerate(self.paths):
            if not path:
                raise InvalidParameterError(f"path {k} has no edges")
            if any(not 0 <= e < len(self.edges) for e in path):
                raise InvalidParameterError(f"path {k} references an unknown edge")
        for e in self.edges:
            if not (np.isfinite(e.slope) and np.isfinite(e.intercept)):
                raise InvalidParameterError("congestion coefficients must be finite")
            if e.slope < 0:
                raise InvalidParameterError("congestion slopes must be non-negative")

    @classmethod
    def from_chains(cls, lengths: Sequence[int], slopes: Sequence[float],
                    names: Sequence[str] = (), gas: Optional[Sequence[float]] = None) -> "Network":
        """Edge-disjoint chains; by default a path's gas cost is its number of unit edges."""
        edges: List[Edge] = []
        paths = []
        for length, slope in zip(lengths, slopes):
            if length < 1:
                raise InvalidParameterError("every path needs at least one edge")
            start = len(edges)
            edges.extend(Edge(float(slope)) for _ in range(length))
            paths.append(tuple(range(start, start + length)))
        gas = tuple(lengths) if gas is None else tuple(gas)
        return cls(tuple(edges), tuple(paths), gas, tuple(names))

    @property
    def num_paths(self) -> int:
        return len(self.paths)


@dataclass(frozen=True)
class CongestionInstance:
    network: Network
    players: int
    gas_budgets: Tuple[float, ...]

    def __post_init__(self):
        object.__setattr__(self, "gas_budgets", tuple(float(b) for b in self.gas_budgets))
        if self.players < 1:
            raise InvalidParameterError("an instance needs at least one player")
        if len(self.gas_budgets) != self.players:
            raise get_dimension_exception("gas budgets", self.players, len(self.gas_budgets))
        if not all(np.isfinite(self.gas_budgets)):
            raise InvalidParameterError("gas budgets must be finite")


def _check_profile(net: Network, profile: Sequence[int]) -> None:
    for p in profile:
        if not 0 <= p < net.num_paths:
            raise InvalidParameterError(f"path index {p} out of range for {net.num_paths} paths")


def edge_loads(net: Network, profile: Sequence[int]) -> np.ndarray:
    loads = np.zeros(len(net.edges), dtype=int)
    for p in profile:
        for e in net.paths[p]:
            loads[e] += 1
    return loads


def path_loads(net: Network, profile: Sequence[int]) -> np.ndarray:
    return np.bincount(np.asarray(profile, dtype=int), minlength=net.num_paths)


def rosenthal_potential(net: Network, profile: Sequence[int]) -> float:
    _check_profile(net, profile)
    loads = edge_loads(net, profile)
    return float(sum(edge.cumulative(int(load)) for edge, load in zip(net.edges, loads)))


def player_cost(net: Network, profile: Sequence[int], player: int) -> float:
    _check_profile(net, profile)
    if not 0 <= player < len(profile):
        raise InvalidParameterError(f"player index {player} out of range for {len(profile)} players")
    loads = edge_loads(net, profile)
    return float(sum(net.edges[e].cost(int(loads[e])) for e in net.paths[profile[player]]))


def compile_instance(inst: CongestionInstance) -> Tuple[Game, ConstraintSet]:
    """Dense potential game over path choices plus one gas-budget constraint per player."""
    net = inst.network
    space = ActionSpace(tuple([net.num_paths] * inst.players))
    space.check_size()
    potential = np.empty(space.actions)
    costs = np.empty((inst.players,) + space.actions)
    for profile in itertools.product(range(net.num_paths), repeat=inst.players):
        loads = edge_loads(net, profile)
        potential[profile] = sum(edge.cumulative(int(load)) for edge, load in zip(net.edges, loads))
        for i, p in enumerate(profile):
            costs[(i,) + profile] = sum(net.edges[e].cost(int(loads[e])) for e in net.paths[p])
    constraints = ConstraintSet(tuple((gas_budget(net.gas, b),) for b in inst.gas_budgets))
    logger.debug("compiled congestion instance: %d players, %d paths, %d profiles",
                 inst.players, net.num_paths, space.num_profiles)
    return Game(space, potential, costs), constraints


def routing_network(hw_slope: float = HW_SLOPE, yellow_slope: float = YELLOW_SLOPE) -> Network:
    names = tuple(name for name, _ in ROUTING_PATHS)
    lengths = tuple(length for _, length in ROUTING_PATHS)
    slopes = tuple(hw_slope if name == "HW" else yellow_slope for name in names)
    return Network.from_chains(lengths, slopes, names)


def routing_instance(budgets: Union[None, float, Sequence[float]] = None, hw_slope: float = HW_SLOPE,
                   players: int = 5) -> CongestionInstance:
    """Four routes R1, R2, R3, HW of 2, 3, 4 and 10 unit edges; five players by default."""
    if budgets is None:
        budgets = DEFAULT_BUDGETS[:players] if players <= len(DEFAULT_BUDGETS) else [DEFAULT_BUDGETS[-1]] * players
    elif np.isscalar(budgets):
        budgets = [budgets] * players
    return CongestionInstance(routing_network(hw_slope), players, tuple(budgets))
