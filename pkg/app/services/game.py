"""
Finite normal-form potential games over mixed strategies.

Tensors are dense, row-major, with player 1 on the slowest axis: entry
``potential[a_1, ..., a_n]`` is the potential of the joint pure profile
``(a_1, ..., a_n)`` and ``costs[i, a_1, ..., a_n]`` is player i's cost.
Expectations are exact sums over every joint pure profile, carried out as
successive tensor contractions with the players' mixed strategies.
"""
import math
from dataclasses import dataclass
from typing import Optional, Sequence, Tuple

import numpy as np

from app.core.config import settings
from app.core.exceptions import (
    InvalidParameterError,
    InvalidProfileError,
    ProfileSpaceTooLargeError,
    get_dimension_exception,
)

SUM_TOL = 1e-9
NEGATIVITY_TOL = 1e-12


@dataclass(frozen=True)
class ActionSpace:
    actions: Tuple[int, ...]

    def __post_init__(self):
        if len(self.actions) < 1:
            raise InvalidParameterError("an action space needs at least one player")
        if any(int(k) < 1 for k in self.actions):
            raise InvalidParameterError(f"every player needs at least one action, got {self.actions}")
        object.__setattr__(self, "actions", tuple(int(k) for k in self.actions))

    @property
    def players(self) -> int:
        return len(self.actions)

    @property
    def max_actions(self) -> int:
        return max(self.actions)

    @property
    def num_profiles(self) -> int:
        return math.prod(self.actions)

    def check_size(self, limit: Optional[int] = None) -> None:
        limit = settings.MAX_PROFILES if limit is None else limit
        if self.num_profiles > limit:
            raise ProfileSpaceTooLargeError(
                f"{self.num_profiles} joint pure profiles exceed the enumeration limit {limit}"
            )


@dataclass(frozen=True, eq=False)
class MixedProfile:
    """One probability vector per player."""

    strategies: Tuple[np.ndarray, ...]

    def __post_init__(self):
        object.__setattr__(
            self, "strategies", tuple(np.asarray(s, dtype=float) for s in self.strategies)
        )

    def __len__(self) -> int:
        return len(self.strategies)

    def __getitem__(self, player: int) -> np.ndarray:
        return self.strategies[player]

    @classmethod
    def uniform(cls, space: ActionSpace) -> "MixedProfile":
        return cls(tuple(np.full(k, 1.0 / k) for k in space.actions))

    @classmethod
    def dirichlet(cls, space: ActionSpace, seed: Optional[int] = None) -> "MixedProfile":
        rng = np.random.default_rng(seed)
        return cls(tuple(rng.dirichlet(np.ones(k)) for k in space.actions))

    @classmethod
    def pure(cls, space: ActionSpace, actions: Sequence[int]) -> "MixedProfile":
        if len(actions) != space.players:
            raise get_dimension_exception("pure profile length", space.players, len(actions))
        strategies = []
        for k, a in zip(space.actions, actions):
            if not 0 <= a < k:
                raise InvalidParameterError(f"action {a} out of range for {k} actions")
            e = np.zeros(k)
            e[a] = 1.0
            strategies.append(e)
        return cls(tuple(strategies))

    def with_strategy(self, player: int, strategy: np.ndarray) -> "MixedProfile":
        strategies = list(self.strategies)
        strategies[player] = np.asarray(strategy, dtype=float)
        return MixedProfile(tuple(strategies))

    def flatten(self) -> np.ndarray:
        return np.concatenate(self.strategies)

    def distance(self, other: "MixedProfile") -> float:
        return float(np.linalg.norm(self.flatten() - other.flatten()))

    def simplex_violation(self) -> float:
        worst = 0.0
        for s in self.strategies:
            worst = max(worst, abs(float(s.sum()) - 1.0), float(max(0.0, -s.min())))
        return worst

    def validate(self, space: ActionSpace) -> None:
        if len(self.strategies) != space.players:
            raise get_dimension_exception("number of player strategies", space.players, len(self.strategies))
        for i, (s, k) in enumerate(zip(self.strategies, space.actions)):
            if s.shape != (k,):
                raise get_dimension_exception(f"strategy of player {i}", (k,), s.shape)
            if not np.all(np.isfinite(s)):
                raise InvalidProfileError(f"strategy of player {i} has non-finite entries")
            if s.min() < -NEGATIVITY_TOL or abs(s.sum() - 1.0) > SUM_TOL:
                raise InvalidProfileError(f"strategy of player {i} is not on the probability simplex")


def _contract(tensor: np.ndarray, strategies: Sequence[np.ndarray], keep: Optional[int] = None) -> np.ndarray:
    # Axes are contracted from the last one down so lower axis indices stay valid.
    out = tensor
    for axis in reversed(range(len(strategies))):
        if axis == keep:
            continue
        out = np.tensordot(out, strategies[axis], axes=([axis], [0]))
    return out


class Game:
    """Dense normal-form game with an explicit potential tensor."""

    def __init__(self, space: ActionSpace, potential: np.ndarray, costs: np.ndarray):
        space.check_size()
        potential = np.array(potential, dtype=float)
        costs = np.array(costs, dtype=float)
        if potential.shape != space.actions:
            raise get_dimension_exception("potential tensor shape", space.actions, potential.shape)
        if costs.shape != (space.players,) + space.actions:
            raise get_dimension_exception(
                "cost tensors shape", (space.players,) + space.actions, costs.shape
            )
        if not (np.all(np.isfinite(potential)) and np.all(np.isfinite(costs))):
            raise InvalidParameterError("game tensors must be finite")
        self.space = space
        self.potential = potential
        self.costs = costs
        self.potential.setflags(write=False)
        self.costs.setflags(write=False)

    @property
    def players(self) -> int:
        return self.space.players

    @property
    def phi_max(self) -> float:
        return float(self.potential.max())

    @property
    def phi_min(self) -> float:
        return float(self.potential.min())

    # Unchecked kernels; the solver calls these on iterates it keeps on the simplex.

    def potential_value(self, x: MixedProfile) -> float:
        return float(_contract(self.potential, x.strategies))

    def cost_value(self, player: int, x: MixedProfile) -> float:
        return float(_contract(self.costs[player], x.strategies))

    def potential_grad(self, player: int, x: MixedProfile) -> np.ndarray:
        return _contract(self.potential, x.strategies, keep=player)

    def cost_grad(self, player: int, x: MixedProfile) -> np.ndarray:
        return _contract(self.costs[player], x.strategies, keep=player)

    def check_player(self, player: int) -> None:
        if not 0 <= player < self.players:
            raise InvalidParameterError(f"player index {player} out of range for {self.players} players")


@dataclass(frozen=True)
class PotentialCheck:
    ok: bool
    max_violation: float


def expected_potential(game: Game, x: MixedProfile) -> float:
    x.validate(game.space)
    return game.potential_value(x)


def expected_cost(game: Game, player: int, x: MixedProfile) -> float:
    game.check_player(player)
    x.validate(game.space)
    return game.cost_value(player, x)


def potential_gradient(game: Game, player: int, x: MixedProfile) -> np.ndarray:
    """Component a is the expected potential when player deviates to pure action a."""
    game.check_player(player)
    x.validate(game.space)
    return game.potential_grad(player, x)


def cost_gradient(game: Game, player: int, x: MixedProfile) -> np.ndarray:
    """Component a is the expected cost of pure action a against the other players."""
    game.check_player(player)
    x.validate(game.space)
    return game.cost_grad(player, x)


def validate_potential(game: Game, tol: float = 1e-12) -> PotentialCheck:
    """
    Check C_i(a_i', a_-i) - C_i(a) = Phi(a_i', a_-i) - Phi(a) on all pure profiles.

    The identity holds iff C_i - Phi does not depend on a_i, so the worst
    violation for player i is the largest spread of C_i - Phi along axis i.
    """
    worst = 0.0
    for i in range(game.players):
        residual = game.costs[i] - game.potential
        worst = max(worst, float(np.ptp(residual, axis=i).max()))
    return PotentialCheck(ok=worst <= tol, max_violation=worst)


def game_from_arrays(potential, costs) -> Game:
    potential = np.asarray(potential, dtype=float)
    space = ActionSpace(tuple(potential.shape))
    return Game(space, potential, np.asarray(costs, dtype=float))

