"""
Private per-player convex constraints g_{i,m}(x_i) <= 0.

The interface admits any differentiable convex g (value and gradient plus a
smoothness constant); only affine constraints g(x_i) = c^T x_i - b ship with
the package, and vertex-based diagnostics are exact for them.
"""
from abc import ABC, abstractmethod
from dataclasses import dataclass
from typing import Optional, Sequence, Tuple

import numpy as np

from app.core.exceptions import (
    InvalidParameterError,
    UnsupportedConstraintError,
    get_dimension_exception,
)
from app.services.game import ActionSpace, MixedProfile

FEASIBILITY_TOL = 1e-9


class Constraint(ABC):
    size: int
    smoothness: float = 0.0

    @abstractmethod
    def value(self, x_i: np.ndarray) -> float:
        ...

    @abstractmethod
    def gradient(self, x_i: Optional[np.ndarray] = None) -> np.ndarray:
        ...

    def vertex_values(self) -> np.ndarray:
        """g at every pure action e_a; only defined where it is exact."""
        raise UnsupportedConstraintError(
            f"{type(self).__name__} does not support vertex enumeration"
        )

    def relaxed(self, eps: float) -> "Constraint":
        raise UnsupportedConstraintError(f"{type(self).__name__} cannot be relaxed")


@dataclass(frozen=True, eq=False)
class AffineConstraint(Constraint):
    coefficients: np.ndarray
    offset: float

    def __post_init__(self):
        c = np.asarray(self.coefficients, dtype=float)
        if c.ndim != 1 or c.size < 1:
            raise InvalidParameterError("affine constraint coefficients must be a non-empty vector")
        if not (np.all(np.isfinite(c)) and np.isfinite(self.offset)):
            raise InvalidParameterError("affine constraint coefficients and offset must be finite")
        c.setflags(write=False)
        object.__setattr__(self, "coefficients", c)
        object.__setattr__(self, "offset", float(self.offset))

    @property
    def size(self) -> int:
        return self.coefficients.size

    def value(self, x_i: np.ndarray) -> float:
        return float(self.coefficients @ x_i - self.offset)

    def gradient(self, x_i: Optional[np.ndarray] = None) -> np.ndarray:
        return self.coefficients

    def vertex_values(self) -> np.ndarray:
        return self.coefficients - self.offset

    def relaxed(self, eps: float) -> "AffineConstraint":
        return AffineConstraint(self.coefficients, self.offset + eps)

    def scaled(self, factor: float) -> "AffineConstraint":
        return AffineConstraint(factor * self.coefficients, factor * self.offset)


def gas_budget(consumption: Sequence[float], budget: float) -> AffineConstraint:
    """Expected gas use minus the budget: sum_p gas(p) x_i(p) - B <= 0."""
    return AffineConstraint(np.asarray(consumption, dtype=float), budget)


@dataclass(frozen=True)
class ConstraintSet:
    per_player: Tuple[Tuple[Constraint, ...], ...]

    def __post_init__(self):
        object.__setattr__(self, "per_player", tuple(tuple(c) for c in self.per_player))

    @classmethod
    def empty(cls, players: int) -> "ConstraintSet":
        return cls(tuple(() for _ in range(players)))

    @property
    def players(self) -> int:
        return len(self.per_player)

    @property
    def dims(self) -> Tuple[int, ...]:
        return tuple(len(c) for c in self.per_player)

    @property
    def total(self) -> int:
        return sum(self.dims)

    @property
    def gamma(self) -> float:
        return max((c.smoothness for cs in self.per_player for c in cs), default=0.0)

    @property
    def is_affine(self) -> bool:
        return all(isinstance(c, AffineConstraint) for cs in self.per_player for c in cs)

    def for_player(self, player: int) -> Tuple[Constraint, ...]:
        if not 0 <= player < self.players:
            raise InvalidParameterError(f"player index {player} out of range for {self.players} players")
        return self.per_player[player]

    def check_space(self, space: ActionSpace) -> None:
        if self.players != space.players:
            raise get_dimension_exception("constraint set players", space.players, self.players)
        for i, (constraints, k) in enumerate(zip(self.per_player, space.actions)):
            for m, c in enumerate(constraints):
                if c.size != k:
                    raise get_dimension_exception(f"constraint {m} of player {i}", k, c.size)


def evaluate(cs: ConstraintSet, player: int, x_i: np.ndarray) -> np.ndarray:
    constraints = cs.for_player(player)
    x_i = np.asarray(x_i, dtype=float)
    for m, c in enumerate(constraints):
        if c.size != x_i.shape[0]:
            raise get_dimension_exception(f"strategy for constraint {m} of player {player}", c.size, x_i.shape[0])
    return np.array([c.value(x_i) for c in constraints], dtype=float)


def gradient(cs: ConstraintSet, player: int, m: int, x_i: Optional[np.ndarray] = None) -> np.ndarray:
    constraints = cs.for_player(player)
    if not 0 <= m < len(constraints):
        raise InvalidParameterError(f"constraint index {m} out of range for player {player}")
    return constraints[m].gradient(x_i)


def violation(cs: ConstraintSet, x: MixedProfile) -> float:
    """Sum of hinge violations max(0, g_{i,m}(x_i)) over players and constraints."""
    total = 0.0
    for i in range(cs.players):
        total += float(np.maximum(evaluate(cs, i, x[i]), 0.0).sum())
    return total


def is_feasible(cs: ConstraintSet, x: MixedProfile, tol: float = FEASIBILITY_TOL) -> bool:
    return violation(cs, x) <= tol


def _vertex_matrix(cs: ConstraintSet, player: int) -> np.ndarray:
    # rows: constraints, columns: pure actions
    return np.array([c.vertex_values() for c in cs.for_player(player)], dtype=float)


def constraint_margins(cs: ConstraintSet, player: int) -> np.ndarray:
    """Per-constraint margins xi_{i,m} = min over the simplex of g_{i,m}."""
    if not cs.for_player(player):
        return np.zeros(0)
    return _vertex_matrix(cs, player).min(axis=1)


def slater_margin(cs: ConstraintSet, player: int) -> float:
    """
    Vertex-certified Slater margin: min over pure actions of the largest
    constraint value there. Negative means some vertex is strictly feasible
    for every constraint of the player; -inf when the player is unconstrained.
    """
    if not cs.for_player(player):
        return float("-inf")
    return float(_vertex_matrix(cs, player).max(axis=0).min())


def feasible_vertex(cs: ConstraintSet, player: int) -> Optional[int]:
    """A pure action strictly feasible for all of the player's constraints, if any."""
    if not cs.for_player(player):
        return 0
    worst = _vertex_matrix(cs, player).max(axis=0)
    a = int(np.argmin(worst))
    return a if worst[a] < 0 else None


def g_max(cs: ConstraintSet) -> float:
    """Largest constraint value over players, constraints and simplex vertices."""
    values = [float(_vertex_matrix(cs, i).max()) for i in range(cs.players) if cs.for_player(i)]
    return max(values, default=float("-inf"))


def relaxed(cs: ConstraintSet, eps: float) -> ConstraintSet:
    """The eps-relaxed constraint set {g_{i,m}(x_i) <= eps}."""
    return ConstraintSet(tuple(tuple(c.relaxed(eps) for c in constraints) for constraints in cs.per_player))
