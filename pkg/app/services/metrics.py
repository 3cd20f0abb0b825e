"""
Solution-quality measurements: Nash gap through per-player best-response
linear programs, and multiplier diagnostics.
"""
import itertools
import logging
from dataclasses import dataclass
from typing import TYPE_CHECKING, Tuple

import numpy as np

from app.core.exceptions import (
    InfeasibleConstraintsError,
    SlaterViolatedError,
    UnsupportedConstraintError,
)
from app.services.constraints import AffineConstraint, ConstraintSet, constraint_margins, slater_margin
from app.services.game import Game, MixedProfile

if TYPE_CHECKING:
    from app.services.solver import SolverState

logger = logging.getLogger(__name__)

GAP_TOL = 1e-9
LP_TOL = 1e-9


@dataclass(frozen=True, eq=False)
class NashGapReport:
    per_player: Tuple[float, ...]
    total: float
    best_responses: Tuple[np.ndarray, ...]
    best_values: Tuple[float, ...]
    relax: float = 0.0


def solve_simplex_lp(p: np.ndarray, a: np.ndarray, b: np.ndarray, tol: float = LP_TOL) -> Tuple[float, np.ndarray]:
    """
    min p^T x  s.t.  a x <= b,  1^T x = 1,  x >= 0

    Exact by enumeration of basic feasible solutions: a vertex with r tight
    inequality rows is supported on at most r + 1 coordinates, so every
    (active rows, support) pair of matching size is solved as a square system.
    Ties keep the first candidate found, which favours pure responses.
    """
    p = np.asarray(p, dtype=float)
    k = p.size
    a = np.asarray(a, dtype=float).reshape(-1, k)
    b = np.asarray(b, dtype=float).reshape(-1)
    d = a.shape[0]

    best_value, best_x = np.inf, None
    for r in range(min(d, k - 1) + 1):
        for active in itertools.combinations(range(d), r):
            for support in itertools.combinations(range(k), r + 1):
                system = np.vstack([np.ones(r + 1), a[np.ix_(active, support)]])
                rhs = np.concatenate([[1.0], b[list(active)]])
                if np.linalg.matrix_rank(system) < r + 1:
                    continue
                z = np.linalg.solve(system, rhs)
                if z.min() < -tol:
                    continue
                x = np.zeros(k)
                x[list(support)] = np.maximum(z, 0.0)
                x /= x.sum()
                if d and (a @ x - b).max() > tol:
                    continue
                value = float(p @ x)
                if value < best_value:
                    best_value, best_x = value, x
    if best_x is None:
        raise InfeasibleConstraintsError("no point of the simplex satisfies the constraints")
    return best_value, best_x


def _affine_rows(cs: ConstraintSet, player: int, relax: float) -> Tuple[np.ndarray, np.ndarray]:
    constraints = cs.for_player(player)
    if not all(isinstance(c, AffineConstraint) for c in constraints):
        raise UnsupportedConstraintError("best responses need affine constraints")
    if not constraints:
        return np.zeros((0, 0)), np.zeros(0)
    a = np.array([c.coefficients for c in constraints])
    b = np.array([c.offset + relax for c in constraints])
    return a, b


def best_response_lp(game: Game, cs: ConstraintSet, player: int, x: MixedProfile,
                     relax: float = 0.0) -> Tuple[float, np.ndarray]:
    """Cheapest feasible deviation of `player` against x_{-i}; relax > 0 uses {g <= relax}."""
    game.check_player(player)
    x.validate(game.space)
    p = game.cost_grad(player, x)
    a, b = _affine_rows(cs, player, relax)
    try:
        return solve_simplex_lp(p, a.reshape(-1, p.size), b)
    except InfeasibleConstraintsError:
        raise InfeasibleConstraintsError(f"player {player} has an empty feasible set") from None


def nash_gap(game: Game, cs: ConstraintSet, x: MixedProfile, relax: float = 0.0) -> NashGapReport:
    """Sum over players of current expected cost minus best feasible-response cost."""
    cs.check_space(game.space)
    gaps, responses, values = [], [], []
    for i in range(game.players):
        value, response = best_response_lp(game, cs, i, x, relax)
        raw = game.cost_value(i, x) - value
        if raw < -GAP_TOL:
            # An infeasible x_i can undercut every feasible deviation.
            logger.debug("player %d: current cost below best feasible response by %.3g", i, -raw)
        gaps.append(max(raw, 0.0))
        responses.append(response)
        values.append(value)
    return NashGapReport(tuple(gaps), float(sum(gaps)), tuple(responses), tuple(values), relax)


def multiplier_summary(state: "SolverState") -> float:
    return float(sum(float(np.sum(lam)) for lam in state.multipliers))


def constraint_multiplier_bounds(game: Game, cs: ConstraintSet, player: int) -> np.ndarray:
    """2 (Phi_max - Phi_min) / |xi_{i,m}| per constraint; inf where xi_{i,m} >= 0."""
    margins = constraint_margins(cs, player)
    spread = game.phi_max - game.phi_min
    bounds = np.full(margins.shape, np.inf)
    strict = margins < 0
    bounds[strict] = 2.0 * spread / np.abs(margins[strict])
    return bounds


def optimal_multiplier_bound(game: Game, cs: ConstraintSet, player: int) -> float:
    margin = slater_margin(cs, player)
    if margin >= 0:
        raise SlaterViolatedError(
            f"player {player} has Slater margin {margin:g}; optimal multipliers are unbounded"
        )
    bounds = constraint_multiplier_bounds(game, cs, player)
    return float(bounds.max()) if bounds.size else 0.0
