"""
Independent projected gradient descent on phi(x) = max_{lambda >= 0} L~(x, lambda),
where L~(x, lambda) = Phi(x) + lambda^T g(x) - mu ||lambda||^2.

Each iteration first sets the multipliers to their closed-form maximizer
lambda = max(0, g(x)) / (2 mu), then every player takes a projected step on
its own cost gradient plus the multiplier-weighted constraint gradients. All
players step from the same iterate.
"""
import csv
import logging
import math
from dataclasses import dataclass, field
from pathlib import Path
from typing import Iterator, List, Optional, Sequence, Tuple, Union

import numpy as np

from app.core.exceptions import InvalidParameterError, UnsupportedConstraintError
from app.services import constraints as cons
from app.services.constraints import ConstraintSet
from app.services.game import ActionSpace, Game, MixedProfile
from app.services.metrics import multiplier_summary, nash_gap
from app.services.projection import project_simplex

logger = logging.getLogger(__name__)

STEP_RULES = ("smoothness", "lemma")
INIT_RULES = ("uniform", "dirichlet")
TRAJECTORY_COLUMNS = ("t", "phi", "lagrangian", "nash_gap", "violation", "lambda_sum", "displacement")


@dataclass(frozen=True)
class SolverParams:
    mu: float
    eta: Optional[float] = None
    iterations: int = 1000
    record_every: int = 100
    step_rule: str = "smoothness"
    init: str = "uniform"
    seed: Optional[int] = None
    descent_tol: float = 1e-8

    def __post_init__(self):
        if not self.mu > 0:
            raise InvalidParameterError(f"regularizer mu must be positive, got {self.mu}")
        if self.eta is not None and not self.eta > 0:
            raise InvalidParameterError(f"step size eta must be positive, got {self.eta}")
        if self.iterations < 0:
            raise InvalidParameterError("iterations must be non-negative")
        if self.record_every < 1:
            raise InvalidParameterError("record_every must be at least 1")
        if self.step_rule not in STEP_RULES:
            raise InvalidParameterError(f"unknown step rule {self.step_rule!r}, expected one of {STEP_RULES}")
        if self.init not in INIT_RULES:
            raise InvalidParameterError(f"unknown initialization {self.init!r}, expected one of {INIT_RULES}")


@dataclass(frozen=True, eq=False)
class SolverState:
    x: MixedProfile
    multipliers: Tuple[np.ndarray, ...]
    iteration: int = 0

    @classmethod
    def initial(cls, x: MixedProfile, cs: ConstraintSet) -> "SolverState":
        return cls(x, tuple(np.zeros(d) for d in cs.dims), 0)


@dataclass(frozen=True, eq=False)
class TrajectoryRow:
    t: int
    x: MixedProfile
    multipliers: Tuple[np.ndarray, ...]
    phi: float
    lagrangian: float
    nash_gap: float
    violation: float
    lambda_sum: float
    displacement: float

    def values(self) -> Tuple[float, ...]:
        return tuple(getattr(self, name) for name in TRAJECTORY_COLUMNS)


@dataclass
class Trajectory:
    rows: List[TrajectoryRow] = field(default_factory=list)

    def __len__(self) -> int:
        return len(self.rows)

    def __iter__(self) -> Iterator[TrajectoryRow]:
        return iter(self.rows)

    def __getitem__(self, index: int) -> TrajectoryRow:
        return self.rows[index]

    def append(self, row: TrajectoryRow) -> None:
        if self.rows and row.t <= self.rows[-1].t:
            raise InvalidParameterError("trajectory timestamps must be strictly increasing")
        self.rows.append(row)

    def column(self, name: str) -> np.ndarray:
        if name not in TRAJECTORY_COLUMNS:
            raise KeyError(name)
        return np.array([getattr(row, name) for row in self.rows], dtype=float)

    def to_csv(self, path: Union[str, Path]) -> Path:
        path = Path(path)
        with path.open("w", newline="") as f:
            writer = csv.writer(f, lineterminator="\n")
            writer.writerow(TRAJECTORY_COLUMNS)
            for row in self.rows:
                writer.writerow([row.t] + [repr(float(v)) for v in row.values()[1:]])
        return path


@dataclass(frozen=True, eq=False)
class SolverResult:
    trajectory: Trajectory
    best: SolverState
    best_displacement: float
    final: SolverState
    eta: float
    max_ascent: float
    descent_violations: int


def lambda_max(cs: ConstraintSet, mu: float) -> float:
    """sqrt(d) * max(0, G_max) / (2 mu), a bound on the norm of every multiplier iterate."""
    if cs.total == 0:
        return 0.0
    return math.sqrt(cs.total) * max(0.0, cons.g_max(cs)) / (2.0 * mu)


def _check_mu(mu: float) -> None:
    if not mu > 0:
        raise InvalidParameterError(f"regularizer mu must be positive, got {mu}")


def _multipliers(cs: ConstraintSet, x: MixedProfile, mu: float) -> Tuple[np.ndarray, ...]:
    return tuple(np.maximum(cons.evaluate(cs, i, x[i]), 0.0) / (2.0 * mu) for i in range(cs.players))


def multiplier_step(cs: ConstraintSet, x: MixedProfile, mu: float) -> Tuple[np.ndarray, ...]:
    """Maximizer of lambda^T g(x) - mu ||lambda||^2 over the nonnegative orthant."""
    _check_mu(mu)
    return _multipliers(cs, x, mu)


def lagrangian(game: Game, cs: ConstraintSet, x: MixedProfile,
               multipliers: Sequence[np.ndarray], mu: float) -> float:
    """Regularized Lagrangian L~(x, lambda)."""
    value = game.potential_value(x)
    for i, lam in enumerate(multipliers):
        lam = np.asarray(lam, dtype=float)
        value += float(lam @ cons.evaluate(cs, i, x[i])) - mu * float(lam @ lam)
    return value


def _phi_value(game: Game, cs: ConstraintSet, x: MixedProfile, mu: float) -> float:
    penalty = sum(float(np.sum(np.maximum(cons.evaluate(cs, i, x[i]), 0.0) ** 2)) for i in range(cs.players))
    return game.potential_value(x) + penalty / (4.0 * mu)


def phi(game: Game, cs: ConstraintSet, x: MixedProfile, mu: float) -> float:
    """phi(x) = Phi(x) + sum max(0, g)^2 / (4 mu); equals Phi(x) on the feasible set."""
    _check_mu(mu)
    x.validate(game.space)
    return _phi_value(game, cs, x, mu)


def _constraint_term(cs: ConstraintSet, player: int, x_i: np.ndarray, lam: np.ndarray) -> np.ndarray:
    term = np.zeros_like(x_i)
    for weight, c in zip(lam, cs.per_player[player]):
        if weight > 0:
            term = term + weight * c.gradient(x_i)
    return term


def phi_gradient(game: Game, cs: ConstraintSet, x: MixedProfile, mu: float) -> Tuple[np.ndarray, ...]:
    """grad phi(x) = grad_x L~(x, lambda*(x)), taken with the potential gradient."""
    _check_mu(mu)
    x.validate(game.space)
    lam = _multipliers(cs, x, mu)
    return tuple(game.potential_grad(i, x) + _constraint_term(cs, i, x[i], lam[i]) for i in range(game.players))


def smoothness_bound(game: Game, cs: ConstraintSet, mu: float) -> float:
    """
    Upper bound on the smoothness of phi along the product of simplices.

    The potential part uses the centred tensor (constant shifts vanish on
    tangent directions): each Hessian block entry is at most half the
    potential's range, and a row meets sum_{j != i} |A_j| of them. The
    penalty max(0, g)^2 / (4 mu) of an affine g adds |c - mean(c)|^2 / (2 mu)
    for constraints that can become active. Floored at 1.
    """
    _check_mu(mu)
    if not cs.is_affine:
        raise UnsupportedConstraintError("the smoothness step rule needs affine constraints; use 'lemma' or set eta")
    actions = np.array(game.space.actions)
    beta_potential = float((actions.sum() - actions.min()) * (game.phi_max - game.phi_min) / 2.0)
    beta_penalty = 0.0
    for constraints in cs.per_player:
        curvature = 0.0
        for c in constraints:
            if c.vertex_values().max() > 0:
                centred = c.coefficients - c.coefficients.mean()
                curvature += float(centred @ centred)
        beta_penalty = max(beta_penalty, curvature)
    beta = beta_potential + beta_penalty / (2.0 * mu) + lambda_max(cs, mu) * cs.gamma
    return max(beta, 1.0)


def lemma_step_size(game: Game, cs: ConstraintSet, mu: float) -> float:
    """eta = mu / (4 ((n A_max Phi_max)^2 + (Lambda_max gamma)^2)), with Phi_max = max |Phi|."""
    _check_mu(mu)
    phi_abs = float(np.abs(game.potential).max())
    scale = (game.players * game.space.max_actions * phi_abs) ** 2 + (lambda_max(cs, mu) * cs.gamma) ** 2
    if scale == 0:
        raise InvalidParameterError("the lemma step size is undefined for an identically zero potential")
    return mu / (4.0 * scale)


def step_size(game: Game, cs: ConstraintSet, params: SolverParams) -> float:
    if params.eta is not None:
        return params.eta
    if params.step_rule == "lemma":
        return lemma_step_size(game, cs, params.mu)
    return 1.0 / smoothness_bound(game, cs, params.mu)


def igd_step(game: Game, cs: ConstraintSet, state: SolverState, params: SolverParams,
             eta: Optional[float] = None) -> SolverState:
    eta = step_size(game, cs, params) if eta is None else eta
    x = state.x
    lam = _multipliers(cs, x, params.mu)
    strategies = []
    for i in range(game.players):
        grad = game.cost_grad(i, x) + _constraint_term(cs, i, x[i], lam[i])
        strategies.append(project_simplex(x[i] - eta * grad))
    return SolverState(MixedProfile(tuple(strategies)), lam, state.iteration + 1)


def gradient_mapping_norm(game: Game, cs: ConstraintSet, x: MixedProfile, params: SolverParams,
                          eta: Optional[float] = None) -> float:
    """||G^eta(x)|| = ||x - x+|| / eta; small values certify approximate stationarity."""
    eta = step_size(game, cs, params) if eta is None else eta
    step = igd_step(game, cs, SolverState.initial(x, cs), params, eta)
    return x.distance(step.x) / eta


def recommended_T(game: Game, cs: ConstraintSet, params: SolverParams, eps: float) -> int:
    """
    T = (32 / (eps^2 mu)) (Phi_max + Lambda_max sqrt(d) G_max) ((n A_max)^2 + (Lambda_max gamma)^2)

    Diagnostic only; G_max is clamped at 0 as in lambda_max.
    """
    if not eps > 0:
        raise InvalidParameterError("eps must be positive")
    mu = params.mu
    d = cs.total
    g = max(0.0, cons.g_max(cs)) if d else 0.0
    lam = lambda_max(cs, mu)
    n_a = game.players * game.space.max_actions
    value = 32.0 / (eps ** 2 * mu) * (game.phi_max + lam * math.sqrt(d) * g) * (n_a ** 2 + (lam * cs.gamma) ** 2)
    return int(math.ceil(value))


def initial_profile(space: ActionSpace, params: SolverParams) -> MixedProfile:
    if params.init == "dirichlet":
        return MixedProfile.dirichlet(space, params.seed)
    return MixedProfile.uniform(space)


def _record(game: Game, cs: ConstraintSet, state: SolverState, t: int, phi_value: float,
            displacement: float, mu: float) -> TrajectoryRow:
    report = nash_gap(game, cs, state.x)
    return TrajectoryRow(
        t=t,
        x=state.x,
        multipliers=state.multipliers,
        phi=phi_value,
        lagrangian=lagrangian(game, cs, state.x, state.multipliers, mu),
        nash_gap=report.total,
        violation=cons.violation(cs, state.x),
        lambda_sum=multiplier_summary(state),
        displacement=displacement,
    )


def run(game: Game, cs: ConstraintSet, x0: Optional[MixedProfile], params: SolverParams) -> SolverResult:
    """
    Iterate igd_step T times, recording every `record_every` steps and at T.

    A row's displacement is ||x^{t+1} - x^t|| for the step taken from x^t
    (for t = T a look-ahead step that is not committed). The returned best
    iterate minimizes that displacement, earliest on ties.
    """
    cs.check_space(game.space)
    x0 = initial_profile(game.space, params) if x0 is None else x0
    x0.validate(game.space)
    eta = step_size(game, cs, params)
    logger.info("IGD run: T=%d mu=%g eta=%.6g (%s)", params.iterations, params.mu, eta,
                "explicit" if params.eta is not None else params.step_rule)

    trajectory = Trajectory()
    state = SolverState.initial(x0, cs)
    phi_current = _phi_value(game, cs, state.x, params.mu)
    best, best_displacement = state, math.inf
    max_ascent, violations = -math.inf, 0

    for t in range(params.iterations + 1):
        nxt = igd_step(game, cs, state, params, eta)
        displacement = state.x.distance(nxt.x)
        if t % params.record_every == 0 or t == params.iterations:
            row = _record(game, cs, state, t, phi_current, displacement, params.mu)
            trajectory.append(row)
            logger.debug("t=%d phi=%.10g gap=%.4g violation=%.4g", t, row.phi, row.nash_gap, row.violation)
        if displacement < best_displacement:
            best, best_displacement = state, displacement
        if t == params.iterations:
            break
        phi_next = _phi_value(game, cs, nxt.x, params.mu)
        ascent = phi_next - phi_current
        max_ascent = max(max_ascent, ascent)
        if ascent > params.descent_tol:
            violations += 1
        state, phi_current = nxt, phi_next

    if not params.iterations:
        max_ascent = 0.0
    if violations:
        logger.warning("phi increased on %d of %d steps (max ascent %.3g); eta=%.3g exceeds the descent regime",
                       violations, params.iterations, max_ascent, eta)
    logger.info("IGD done: best displacement %.3g at t=%d, final gap %.4g",
                best_displacement, best.iteration, trajectory[-1].nash_gap)
    return SolverResult(trajectory, best, best_displacement, state, eta, max_ascent, violations)
