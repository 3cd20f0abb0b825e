"""
Experiment runner: config ingestion and validation, single runs, sweeps
over hyperparameter grids and the artifacts they leave on disk.

Every run writes into its own directory:

    trajectory.csv   recorded metrics, one row per recorded iteration
    profile.json     the best iterate (smallest step displacement)
    spider.svg       one axis per action, one polygon per player
    metrics.svg      Nash gap, violation and multiplier sum against t
"""
import csv
import itertools
import logging
import math
import multiprocessing

try:
    import tomllib
except ModuleNotFoundError:  # Python < 3.11
    import tomli as tomllib
from dataclasses import dataclass, field
from pathlib import Path
from typing import Dict, List, Optional, Tuple, Union

from pydantic import ValidationError

from app.core.config import settings
from app.core.exceptions import ConfigError, InfeasibleConstraintsError, SlaterViolatedError, SolverError
from app.schemas.constraints import ConstraintDocument
from app.schemas.experiment import ExperimentConfig
from app.schemas.game import GameDocument
from app.schemas.report import Diagnostic, InfoReport, NashGapDocument, ProfileDocument, RunRecord, SweepFailure
from app.services import constraints as cons
from app.services import plotting, solver
from app.services.congestion import compile_instance
from app.services.constraints import ConstraintSet, gas_budget
from app.services.game import ActionSpace, Game
from app.services.metrics import nash_gap, optimal_multiplier_bound, solve_simplex_lp

logger = logging.getLogger(__name__)

TRAJECTORY_FILE = "trajectory.csv"
PROFILE_FILE = "profile.json"
SPIDER_FILE = "spider.svg"
METRICS_FILE = "metrics.svg"
SUMMARY_FILE = "summary.csv"
FAILURES_FILE = "failures.csv"
OVERLAY_FILE = "gap_overlay.svg"

SWEEP_KEYS = ("budgets", "eta", "mu", "hw_slope")
SUMMARY_METRICS = ("fingerprint", "eta_used", "initial_gap", "final_gap", "final_violation",
                   "final_lambda_sum", "best_displacement", "gradient_mapping", "descent_violations", "run_dir")


@dataclass(frozen=True, eq=False)
class Problem:
    game: Game
    constraints: ConstraintSet
    labels: List[str]


@dataclass(frozen=True)
class SweepPoint:
    index: int
    values: Dict[str, float]
    config: ExperimentConfig

    @property
    def label(self) -> str:
        return ", ".join(f"{k}={v:g}" for k, v in self.values.items()) or "base"


@dataclass
class SweepResult:
    records: List[Tuple[SweepPoint, RunRecord]] = field(default_factory=list)
    failures: List[SweepFailure] = field(default_factory=list)
    summary_path: Optional[Path] = None


def _format_validation_error(exc: ValidationError) -> str:
    return "; ".join(
        f"{'.'.join(str(part) for part in err['loc']) or '<root>'}: {err['msg']}" for err in exc.errors()
    )


def load_config(path: Union[str, Path]) -> ExperimentConfig:
    path = Path(path)
    try:
        raw = tomllib.loads(path.read_text(encoding="utf8"))
    except OSError as e:
        raise ConfigError(f"{path}: cannot read config: {e.strerror or e}") from e
    except tomllib.TOMLDecodeError as e:
        raise ConfigError(f"{path}: invalid TOML: {e}") from e
    try:
        return ExperimentConfig(**raw, base_dir=str(path.resolve().parent))
    except ValidationError as e:
        raise ConfigError(f"{path}: {_format_validation_error(e)}") from e


def _read_document(path: Path, model):
    try:
        return model.model_validate_json(path.read_text(encoding="utf8"))
    except OSError as e:
        raise ConfigError(f"{path}: cannot read: {e.strerror or e}") from e
    except ValidationError as e:
        raise ConfigError(f"{path}: {_format_validation_error(e)}") from e


def resolve_problem(config: ExperimentConfig) -> Problem:
    spec = config.instance
    if spec.is_file_based:
        game = _read_document(config.resolve_path(spec.game_file), GameDocument).to_game()
        if spec.constraints_file:
            doc = _read_document(config.resolve_path(spec.constraints_file), ConstraintDocument)
            cs = doc.to_constraint_set()
        else:
            cs = ConstraintSet.empty(game.players)
        cs.check_space(game.space)
        labels = [f"a{k + 1}" for k in range(game.space.actions[0])]
        return Problem(game, cs, labels)
    game, cs = compile_instance(spec.to_instance())
    return Problem(game, cs, spec.path_names())


def _constraint_set(config: ExperimentConfig) -> ConstraintSet:
    """Constraints alone, without enumerating the joint profile space."""
    spec = config.instance
    if spec.is_file_based:
        return resolve_problem(config).constraints
    inst = spec.to_instance()
    return ConstraintSet(tuple((gas_budget(inst.network.gas, b),) for b in inst.gas_budgets))


def _constraint_diagnostics(cs: ConstraintSet) -> List[Diagnostic]:
    out = []
    for i in range(cs.players):
        constraints = cs.for_player(i)
        if not constraints:
            continue
        a = [c.coefficients for c in constraints]
        b = [c.offset for c in constraints]
        try:
            solve_simplex_lp([0.0] * constraints[0].size, a, b)
        except InfeasibleConstraintsError:
            out.append(Diagnostic(level="error", message=f"player {i}: no strategy satisfies the constraints"))
            continue
        margin = cons.slater_margin(cs, i)
        if margin >= 0:
            out.append(Diagnostic(
                level="warning",
                message=f"player {i}: Slater margin {margin:g} >= 0; no strictly feasible pure action",
            ))
        for m, c in enumerate(constraints):
            if c.vertex_values().max() <= 0:
                out.append(Diagnostic(level="info", message=f"player {i}: constraint {m} is never active"))
    return out


def validate_config(config: ExperimentConfig) -> List[Diagnostic]:
    diagnostics: List[Diagnostic] = []

    def error(message: str) -> None:
        diagnostics.append(Diagnostic(level="error", message=message))

    s = config.solver
    if not s.mu > 0:
        error(f"solver.mu must be positive, got {s.mu:g}")
    if s.eta is not None and not s.eta > 0:
        error(f"solver.eta must be positive, got {s.eta:g}")
    if s.iterations < 0:
        error("solver.iterations must be non-negative")
    if s.record_every < 1:
        error("solver.record_every must be at least 1")

    if config.sweep is not None:
        grids = config.sweep.grids()
        if not grids:
            error("sweep section defines no grid")
        for name, values in grids.items():
            if not values:
                error(f"sweep.{name} is empty")
            if name in ("mu", "eta") and any(not v > 0 for v in values):
                error(f"sweep.{name} values must be positive")
        if config.instance.is_file_based and {"budgets", "hw_slope"} & set(grids):
            error("sweep.budgets and sweep.hw_slope need an inline congestion instance")

    spec = config.instance
    if spec.is_file_based:
        for name in filter(None, (spec.game_file, spec.constraints_file)):
            if not config.resolve_path(name).is_file():
                error(f"instance file not found: {name}")
        if any(d.level == "error" for d in diagnostics):
            return diagnostics
    else:
        budgets = spec.budget_list()
        if len(budgets) != spec.players:
            error(f"instance.budgets lists {len(budgets)} values for {spec.players} players")
            return diagnostics
        profiles = len(spec.paths) ** spec.players
        if profiles > settings.MAX_PROFILES:
            error(f"{profiles} joint pure profiles exceed the enumeration limit {settings.MAX_PROFILES}")
        gas = [p.gas if p.gas is not None else float(p.edges) for p in spec.paths]
        for i, b in enumerate(budgets):
            if b < min(gas):
                error(f"player {i}: budget {b:g} is below the cheapest path's gas cost {min(gas):g}")

    if any(d.level == "error" for d in diagnostics):
        return diagnostics
    try:
        diagnostics += _constraint_diagnostics(_constraint_set(config))
    except SolverError as e:
        error(str(e))
    return diagnostics


def _raise_on_errors(diagnostics: List[Diagnostic]) -> None:
    errors = [d.message for d in diagnostics if d.level == "error"]
    if errors:
        raise ConfigError("; ".join(errors))
    for d in diagnostics:
        if d.level == "warning":
            logger.warning(d.message)


def _register(record: RunRecord) -> None:
    from app.db.base import record_run
    from app.db.session import get_db

    with get_db() as session:
        record_run(session, record)
    logger.debug("registered run %s", record.fingerprint)


def run_single(config: ExperimentConfig, out_dir: Union[None, str, Path] = None, register: bool = True) -> RunRecord:
    _raise_on_errors(validate_config(config))
    problem = resolve_problem(config)
    params = config.solver.to_params()
    out = Path(out_dir or config.output_dir or settings.OUTPUT_DIR)
    out.mkdir(parents=True, exist_ok=True)

    result = solver.run(problem.game, problem.constraints, None, params)
    trajectory = result.trajectory
    trajectory_path = trajectory.to_csv(out / TRAJECTORY_FILE)

    best = result.best
    profile_path = out / PROFILE_FILE
    profile_path.write_text(
        ProfileDocument.from_profile(best.x, problem.labels, best.iteration).model_dump_json(indent=2) + "\n",
        encoding="utf8",
    )
    plotting.write_svg(out / SPIDER_FILE, plotting.spider_chart(best.x.strategies, problem.labels))
    plotting.write_svg(out / METRICS_FILE, plotting.metric_chart(trajectory))

    last = trajectory[-1]
    record = RunRecord(
        fingerprint=config.fingerprint(),
        output_dir=str(out),
        trajectory_path=str(trajectory_path),
        profile_path=str(profile_path),
        iterations=params.iterations,
        eta=result.eta,
        initial_gap=trajectory[0].nash_gap,
        final_gap=last.nash_gap,
        final_violation=last.violation,
        final_lambda_sum=last.lambda_sum,
        best_displacement=result.best_displacement,
        gradient_mapping=solver.gradient_mapping_norm(problem.game, problem.constraints, best.x, params, result.eta),
        descent_violations=result.descent_violations,
    )
    logger.info("run %s written to %s (final gap %.4g)", record.fingerprint[:8], out, record.final_gap)
    if register and settings.DATABASE_URL:
        _register(record)
    return record


def _apply(config: ExperimentConfig, values: Dict[str, float]) -> ExperimentConfig:
    instance, solver_spec = config.instance, config.solver
    if "budgets" in values:
        instance = instance.model_copy(update={"budgets": values["budgets"]})
    if "hw_slope" in values:
        instance = instance.model_copy(update={"hw_slope": values["hw_slope"]})
    if "eta" in values:
        solver_spec = solver_spec.model_copy(update={"eta": values["eta"]})
    if "mu" in values:
        solver_spec = solver_spec.model_copy(update={"mu": values["mu"]})
    return config.model_copy(update={"instance": instance, "solver": solver_spec, "sweep": None})


def expand_sweep(config: ExperimentConfig) -> List[SweepPoint]:
    """Cartesian product of the sweep grids in budgets, eta, mu, hw_slope order."""
    grids = config.sweep.grids() if config.sweep is not None else {}
    keys = [k for k in SWEEP_KEYS if k in grids]
    points = []
    for index, combo in enumerate(itertools.product(*(grids[k] for k in keys))):
        values = dict(zip(keys, combo))
        points.append(SweepPoint(index, values, _apply(config, values)))
    return points


def _run_point(task: Tuple[SweepPoint, str]) -> Tuple[int, Optional[RunRecord], Optional[str]]:
    point, run_dir = task
    try:
        return point.index, run_single(point.config, run_dir, register=False), None
    except (SolverError, OSError) as e:
        logger.warning("sweep point %d (%s) failed: %s", point.index, point.label, e)
        return point.index, None, str(e)


def _read_gap_curve(path: Union[str, Path]) -> Tuple[List[float], List[float]]:
    t, gap = [], []
    with open(path, newline="") as f:
        for row in csv.DictReader(f):
            t.append(float(row["t"]))
            gap.append(float(row["nash_gap"]))
    return t, gap


def run_sweep(config: ExperimentConfig, out_dir: Union[None, str, Path] = None,
              workers: Optional[int] = None) -> SweepResult:
    if config.sweep is None:
        raise ConfigError("config has no [sweep] section")
    _raise_on_errors(validate_config(config))
    out = Path(out_dir or config.output_dir or settings.OUTPUT_DIR)
    out.mkdir(parents=True, exist_ok=True)
    workers = workers or settings.SWEEP_WORKERS

    points = expand_sweep(config)
    tasks = [(p, str(out / f"{p.index:03d}-{p.config.fingerprint()[:8]}")) for p in points]
    logger.info("sweep: %d configurations, %d worker(s)", len(points), workers)
    if workers > 1:
        with multiprocessing.Pool(workers) as pool:
            outcomes = pool.map(_run_point, tasks)
    else:
        outcomes = [_run_point(task) for task in tasks]

    result = SweepResult()
    for point, (_, record, error) in zip(points, outcomes):
        if record is None:
            result.failures.append(SweepFailure(index=point.index, point=point.values, error=error))
        else:
            result.records.append((point, record))
            if settings.DATABASE_URL:
                _register(record)

    keys = [k for k in SWEEP_KEYS if points and k in points[0].values]
    result.summary_path = out / SUMMARY_FILE
    with result.summary_path.open("w", newline="") as f:
        writer = csv.writer(f, lineterminator="\n")
        writer.writerow(["index", *keys, *SUMMARY_METRICS])
        for point, record in result.records:
            writer.writerow([
                point.index, *(repr(float(point.values[k])) for k in keys),
                record.fingerprint, repr(record.eta), repr(record.initial_gap), repr(record.final_gap),
                repr(record.final_violation), repr(record.final_lambda_sum), repr(record.best_displacement),
                repr(record.gradient_mapping), record.descent_violations, record.output_dir,
            ])
    if result.failures:
        with (out / FAILURES_FILE).open("w", newline="") as f:
            writer = csv.writer(f, lineterminator="\n")
            writer.writerow(["index", *keys, "error"])
            for failure in result.failures:
                writer.writerow([failure.index, *(failure.point[k] for k in keys), failure.error])
        logger.warning("sweep: %d of %d configurations failed", len(result.failures), len(points))

    curves = {point.label: _read_gap_curve(record.trajectory_path) for point, record in result.records}
    if curves:
        plotting.write_svg(out / OVERLAY_FILE, plotting.gap_overlay(curves))
    return result


def compute_gap(config: ExperimentConfig, profile_path: Union[str, Path], relax: float = 0.0) -> NashGapDocument:
    problem = resolve_problem(config)
    x = _read_document(Path(profile_path), ProfileDocument).to_profile()
    return NashGapDocument.from_report(nash_gap(problem.game, problem.constraints, x, relax))


def _finite_or_none(value: float) -> Optional[float]:
    return value if math.isfinite(value) else None


def info_report(config: ExperimentConfig, eps: float = 0.01) -> InfoReport:
    _raise_on_errors(validate_config(config))
    problem = resolve_problem(config)
    game, cs = problem.game, problem.constraints
    params = config.solver.to_params()
    space: ActionSpace = game.space

    bounds: List[Optional[float]] = []
    for i in range(game.players):
        try:
            bounds.append(_finite_or_none(optimal_multiplier_bound(game, cs, i)))
        except SlaterViolatedError:
            bounds.append(None)
    try:
        lemma_eta = solver.lemma_step_size(game, cs, params.mu)
    except SolverError:
        lemma_eta = None
    return InfoReport(
        players=game.players,
        actions=list(space.actions),
        profiles=space.num_profiles,
        phi_max=game.phi_max,
        phi_min=game.phi_min,
        constraints=cs.total,
        g_max=_finite_or_none(cons.g_max(cs)),
        lambda_max=solver.lambda_max(cs, params.mu),
        step_rule="explicit" if params.eta is not None else params.step_rule,
        eta=solver.step_size(game, cs, params),
        lemma_eta=lemma_eta,
        recommended_T=solver.recommended_T(game, cs, params, eps),
        eps=eps,
        slater_margins=[_finite_or_none(cons.slater_margin(cs, i)) for i in range(game.players)],
        multiplier_bounds=bounds,
    )
