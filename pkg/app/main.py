from pathlib import Path
from typing import NoReturn, Optional

import click
import typer

from app.core.config import settings
from app.core.exceptions import SolverError
from app.core.logging import configure_logging
from app.services import harness

app = typer.Typer(
    name=settings.PROJECT_NAME,
    help="Constrained potential game solver: IGD runs, sweeps and diagnostics.",
    no_args_is_help=True,
    add_completion=False,
)

ConfigOption = typer.Option(..., "--config", "-c", help="TOML experiment config.")
OutOption = typer.Option(None, "--out", "-o", help="Output directory (overrides the config).")
QuietOption = typer.Option(False, "--quiet", "-q", help="Only log warnings and errors.")

# Reported as one `error:` line with exit code 1.
CLI_ERRORS = (SolverError, OSError)


def _fail(e: Exception) -> NoReturn:
    typer.echo(f"error: {e}", err=True)
    raise typer.Exit(code=1)


def _load(config: Path, seed: Optional[int] = None):
    cfg = harness.load_config(config)
    if seed is not None:
        cfg = cfg.model_copy(update={"solver": cfg.solver.model_copy(update={"seed": seed})})
    return cfg


@app.command()
def run(config: Path = ConfigOption, out: Optional[Path] = OutOption,
        seed: Optional[int] = typer.Option(None, "--seed", help="Seed for dirichlet initialization."),
        quiet: bool = QuietOption):
    """Run IGD once and write trajectory, profile and charts."""
    configure_logging(quiet)
    try:
        record = harness.run_single(_load(config, seed), out)
    except CLI_ERRORS as e:
        _fail(e)
    typer.echo(f"fingerprint {record.fingerprint}")
    typer.echo(f"output      {record.output_dir}")
    typer.echo(f"eta         {record.eta:.6g}")
    typer.echo(f"nash gap    {record.initial_gap:.6g} -> {record.final_gap:.6g}")
    typer.echo(f"violation   {record.final_violation:.6g}")
    typer.echo(f"sum lambda  {record.final_lambda_sum:.6g}")
    typer.echo(f"grad map    {record.gradient_mapping:.6g}")


@app.command()
def sweep(config: Path = ConfigOption, out: Optional[Path] = OutOption,
          workers: Optional[int] = typer.Option(None, "--workers", "-w", min=1, help="Parallel runs."),
          seed: Optional[int] = typer.Option(None, "--seed"),
          quiet: bool = QuietOption):
    """Run every configuration of the [sweep] grids."""
    configure_logging(quiet)
    try:
        result = harness.run_sweep(_load(config, seed), out, workers)
    except CLI_ERRORS as e:
        _fail(e)
    typer.echo(f"{len(result.records)} runs, {len(result.failures)} failed; summary {result.summary_path}")
    for failure in result.failures:
        typer.echo(f"  #{failure.index} {failure.point}: {failure.error}", err=True)


@app.command()
def validate(config: Path = ConfigOption, quiet: bool = QuietOption):
    """Check a config and report diagnostics; exits 1 on errors."""
    configure_logging(quiet)
    try:
        diagnostics = harness.validate_config(_load(config))
    except CLI_ERRORS as e:
        _fail(e)
    for d in diagnostics:
        typer.echo(str(d), err=d.level == "error")
    if any(d.level == "error" for d in diagnostics):
        raise typer.Exit(code=1)
    typer.echo("ok")


@app.command()
def gap(config: Path = ConfigOption,
        profile: Path = typer.Option(..., "--profile", "-p", help="Profile JSON written by 'run'."),
        relax: float = typer.Option(0.0, "--relax", min=0.0, help="Measure deviations over {g <= relax}."),
        quiet: bool = QuietOption):
    """Nash gap of a saved profile."""
    configure_logging(quiet)
    try:
        report = harness.compute_gap(_load(config), profile, relax)
    except CLI_ERRORS as e:
        _fail(e)
    typer.echo(report.model_dump_json(indent=2))


@app.command()
def info(config: Path = ConfigOption,
         eps: float = typer.Option(0.01, "--eps", click_type=click.FloatRange(min=0.0, min_open=True), help="Target accuracy for T."),
         quiet: bool = QuietOption):
    """Step sizes, multiplier bounds and the recommended iteration count."""
    configure_logging(quiet)
    try:
        report = harness.info_report(_load(config), eps)
    except CLI_ERRORS as e:
        _fail(e)
    typer.echo(f"{settings.PROJECT_NAME} {settings.PROJECT_VERSION}")
    typer.echo(report.model_dump_json(indent=2))


@app.command()
def history(fingerprint: Optional[str] = typer.Option(None, "--fingerprint"),
            limit: int = typer.Option(20, "--limit", min=1)):
    """List registered runs, newest first."""
    from app.db.base import get_runs
    from app.db.session import get_db

    try:
        with get_db() as session:
            rows = get_runs(session, fingerprint, limit)
    except CLI_ERRORS as e:
        _fail(e)
    for row in rows:
        typer.echo(f"{row.run_id:5d} {row.created_at:%Y-%m-%d %H:%M:%S} {row.fingerprint[:8]} "
                   f"gap={row.final_gap:.4g} violation={row.final_violation:.4g} {row.output_dir}")


if __name__ == "__main__":
    app()
