"""CLI for elastoperiodic, built on cyclopts.

Every scenario is a subcommand sharing the same flags::

    elastoperiodic solve-periodic --config run.toml --out runs/solve --workers 4
"""

from __future__ import annotations

import logging
import os
import sys
from pathlib import Path
from typing import Annotated

import cyclopts
from rich import print as rprint
from rich.logging import RichHandler

from elastoperiodic.config import ENV_PREFIX, RunConfig, known_env_prefixes, load_config
from elastoperiodic.errors import ConfigurationError
from elastoperiodic.runner import EXIT_CONFIG, record_config_failure, run_scenario

logger = logging.getLogger("elastoperiodic")

app = cyclopts.App(
    name="elastoperiodic",
    help="Time-periodic solutions and decay of damped nonlinear elastic waves.",
)

ConfigPath = Annotated[Path | None, cyclopts.Parameter(name="--config", help="TOML run configuration")]
OutDir = Annotated[Path | None, cyclopts.Parameter(name="--out", help="Output directory (overrides output_dir)")]
Workers = Annotated[int | None, cyclopts.Parameter(name="--workers", help="FFT worker threads")]
Seed = Annotated[int | None, cyclopts.Parameter(name="--seed", help="Random seed")]
Verbose = Annotated[bool, cyclopts.Parameter(name="--verbose", negative="", help="Log at DEBUG level")]


def configure_logging(*, verbose: bool = False) -> None:
    """Install a single RichHandler on the package logger."""
    logger.setLevel(logging.DEBUG if verbose else logging.INFO)
    if not any(isinstance(handler, RichHandler) for handler in logger.handlers):
        logger.addHandler(RichHandler(show_path=False, rich_tracebacks=False))


def _execute(scenario: str, config: Path | None, out: Path | None, workers: int | None, seed: int | None, *, verbose: bool) -> int:
    configure_logging(verbose=verbose)
    try:
        run_config = load_config(config, scenario=scenario, output_dir=out, workers=workers, seed=seed)
    except ConfigurationError as exc:
        logger.error("Configuration error: %s", exc)  # noqa: TRY400
        return record_config_failure(scenario, out or RunConfig().output_dir, exc)
    return run_scenario(run_config)


@app.command(name="verify-symbols")
def verify_symbols(
    config: ConfigPath = None, out: OutDir = None, workers: Workers = None, seed: Seed = None, *, verbose: Verbose = False
) -> None:
    """Check the per-frequency symbol identities against matrix oracles."""
    sys.exit(_execute("verify-symbols", config, out, workers, seed, verbose=verbose))


@app.command(name="solve-periodic")
def solve_periodic(
    config: ConfigPath = None, out: OutDir = None, workers: Workers = None, seed: Seed = None, *, verbose: Verbose = False
) -> None:
    """Calibrate the forcing, solve for the periodic orbit and sweep the amplitude."""
    sys.exit(_execute("solve-periodic", config, out, workers, seed, verbose=verbose))


@app.command(name="simulate-cauchy")
def simulate_cauchy(
    config: ConfigPath = None, out: OutDir = None, workers: Workers = None, seed: Seed = None, *, verbose: Verbose = False
) -> None:
    """Integrate the forced problem from Gaussian data and record norms."""
    sys.exit(_execute("simulate-cauchy", config, out, workers, seed, verbose=verbose))


@app.command(name="measure-decay")
def measure_decay(
    config: ConfigPath = None, out: OutDir = None, workers: Workers = None, seed: Seed = None, *, verbose: Verbose = False
) -> None:
    """Perturb the periodic orbit and fit decay exponents of the stability norms."""
    sys.exit(_execute("measure-decay", config, out, workers, seed, verbose=verbose))


@app.command(name="probe-kernels")
def probe_kernels(
    config: ConfigPath = None, out: OutDir = None, workers: Workers = None, seed: Seed = None, *, verbose: Verbose = False
) -> None:
    """Measure band-localized kernel decay against the predicted powers."""
    sys.exit(_execute("probe-kernels", config, out, workers, seed, verbose=verbose))


@app.command(name="probe-regularity")
def probe_regularity(
    config: ConfigPath = None, out: OutDir = None, workers: Workers = None, seed: Seed = None, *, verbose: Verbose = False
) -> None:
    """Tabulate derivative norms of the periodic orbit across amplitudes."""
    sys.exit(_execute("probe-regularity", config, out, workers, seed, verbose=verbose))


@app.command(name="check-config")
def check_config(config: ConfigPath = None) -> None:
    """Validate EPW_* environment variables and a config file, and print a summary.

    Unrecognized EPW_* names (in the environment or a local .env) are flagged
    as possible typos.
    """
    known = known_env_prefixes()
    rprint("[bold]elastoperiodic check-config[/bold]")

    epw_vars = {k: v for k, v in sorted(os.environ.items()) if k.startswith(ENV_PREFIX)}
    has_dotenv = _report_dotenv_vars(known)
    if epw_vars:
        rprint(f"\nFound {len(epw_vars)} {ENV_PREFIX}* variable(s):\n")
        for key, value in epw_vars.items():
            marker = "" if _is_known_var(key, known) else "  [yellow]UNRECOGNIZED[/yellow]"
            rprint(f"  {key} = {_truncate(value)}{marker}")
    elif not has_dotenv:
        rprint(f"\nNo {ENV_PREFIX}* environment variables set.")

    try:
        run_config = load_config(config)
    except ConfigurationError as exc:
        rprint(f"\n[red]Configuration error:[/red] {exc}")
        sys.exit(EXIT_CONFIG)
    _print_config_summary(run_config)


def _report_dotenv_vars(known: frozenset[str]) -> bool:
    """Print EPW_* variables found in a local .env file. Returns True if any were found."""
    env_file = Path(".env")
    if not env_file.is_file():
        return False
    from dotenv import dotenv_values  # noqa: PLC0415

    names = sorted(k for k in dotenv_values(env_file) if k.startswith(ENV_PREFIX))
    if not names:
        return False
    rprint(f"\n  .env file found with {len(names)} {ENV_PREFIX}* variable(s): {', '.join(names)}")
    for name in names:
        if not _is_known_var(name, known):
            rprint(f"    [yellow]{name}: UNRECOGNIZED (possible typo)[/yellow]")
    return True


_TRUNCATE_LENGTH = 80


def _is_known_var(key: str, known: frozenset[str]) -> bool:
    return any(key == prefix or key.startswith(prefix + "__") for prefix in known)


def _truncate(value: str) -> str:
    if len(value) > _TRUNCATE_LENGTH:
        return value[: _TRUNCATE_LENGTH - 3] + "..."
    return value


def _print_config_summary(config: RunConfig) -> None:
    params = config.params
    rprint(f"\n  scenario: {config.scenario}")
    rprint(f"  grid: N={config.grid.N}, L={config.grid.L:.6g}")
    rprint(f"  params: mu={params.mu:g}, lambda={params.lam:g}, nu={params.nu:g}")
    rprint(f"  forcing: T={config.forcing.T:g}, amplitude={config.forcing.amplitude:g}")
    rprint(f"  solver: tol={config.solver.tol:g}, max_iter={config.solver.max_iter}, n_t={config.solver.n_t}, p0={config.solver.p0:g}")
    rprint(f"  output_dir: {config.output_dir}")
