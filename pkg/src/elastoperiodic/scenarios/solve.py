"""solve-periodic: calibrate, solve and sweep the forcing amplitude."""

from __future__ import annotations

import logging
from typing import TYPE_CHECKING, NamedTuple

from elastoperiodic.models import AmplitudeRecord, PeriodicSolveReport
from elastoperiodic.periodic import CONTRACTION_TARGET, calibrate_amplitude, residual, solve_periodic

if TYPE_CHECKING:
    from collections.abc import Sequence

    import numpy as np

    from elastoperiodic.config import RunConfig
    from elastoperiodic.periodic import ForcingSpec, PeriodicSolution
    from elastoperiodic.runner import ArtifactWriter

logger = logging.getLogger(__name__)

PERIODICITY_TOLERANCE = 1e-8
SPREAD_TOLERANCE = 0.1


class BaseSolve(NamedTuple):
    """Working forcing and the periodic solution it drives."""

    forcing: ForcingSpec
    solution: PeriodicSolution
    contraction: float


def solve_at(forcing: ForcingSpec, config: RunConfig) -> PeriodicSolution:
    """Solve for u_per under ``forcing`` with the configured solver settings."""
    solver = config.solver
    return solve_periodic(
        forcing, config.quadratic_form(), config.params, tol=solver.tol, max_iter=solver.max_iter, n_t=solver.n_t, p0=solver.p0
    )


def solve_base(config: RunConfig) -> BaseSolve:
    """Calibrate the configured forcing and solve for u_per at the working amplitude."""
    solver = config.solver
    forcing, contraction = calibrate_amplitude(
        config.forcing.build(config.make_grid()), config.quadratic_form(), config.params, n_t=solver.n_t, p0=solver.p0
    )
    return BaseSolve(forcing, solve_at(forcing, config), contraction)


def first_ratio(solution: PeriodicSolution) -> float | None:
    return solution.iterations[1].ratio if len(solution.iterations) > 1 else None


def worst_ratio(solution: PeriodicSolution) -> float | None:
    """Largest r_{k+1}/r_k over the run; None for a one-step solve."""
    ratios = [record.ratio for record in solution.iterations if record.ratio is not None]
    return max(ratios, default=None)


def constant_spread(ratios: Sequence[float]) -> float:
    """max/min − 1 of positive ratios; 0 when fewer than two are positive."""
    positive = [r for r in ratios if r > 0]
    if len(positive) < 2:
        return 0.0
    return max(positive) / min(positive) - 1


def amplitude_sweep(base: BaseSolve, config: RunConfig) -> list[AmplitudeRecord]:
    """Solve at every configured multiple of the working amplitude."""
    solver = config.solver
    records = []
    for factor in solver.amplitude_factors:
        forcing = base.forcing.scaled(factor)
        solution = base.solution if factor == 1.0 else solve_at(forcing, config)
        forcing_norm = forcing.smallness_norm(solver.p0)
        solution_norm = solution.x1_norm(solver.p0)
        records.append(
            AmplitudeRecord(
                factor=factor,
                amplitude=forcing.amplitude,
                forcing_norm=forcing_norm,
                solution_norm=solution_norm,
                ratio=solution_norm / forcing_norm if forcing_norm > 0 else 0.0,
                iterations=len(solution.iterations),
                first_ratio=first_ratio(solution),
                worst_ratio=worst_ratio(solution),
            )
        )
        logger.info("Amplitude factor %g: ||u_per|| / ||g|| = %.4g", factor, records[-1].ratio)
    return records


def write_snapshots(artifacts: ArtifactWriter, solution: PeriodicSolution, stride: int) -> None:
    for m in range(0, solution.n_t, stride):
        artifacts.write_snapshot(f"snapshots/u_per_{m:04d}.epwf", solution.snapshot(m).u)


def run(config: RunConfig, artifacts: ArtifactWriter, _rng: np.random.Generator) -> bool:
    form = config.quadratic_form()
    base = solve_base(config)
    solution = base.solution
    artifacts.write_csv(
        "iterations.csv",
        ("iter", "residual", "ratio"),
        ((record.iteration, record.residual, record.ratio) for record in solution.iterations),
    )
    write_snapshots(artifacts, solution, config.solver.snapshot_stride)

    sweep = amplitude_sweep(base, config)
    artifacts.write_csv(
        "amplitudes.csv",
        ("factor", "amplitude", "forcing_norm", "solution_norm", "ratio"),
        ((r.factor, r.amplitude, r.forcing_norm, r.solution_norm, r.ratio) for r in sweep),
    )
    spread = constant_spread([record.ratio for record in sweep])
    defect = solution.periodicity_defect()
    contracting = all(record.worst_ratio is None or record.worst_ratio < CONTRACTION_TARGET for record in sweep)
    passed = defect <= PERIODICITY_TOLERANCE and spread <= SPREAD_TOLERANCE and contracting
    report = PeriodicSolveReport(
        converged=True,
        calibrated_amplitude=base.forcing.amplitude,
        iterations=list(solution.iterations),
        periodicity_defect=defect,
        residual=residual(solution, base.forcing, form, config.params, p0=config.solver.p0),
        amplitudes=sweep,
        constant_spread=spread,
        passed=passed,
    )
    artifacts.write_json("solve_report.json", report)
    if not passed:
        logger.warning("solve-periodic checks: defect %.2e, spread %.3f, contracting %s", defect, spread, contracting)
    return passed
