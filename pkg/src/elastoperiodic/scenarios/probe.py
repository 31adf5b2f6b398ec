"""probe-kernels and probe-regularity."""

from __future__ import annotations

import logging
import math
from typing import TYPE_CHECKING, NamedTuple

import numpy as np

from elastoperiodic.analysis import format_exponent, p0_star, probe_kernel_estimate, probe_regularity
from elastoperiodic.cauchy import gaussian_data
from elastoperiodic.models import RegularityReport, Verdict
from elastoperiodic.scenarios.solve import constant_spread, solve_at, solve_base
from elastoperiodic.spectral import cutoff_masks

if TYPE_CHECKING:
    from collections.abc import Sequence

    from numpy.typing import NDArray

    from elastoperiodic.analysis import Band
    from elastoperiodic.config import RunConfig
    from elastoperiodic.models import KernelProbeReport, RegularityRow
    from elastoperiodic.operators import KernelName
    from elastoperiodic.runner import ArtifactWriter

logger = logging.getLogger(__name__)

REGULARITY_SPREAD_TOLERANCE = 0.2


class ProbeCase(NamedTuple):
    kernel: KernelName
    band: Band
    p: float
    q: float
    alpha: float = 0.0
    ell: int = 0


# Low band: power-law fits against the predicted exponent.
POWER_CASES = (
    ProbeCase("K1", "L", 2.0, 1.0),
    ProbeCase("K1", "L", 2.0, 1.0, alpha=1.0),
    ProbeCase("K1", "L", 2.0, 1.0, ell=1),
    ProbeCase("K0", "L", 2.0, 1.0),
)
EXPONENTIAL_CASES = (
    ProbeCase("K0", "M", 2.0, 1.0),
    ProbeCase("K1", "M", 2.0, 1.0),
    ProbeCase("K1", "H", 2.0, 1.0),
)
# Period integrals of Q; the low band is held to the leading term.
INTEGRATED_CASES = (
    ProbeCase("Q", "L", 2.0, 1.0, alpha=2.0),
    ProbeCase("Q", "H", 2.0, 1.0),
)


def kernel_probe_times(config: RunConfig) -> tuple[NDArray[np.float64], NDArray[np.float64]]:
    """Log-spaced times for power fits and linear times for exponential fits."""
    probes = config.probes
    power = np.geomspace(probes.t_start, probes.t_stop, probes.t_count)
    band = np.linspace(probes.t_start / 5, probes.t_stop / 2, probes.band_count)
    return power, band


def run_probes(config: RunConfig, cases: Sequence[ProbeCase] | None = None) -> list[KernelProbeReport]:
    grid = config.make_grid()
    masks = cutoff_masks(grid, *config.cutoffs())
    data = gaussian_data(grid, 1.0, config.probes.data_width, config.forcing.direction)
    power_times, band_times = kernel_probe_times(config)
    selected = (*POWER_CASES, *EXPONENTIAL_CASES, *INTEGRATED_CASES) if cases is None else tuple(cases)
    reports = []
    for case in selected:
        times = power_times if case.band == "L" else band_times
        reports.append(
            probe_kernel_estimate(
                config.params,
                data,
                masks,
                kernel=case.kernel,
                band=case.band,
                p=case.p,
                q=case.q,
                alpha=case.alpha,
                ell=case.ell,
                times=times,
                period=config.forcing.T,
            )
        )
    return reports


def run_kernels(config: RunConfig, artifacts: ArtifactWriter, _rng: np.random.Generator) -> bool:
    reports = run_probes(config)
    artifacts.write_json_list("kernel_probes.json", reports)
    artifacts.write_csv(
        "kernel_probes.csv",
        ("kernel", "band", "p", "q", "alpha", "ell", "kind", "predicted", "measured", "stderr", "spread", "verdict"),
        (
            (r.kernel, r.band, r.p, r.q, r.alpha, r.ell, r.kind, r.predicted, r.measured, r.stderr, r.spread, r.verdict.value)
            for r in reports
        ),
    )
    failed = [r for r in reports if r.verdict is Verdict.FAIL]
    for report in failed:
        logger.warning("%s %s-band probe failed (measured %s, predicted %s)", report.kernel, report.band, report.measured, report.predicted)
    return not failed


# ---------------------------------------------------------------------------
# Regularity
# ---------------------------------------------------------------------------


def regularity_spread(rows: Sequence[RegularityRow]) -> float:
    """Worst ratio spread of any (order, p) entry across amplitudes."""
    grouped: dict[tuple[int, str], list[float]] = {}
    for row in rows:
        grouped.setdefault((row.order, row.p), []).append(row.ratio)
    return max((constant_spread(ratios) for ratios in grouped.values()), default=0.0)


def run_regularity(config: RunConfig, artifacts: ArtifactWriter, _rng: np.random.Generator) -> bool:
    base = solve_base(config)
    p0 = config.solver.p0
    rows: list[RegularityRow] = []
    for factor in config.solver.amplitude_factors:
        forcing = base.forcing.scaled(factor)
        solution = base.solution if factor == 1.0 else solve_at(forcing, config)
        rows.extend(probe_regularity(solution, p0=p0, forcing_norm=forcing.smallness_norm(p0), amplitude=forcing.amplitude))
    spread = regularity_spread(rows)
    finite = all(math.isfinite(row.value) for row in rows)
    report = RegularityReport(
        p0=p0,
        p0_star=format_exponent(p0_star(p0)),
        rows=rows,
        constant_spread=spread,
        passed=finite and spread <= REGULARITY_SPREAD_TOLERANCE,
    )
    artifacts.write_json("regularity_report.json", report)
    artifacts.write_csv(
        "regularity.csv",
        ("order", "p", "amplitude", "value", "forcing_norm", "ratio"),
        ((r.order, r.p, r.amplitude, r.value, r.forcing_norm, r.ratio) for r in rows),
    )
    if not report.passed:
        logger.warning("Regularity constant spread %.3f (finite=%s)", spread, finite)
    return report.passed
