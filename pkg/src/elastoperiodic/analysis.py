"""Norms, decay-exponent tables and fits, kernel probes and regularity tables.

Vector L^p convention: the pointwise Euclidean magnitude of the full
derivative tensor (all components, all index tuples), then the scalar L^p
Riemann sum times the cell volume.  Integer orders use ∇^k; non-integer
orders use the modulus multiplier |ξ|^α.
"""

from __future__ import annotations

import logging
import math
from collections import Counter
from enum import StrEnum
from fractions import Fraction
from itertools import combinations_with_replacement
from typing import TYPE_CHECKING, Any, Literal, NamedTuple

import numpy as np
import scipy.integrate
import scipy.stats
from pydantic import BaseModel, ConfigDict, Field

from elastoperiodic import spectral
from elastoperiodic.errors import DegenerateDataError, DomainError
from elastoperiodic.models import KernelProbeReport, KernelProbeRow, RegularityRow, Verdict
from elastoperiodic.operators import kernel_scalars

if TYPE_CHECKING:
    from collections.abc import Iterable, Mapping, Sequence

    from numpy.typing import NDArray

    from elastoperiodic.cauchy import TrajectoryLog
    from elastoperiodic.operators import KernelName
    from elastoperiodic.periodic import PeriodicSolution
    from elastoperiodic.spectral import CutoffMasks, Grid, SpectralField
    from elastoperiodic.symbols import ElasticParams

logger = logging.getLogger(__name__)

MIN_FIT_SAMPLES = 8
KERNEL_PROBE_TOLERANCE = 0.15
LEADING_TERM_TOLERANCE = 0.05
LEADING_TERM_SCALE = 0.02


class NormTarget(StrEnum):
    U = "u"
    V = "v"


def format_exponent(p: float) -> str:
    """'inf', '2', '5/2', ..."""
    if math.isinf(p):
        return "inf"
    return str(Fraction(p).limit_denominator(1000))


def _as_fraction(value: float) -> Fraction:
    return Fraction(value).limit_denominator(1000)


class NormSpec(BaseModel):
    """‖∇^order target‖_p."""

    model_config = ConfigDict(frozen=True, extra="forbid")

    target: NormTarget = Field(default=NormTarget.U, description="Displacement u or velocity v = ∂ₜu")
    order: float = Field(default=0.0, ge=0.0, le=3.0, description="Derivative order; non-integers use |ξ|^order")
    p: float = Field(default=2.0, ge=1.0, description="Lebesgue exponent, inf allowed")

    @property
    def integer_order(self) -> int | None:
        return int(self.order) if float(self.order).is_integer() else None

    @property
    def label(self) -> str:
        k = self.integer_order
        if k == 0:
            prefix = ""
        elif k == 1:
            prefix = "grad_"
        elif k is not None:
            prefix = f"grad{k}_"
        else:
            prefix = f"grad{format_exponent(self.order)}_"
        return f"{prefix}{self.target}_L{format_exponent(self.p)}"


# ---------------------------------------------------------------------------
# Norms
# ---------------------------------------------------------------------------


def derivative_magnitude(field: SpectralField, order: float) -> NDArray[np.float64]:
    """Pointwise Euclidean magnitude of ∇^order field in physical space."""
    grid = field.grid
    if float(order).is_integer():
        k = int(order)
        total = np.zeros(grid.shape)
        for axes in combinations_with_replacement(range(3), k):
            multiplicity = math.factorial(k)
            for count in Counter(axes).values():
                multiplicity //= math.factorial(count)
            values = spectral.to_physical(spectral.SpectralField(grid, spectral.derivative(field.coeffs, grid, axes)))
            total += multiplicity * np.sum(values**2, axis=0)
        return np.sqrt(total)
    k1, k2, k3 = grid.derivative_wavevector
    modulus = np.sqrt(k1**2 + k2**2 + k3**2) ** order
    values = spectral.to_physical(spectral.SpectralField(grid, field.coeffs * modulus))
    return np.sqrt(np.sum(values**2, axis=0))


def lp_norm(values: NDArray[np.float64], grid: Grid, p: float) -> float:
    """Riemann-sum L^p norm of nonnegative samples; max for p = inf."""
    if math.isinf(p):
        return float(np.max(values))
    return float((np.sum(values**p) * grid.cell_volume) ** (1.0 / p))


def _check_exponent(p: float, *, allow_l1: bool) -> None:
    if p > 1:
        return
    if p == 1 and allow_l1:
        logger.warning("Computing an L^1 norm by Riemann sum; treat it as a proxy")
        return
    msg = f"Lebesgue exponent p={p} is not supported; need p > 1 (or p = 1 with allow_l1)"
    raise DomainError(msg, covered=("1 < p <= inf",))


def norm(field: SpectralField, spec: NormSpec, *, allow_l1: bool = False) -> float:
    """‖∇^order field‖_p of a single field (spec.target is not consulted)."""
    _check_exponent(spec.p, allow_l1=allow_l1)
    return lp_norm(derivative_magnitude(field, spec.order), field.grid, spec.p)


def norm_table(u: SpectralField, v: SpectralField, specs: Iterable[NormSpec], *, allow_l1: bool = False) -> dict[str, float]:
    """Every spec evaluated on the state (u, v), keyed by label; magnitudes are shared across p."""
    magnitudes: dict[tuple[NormTarget, float], NDArray[np.float64]] = {}
    table: dict[str, float] = {}
    for spec in specs:
        _check_exponent(spec.p, allow_l1=allow_l1)
        key = (spec.target, spec.order)
        if key not in magnitudes:
            magnitudes[key] = derivative_magnitude(u if spec.target is NormTarget.U else v, spec.order)
        table[spec.label] = lp_norm(magnitudes[key], u.grid, spec.p)
    return table


def x1_specs(p0: float) -> list[NormSpec]:
    """Terms of the existence-norm proxy."""
    specs = []
    for q in dict.fromkeys((p0, 2.0)):
        specs.extend(
            (
                NormSpec(target=NormTarget.U, order=3, p=q),
                NormSpec(target=NormTarget.V, order=1, p=q),
                NormSpec(target=NormTarget.V, order=0, p=q),
            )
        )
    specs.append(NormSpec(target=NormTarget.U, order=1, p=2.0))
    return specs


def x1_norm(u: SpectralField, v: SpectralField, p0: float) -> float:
    """Σ_{q∈{p₀,2}}(‖∇³u‖_q + ‖∇v‖_q + ‖v‖_q) + ‖∇u‖₂ at one time."""
    return float(sum(norm_table(u, v, x1_specs(p0)).values()))


# ---------------------------------------------------------------------------
# Theoretical exponents
# ---------------------------------------------------------------------------


class ExponentSource(StrEnum):
    ESTIMATE = "estimate"
    NORM_WEIGHT = "norm-weight"


_HALF = Fraction(1, 2)

X2_WEIGHTS: dict[NormSpec, Fraction] = {
    NormSpec(target=NormTarget.U, order=1, p=2.0): Fraction(-3, 4),
    NormSpec(target=NormTarget.U, order=3, p=2.0): Fraction(-7, 4),
    NormSpec(target=NormTarget.U, order=3, p=2.5): Fraction(-2),
    NormSpec(target=NormTarget.U, order=1, p=math.inf): Fraction(-2),
    NormSpec(target=NormTarget.V, order=1, p=2.0): Fraction(-5, 4),
    NormSpec(target=NormTarget.V, order=0, p=2.0): Fraction(-3, 4),
    NormSpec(target=NormTarget.V, order=1, p=2.5): Fraction(-3, 2),
    NormSpec(target=NormTarget.V, order=0, p=2.5): Fraction(-1),
}
X2_SPECS: tuple[NormSpec, ...] = tuple(X2_WEIGHTS)

_ESTIMATE_COVERAGE = (
    "grad3 u: q in {2, 5/2}",
    "grad u: q in {2, inf}",
    "grad^alpha v: 0 <= alpha <= 1, q in {2, 5/2}",
)


def _spatial_part(p: float) -> Fraction:
    """−(3/2)(1 − 1/q) + 1/q."""
    inverse = Fraction(0) if math.isinf(p) else 1 / _as_fraction(p)
    return -Fraction(3, 2) * (1 - inverse) + inverse


def theoretical_exponent(spec: NormSpec, source: ExponentSource = ExponentSource.ESTIMATE) -> Fraction:
    """Decay power of ``spec`` from the stability estimates or the stability-norm weights."""
    if source is ExponentSource.NORM_WEIGHT:
        if spec not in X2_WEIGHTS:
            msg = f"{spec.label} is not an entry of the stability norm"
            raise DomainError(msg, covered=tuple(entry.label for entry in X2_SPECS))
        return X2_WEIGHTS[spec]

    q = _as_fraction(spec.p) if not math.isinf(spec.p) else None
    if spec.target is NormTarget.U and spec.integer_order == 3 and q in {2, Fraction(5, 2)}:
        return _spatial_part(spec.p) - Fraction(3, 2)
    if spec.target is NormTarget.U and spec.integer_order == 1 and (q == 2 or q is None):
        return _spatial_part(spec.p)
    if spec.target is NormTarget.V and spec.order <= 1 and q in {2, Fraction(5, 2)}:
        return _spatial_part(spec.p) - (_as_fraction(spec.order) + 1) * _HALF
    msg = f"no decay estimate covers {spec.label}"
    raise DomainError(msg, covered=_ESTIMATE_COVERAGE)


def wrap_horizon(params: ElasticParams, grid: Grid) -> float:
    """L / (2·max α): time after which waves re-enter the box."""
    return grid.L / (2 * params.max_speed)


def default_window(params: ElasticParams, grid: Grid) -> tuple[float, float]:
    return 5.0, grid.L / (4 * params.max_speed)


# ---------------------------------------------------------------------------
# Fits
# ---------------------------------------------------------------------------


class LineFit(NamedTuple):
    slope: float
    stderr: float
    samples: int


def _windowed(times: Sequence[float], values: Sequence[float], window: tuple[float, float] | None) -> tuple[NDArray, NDArray]:
    t = np.asarray(times, dtype=float)
    y = np.asarray(values, dtype=float)
    if window is not None:
        keep = (t >= window[0]) & (t <= window[1])
        t, y = t[keep], y[keep]
    if t.size < MIN_FIT_SAMPLES:
        msg = f"fit needs at least {MIN_FIT_SAMPLES} samples in the window, got {t.size}"
        raise DegenerateDataError(msg)
    if not np.all(np.isfinite(y)) or np.any(y <= 0):
        msg = "fit needs finite, strictly positive norms"
        raise DegenerateDataError(msg)
    return t, y


def fit_power_law(times: Sequence[float], values: Sequence[float], window: tuple[float, float] | None = None) -> LineFit:
    """Least-squares slope of log(value) against log(1 + t)."""
    t, y = _windowed(times, values, window)
    result = scipy.stats.linregress(np.log1p(t), np.log(y))
    return LineFit(float(result.slope), float(result.stderr), int(t.size))


def fit_exponential_rate(times: Sequence[float], values: Sequence[float], window: tuple[float, float] | None = None) -> LineFit:
    """Least-squares slope of log(value) against t."""
    t, y = _windowed(times, values, window)
    result = scipy.stats.linregress(t, np.log(y))
    return LineFit(float(result.slope), float(result.stderr), int(t.size))


def fit_decay_exponent(log: TrajectoryLog, spec: NormSpec, window: tuple[float, float]) -> tuple[float, float]:
    """(exponent, stderr) of one recorded norm over ``window``."""
    if spec.label not in log.norms:
        msg = f"trajectory log has no samples of {spec.label}"
        raise DegenerateDataError(msg)
    fit = fit_power_law(log.times, log.norms[spec.label], window)
    logger.info("Fitted %s: exponent %.4f +/- %.4f over %d samples", spec.label, fit.slope, fit.stderr, fit.samples)
    return fit.slope, fit.stderr


# ---------------------------------------------------------------------------
# Kernel probes
# ---------------------------------------------------------------------------

Band = Literal["L", "M", "H"]


def _check_pair(p: float, q: float) -> None:
    if not 1 <= q <= p:
        msg = f"kernel estimates need 1 <= q <= p <= inf, got p={format_exponent(p)}, q={format_exponent(q)}"
        raise DomainError(msg, covered=("1 <= q <= p <= inf",))
    if (p, q) == (1, 1) or (math.isinf(p) and math.isinf(q)):
        msg = f"(p, q) = ({format_exponent(p)}, {format_exponent(q)}) is excluded from the kernel estimates"
        raise DomainError(msg, covered=("(p, q) not in {(1, 1), (inf, inf)}",))


def _check_q_kernel(band: Band, p: float, alpha: float, ell: int) -> None:
    order = ell + alpha
    if band == "L":
        if order == 0:
            msg = "the periodic kernel has no low-frequency estimate without derivatives"
            raise DomainError(msg, covered=("l + alpha = 1: 2 <= p", "l + alpha = 2: 1 < p", "l + alpha >= 3: 1 <= p"))
        if (order <= 1 and p < 2) or (order <= 2 and p <= 1) or p < 1:
            msg = f"p={format_exponent(p)} is outside the low-frequency range for l + alpha = {order:g}"
            raise DomainError(msg, covered=("l + alpha = 1: 2 <= p", "l + alpha = 2: 1 < p", "l + alpha >= 3: 1 <= p"))
    elif band == "H" and not (order <= 3 and (1 < p < math.inf or (alpha == 0 and math.isinf(p)))):
        msg = f"(l + alpha, p) = ({order:g}, {format_exponent(p)}) is outside the high-frequency range"
        raise DomainError(msg, covered=("l + alpha <= 3 and 1 < p < inf", "alpha = 0 and p = inf"))


def predicted_power(kernel: KernelName, band: Band, p: float, q: float, alpha: float, ell: int) -> Fraction | None:
    """Predicted large-t power for the low band; None where decay is exponential or time-integrated.

    Raises DomainError outside the hypotheses of the corresponding estimate.
    """
    if kernel == "Q":
        _check_q_kernel(band, p, alpha, ell)
        return None
    _check_pair(p, q)
    if band == "H" and not 1 < p < math.inf:
        msg = f"high-frequency kernel estimates need 1 < p < inf, got {format_exponent(p)}"
        raise DomainError(msg, covered=("1 < p < inf",))
    if band != "L":
        return None
    gap = (0 if math.isinf(q) else 1 / _as_fraction(q)) - (0 if math.isinf(p) else 1 / _as_fraction(p))
    offset = _HALF if kernel == "K0" else Fraction(1)
    return -Fraction(5, 2) * gap + offset - (ell + _as_fraction(alpha)) * _HALF


def _kernel_field(params: ElasticParams, data: SpectralField, kernel: KernelName, t: float, period: float, ell: int) -> SpectralField:
    pressure, shear = kernel_scalars(params, data.grid, kernel, t, period=period, time_order=ell)
    return spectral.SpectralField(data.grid, spectral.apply_riesz(data.coeffs, data.grid, pressure, shear))


def q_leading_radius(params: ElasticParams, period: float) -> float:
    """|ξ| below which the low-frequency leading term of Q̂ holds to a fraction of a percent.

    The first correction is at most α²|ξ|²T²/12 relative to the leading term,
    so the radius bounds max α²|ξ|²T² by ``LEADING_TERM_SCALE``.
    """
    return math.sqrt(LEADING_TERM_SCALE / max(params.branch_speeds_sq)) / period


def q_leading_integral(params: ElasticParams, data: SpectralField) -> SpectralField:
    """∫₋ᵀ⁰ of the leading term Σⱼ Rⱼ/(αⱼ²|ξ|²T) applied to ``data``, which no longer depends on T."""
    grid = data.grid
    xi_sq = grid.xi_sq
    safe = np.where(xi_sq > 0, xi_sq, 1.0)
    pressure, shear = (np.where(xi_sq > 0, 1.0 / (speed_sq * safe), 0.0) for speed_sq in params.branch_speeds_sq)
    return spectral.SpectralField(grid, spectral.apply_riesz(data.coeffs, grid, pressure, shear))


def _integrated_q(
    params: ElasticParams,
    localized: SpectralField,
    spec: NormSpec,
    header: dict[str, Any],
    *,
    band: Band,
    ell: int,
    period: float,
    quadrature_nodes: int,
) -> KernelProbeReport:
    """Period integral of ‖∇^α ∂ₜ^ℓ Q(s) ∗ data‖_p, judged against the leading term where it applies."""
    checked = band == "L" and ell == 0
    if checked:
        xi_sq = localized.grid.xi_sq
        # the zero mode has no leading term
        inside = (xi_sq > 0) & (xi_sq <= q_leading_radius(params, period) ** 2)
        localized = spectral.SpectralField(localized.grid, localized.coeffs * inside)
    if not np.any(localized.coeffs):
        logger.warning("Q probe band=%s skipped: no resolved modes", band)
        return KernelProbeReport(**header, kind="integrated", verdict=Verdict.DEGENERATE)

    nodes = np.linspace(-period, 0.0, quadrature_nodes)
    rows = [
        KernelProbeRow(abscissa=float(s), value=norm(_kernel_field(params, localized, "Q", float(s), period, ell), spec)) for s in nodes
    ]
    measured = float(scipy.integrate.trapezoid([row.value for row in rows], nodes))
    if not checked:
        return KernelProbeReport(**header, kind="integrated", measured=measured, verdict=Verdict.REPORT_ONLY, rows=rows)

    predicted = norm(q_leading_integral(params, localized), spec)
    gap = abs(measured - predicted) / predicted if predicted > 0 else math.inf
    verdict = Verdict.PASS if gap <= LEADING_TERM_TOLERANCE else Verdict.FAIL
    logger.info("Q probe band=L p=%s: integral %.4g, leading term %.4g (gap %.3g)", header["p"], measured, predicted, gap)
    return KernelProbeReport(**header, kind="integrated", predicted=predicted, measured=measured, spread=gap, verdict=verdict, rows=rows)


def probe_kernel_estimate(
    params: ElasticParams,
    data: SpectralField,
    masks: CutoffMasks,
    *,
    kernel: KernelName,
    band: Band,
    p: float,
    q: float,
    alpha: float = 0.0,
    ell: int = 0,
    times: Sequence[float] = (),
    period: float = 1.0,
    quadrature_nodes: int = 33,
) -> KernelProbeReport:
    """Measure ‖∇^α ∂ₜ^ℓ (kernel_band(t) ∗ data)‖_p and compare with the estimate.

    K0/K1: the large-t power (low band) or the exponential rate (middle and
    high bands) is fitted over ``times``.  Q: the integral over one period is
    compared with the low-frequency leading term (low band, no time
    derivative) or reported as measured.
    """
    predicted = predicted_power(kernel, band, p, q, alpha, ell)
    localized = spectral.SpectralField(data.grid, data.coeffs * masks.band(band))
    spec = NormSpec(order=alpha, p=p)
    header = {
        "kernel": kernel,
        "band": band,
        "p": format_exponent(p),
        "q": format_exponent(q),
        "alpha": alpha,
        "ell": ell,
    }

    if kernel == "Q":
        return _integrated_q(params, localized, spec, header, band=band, ell=ell, period=period, quadrature_nodes=quadrature_nodes)

    rows = [
        KernelProbeRow(abscissa=float(t), value=norm(_kernel_field(params, localized, kernel, float(t), period, ell), spec))
        for t in times
    ]
    abscissae = [row.abscissa for row in rows]
    values = [row.value for row in rows]
    try:
        if predicted is None:
            fit = fit_exponential_rate(abscissae, values)
            verdict = Verdict.PASS if fit.slope < 0 else Verdict.FAIL
        else:
            fit = fit_power_law(abscissae, values)
            verdict = Verdict.PASS if abs(fit.slope - float(predicted)) <= KERNEL_PROBE_TOLERANCE else Verdict.FAIL
    except DegenerateDataError as exc:
        logger.warning("%s probe band=%s skipped: %s", kernel, band, exc)
        return KernelProbeReport(
            **header,
            kind="power" if predicted is not None else "exponential",
            predicted=None if predicted is None else float(predicted),
            verdict=Verdict.DEGENERATE,
            rows=rows,
        )
    logger.info(
        "%s probe band=%s p=%s alpha=%g ell=%d: measured %.4f (predicted %s)", kernel, band, header["p"], alpha, ell, fit.slope, predicted
    )
    return KernelProbeReport(
        **header,
        kind="power" if predicted is not None else "exponential",
        predicted=None if predicted is None else float(predicted),
        measured=fit.slope,
        stderr=fit.stderr,
        verdict=verdict,
        rows=rows,
    )


# ---------------------------------------------------------------------------
# Regularity of the periodic solution
# ---------------------------------------------------------------------------

DEFAULT_REGULARITY_P: dict[int, tuple[float, ...]] = {
    1: (2.0, 4.0, math.inf),
    2: (10 / 9, 2.0, 10.0),
    3: (1.25, 2.0, 2.5),
}


def p0_star(p0: float) -> float:
    """3p₀/(3 − p₀) for p₀ < 3, inf for p₀ ≥ 3."""
    return 3 * p0 / (3 - p0) if p0 < 3 else math.inf


def _check_regularity_range(order: int, p: float, p0: float) -> None:
    star = p0_star(p0)
    if order == 1:
        ok = p > 1.5
        covered = "grad u: 3/2 < p <= inf"
    elif order == 2:
        ok = 1 < p <= star and not (p0 == 3 and math.isinf(p))
        covered = f"grad2 u: 1 < p {'< inf' if p0 == 3 else '<= ' + format_exponent(star)}"
    elif order == 3:
        ok = 1 < p <= p0
        covered = f"grad3 u: 1 < p <= {format_exponent(p0)}"
    else:
        ok = False
        covered = "orders 1, 2, 3"
    if not ok:
        msg = f"p={format_exponent(p)} is outside the regularity range for order {order}"
        raise DomainError(msg, covered=(covered,))


def probe_regularity(
    solution: PeriodicSolution,
    p_values: Mapping[int, Sequence[float]] | None = None,
    *,
    p0: float,
    forcing_norm: float,
    amplitude: float,
) -> list[RegularityRow]:
    """max over period nodes of ‖∇^k u_per‖_p for every requested (k, p)."""
    if p0 < 2:
        msg = f"p0 must be >= 2, got {p0}"
        raise DomainError(msg, covered=("2 <= p0 < inf",))
    requested = DEFAULT_REGULARITY_P if p_values is None else p_values
    for order, exponents in requested.items():
        for p in exponents:
            _check_regularity_range(order, p, p0)

    maxima: dict[tuple[int, float], float] = {(order, p): 0.0 for order, exponents in requested.items() for p in exponents}
    for m in range(solution.n_t):
        u = solution.snapshot(m).u
        for order, exponents in requested.items():
            magnitude = derivative_magnitude(u, order)
            for p in exponents:
                maxima[order, p] = max(maxima[order, p], lp_norm(magnitude, u.grid, p))

    rows = [
        RegularityRow(
            order=order,
            p=format_exponent(p),
            amplitude=amplitude,
            value=value,
            forcing_norm=forcing_norm,
            ratio=value / forcing_norm if forcing_norm > 0 else 0.0,
        )
        for (order, p), value in maxima.items()
    ]
    logger.info("Regularity table at amplitude %.3g: %d entries", amplitude, len(rows))
    return rows
