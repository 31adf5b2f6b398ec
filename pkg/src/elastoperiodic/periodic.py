"""Time-periodic solutions by Picard iteration on the periodic integral equation.

The fixed-point map is

    Φ[u](t) = ∫₀ᵀ Q(t − s) ∗ S(s) ds + ∫₀ᵗ K₁(t − s) ∗ S(s) ds,   S = F(u) + g,

discretized with the composite trapezoid rule on the uniform nodes
t_m = mT/N_t.  :func:`period_integral` evaluates the two quadratures pair by
pair; :func:`picard_step` evaluates the same trapezoid sums with a propagator
recursion over the nodes, which is algebraically identical and costs one
table application per node instead of N_t.
"""

from __future__ import annotations

import dataclasses
import logging
import math
from dataclasses import dataclass
from enum import StrEnum
from typing import TYPE_CHECKING, Literal

import numpy as np
import scipy.integrate

from elastoperiodic import spectral
from elastoperiodic.analysis import NormSpec, norm, x1_norm
from elastoperiodic.cauchy import StateVector
from elastoperiodic.errors import ConfigurationError, DivergenceError, GridMismatchError, NonConvergenceError
from elastoperiodic.models import IterationRecord
from elastoperiodic.nonlinear import eval_F
from elastoperiodic.operators import propagator_operator, q_operator, resolvent_operator
from elastoperiodic.spectral import SpectralField, check_same_grid

if TYPE_CHECKING:
    from collections.abc import Sequence
    from pathlib import Path

    from numpy.typing import ArrayLike, NDArray

    from elastoperiodic.nonlinear import QuadraticForm
    from elastoperiodic.spectral import Grid
    from elastoperiodic.symbols import ElasticParams

logger = logging.getLogger(__name__)

MIN_NODES = 8
CONTRACTION_TARGET = 0.5


# ---------------------------------------------------------------------------
# Forcing
# ---------------------------------------------------------------------------


class WaveformKind(StrEnum):
    SIN = "sin"
    COS = "cos"
    FOURIER = "fourier"


@dataclass(frozen=True)
class Waveform:
    """T-periodic time factor of the forcing."""

    kind: WaveformKind = WaveformKind.SIN
    coefficients: tuple[tuple[float, float], ...] = ()

    def __post_init__(self) -> None:
        if self.kind is WaveformKind.FOURIER and not self.coefficients:
            msg = "a fourier waveform needs at least one [a_n, b_n] pair"
            raise ConfigurationError(msg)

    def __call__(self, t: float, period: float) -> float:
        phase = 2 * math.pi * t / period
        if self.kind is WaveformKind.SIN:
            return math.sin(phase)
        if self.kind is WaveformKind.COS:
            return math.cos(phase)
        return sum(a * math.cos(n * phase) + b * math.sin(n * phase) for n, (a, b) in enumerate(self.coefficients, start=1))


@dataclass(frozen=True, eq=False)
class ForcingSpec:
    """g(t, x) = amplitude·w(t)·profile(x), with a band-limited, mean-zero profile."""

    profile: SpectralField
    period: float = 1.0
    amplitude: float = 1e-3
    waveform: Waveform = dataclasses.field(default_factory=Waveform)

    def __post_init__(self) -> None:
        if not self.period > 0:
            msg = f"forcing period must be > 0, got {self.period}"
            raise ConfigurationError(msg)
        if not math.isfinite(self.amplitude):
            msg = f"forcing amplitude must be finite, got {self.amplitude}"
            raise ConfigurationError(msg)

    @classmethod
    def gaussian(
        cls,
        grid: Grid,
        *,
        period: float = 1.0,
        amplitude: float = 1e-3,
        width: float = 4.0,
        center: ArrayLike | None = None,
        direction: ArrayLike = (1.0, 0.0, 0.0),
        waveform: Waveform | None = None,
    ) -> ForcingSpec:
        unit = np.asarray(direction, dtype=float)
        length = float(np.linalg.norm(unit))
        if length == 0:
            msg = "forcing direction must be nonzero"
            raise ConfigurationError(msg)
        profile = spectral.vector_profile(grid, spectral.gaussian_profile(grid, center, width), unit / length)
        return cls(profile=profile, period=period, amplitude=amplitude, waveform=waveform or Waveform())

    @classmethod
    def from_snapshot(
        cls,
        path: Path,
        grid: Grid,
        *,
        period: float = 1.0,
        amplitude: float = 1e-3,
        waveform: Waveform | None = None,
    ) -> ForcingSpec:
        """Spatial profile read from an EPWF snapshot on the same grid."""
        field = spectral.read_snapshot(path)
        if field.grid != grid:
            msg = f"snapshot {path} is on {field.grid}, run grid is {grid}"
            raise GridMismatchError(msg)
        return cls(profile=spectral.band_limit(field), period=period, amplitude=amplitude, waveform=waveform or Waveform())

    @property
    def grid(self) -> Grid:
        return self.profile.grid

    def field_at(self, t: float) -> SpectralField:
        return self.profile * (self.amplitude * self.waveform(t, self.period))

    def scaled(self, factor: float) -> ForcingSpec:
        return dataclasses.replace(self, amplitude=self.amplitude * factor)

    def smallness_norm(self, p0: float, samples: int = 257) -> float:
        """∫₀ᵀ (‖∇g‖_{p₀} + ‖∇g‖₂ + ‖g‖₁) dt."""
        spatial = (
            norm(self.profile, NormSpec(order=1, p=p0))
            + norm(self.profile, NormSpec(order=1, p=2.0))
            + norm(self.profile, NormSpec(order=0, p=1.0), allow_l1=True)
        )
        times = np.linspace(0.0, self.period, samples)
        temporal = scipy.integrate.trapezoid([abs(self.waveform(float(t), self.period)) for t in times], times)
        value = abs(self.amplitude) * float(temporal) * spatial
        logger.info("Forcing smallness functional: %.6g (amplitude %.3g)", value, self.amplitude)
        return value


# ---------------------------------------------------------------------------
# Solution container
# ---------------------------------------------------------------------------


def _check_nodes(n_t: int) -> None:
    if n_t < MIN_NODES or n_t % 2:
        msg = f"need an even number of time nodes >= {MIN_NODES}, got {n_t}"
        raise ConfigurationError(msg)


@dataclass(frozen=True, eq=False)
class PeriodicSolution:
    """(u, ∂ₜu) at the nodes t_m = mT/N_t, m = 0..N_t."""

    grid: Grid
    period: float
    u: NDArray[np.complex128]
    v: NDArray[np.complex128]
    iterations: tuple[IterationRecord, ...] = ()

    def __post_init__(self) -> None:
        expected = (self.u.shape[0], 3, *self.grid.spectral_shape)
        if self.u.shape != expected or self.v.shape != expected:
            msg = f"node arrays have shapes {self.u.shape}, {self.v.shape}, expected {expected}"
            raise GridMismatchError(msg)
        _check_nodes(self.n_t)

    @classmethod
    def zeros(cls, grid: Grid, period: float, n_t: int) -> PeriodicSolution:
        shape = (n_t + 1, 3, *grid.spectral_shape)
        return cls(grid, period, np.zeros(shape, dtype=complex), np.zeros(shape, dtype=complex))

    @property
    def n_t(self) -> int:
        return self.u.shape[0] - 1

    @property
    def nodes(self) -> NDArray[np.float64]:
        return np.linspace(0.0, self.period, self.n_t + 1)

    def snapshot(self, m: int) -> StateVector:
        return StateVector(SpectralField(self.grid, self.u[m]), SpectralField(self.grid, self.v[m]), float(self.nodes[m]))

    def with_iterations(self, records: Sequence[IterationRecord]) -> PeriodicSolution:
        return dataclasses.replace(self, iterations=tuple(records))

    def interpolation_weights(self, t: float) -> NDArray[np.float64]:
        """Trigonometric interpolation weights on the N_t distinct nodes."""
        n = self.n_t
        offset = (t - self.nodes[:n]) / self.period
        k = np.arange(1, n // 2)[:, None]
        return (1 + 2 * np.sum(np.cos(2 * np.pi * k * offset), axis=0) + np.cos(np.pi * n * offset)) / n

    def interpolate(self, t: float) -> SpectralField:
        """u_per(t) for any real t, exact at the nodes."""
        position = (t % self.period) / self.period * self.n_t
        nearest = round(position)
        if abs(position - nearest) < 1e-12:
            return SpectralField(self.grid, self.u[nearest % self.n_t])
        weights = self.interpolation_weights(t % self.period)
        return SpectralField(self.grid, np.tensordot(weights, self.u[: self.n_t], axes=1))

    def periodicity_defect(self) -> float:
        """‖u(T) − u(0)‖₂ / max(‖u(0)‖₂, ε)."""
        start = SpectralField(self.grid, self.u[0])
        end = SpectralField(self.grid, self.u[-1])
        scale = max(spectral.spectral_l2_norm(start), np.finfo(float).eps)
        return spectral.spectral_l2_norm(end - start) / scale

    def x1_norm(self, p0: float) -> float:
        """max over nodes of the existence-norm proxy."""
        return max(x1_norm(SpectralField(self.grid, self.u[m]), SpectralField(self.grid, self.v[m]), p0) for m in range(self.n_t))


def distance(first: PeriodicSolution, second: PeriodicSolution, p0: float) -> float:
    """Sup-node X₁-proxy distance."""
    if first.grid != second.grid or first.n_t != second.n_t:
        msg = "solutions live on different grids or node sets"
        raise GridMismatchError(msg)
    grid = first.grid
    return max(
        x1_norm(SpectralField(grid, first.u[m] - second.u[m]), SpectralField(grid, first.v[m] - second.v[m]), p0)
        for m in range(first.n_t)
    )


# ---------------------------------------------------------------------------
# Quadrature
# ---------------------------------------------------------------------------

Rule = Literal["trapezoid", "simpson"]


def _weights(count: int, h: float, rule: Rule) -> NDArray[np.float64]:
    """Composite weights on ``count`` equally spaced points."""
    if count == 1:
        return np.zeros(1)
    if rule == "trapezoid":
        weights = np.full(count, h)
        weights[[0, -1]] = h / 2
        return weights
    if (count - 1) % 2:
        msg = f"Simpson's rule needs an even number of intervals, got {count - 1}"
        raise ConfigurationError(msg)
    weights = np.full(count, 2 * h / 3)
    weights[1::2] = 4 * h / 3
    weights[[0, -1]] = h / 3
    return weights


def period_integral(
    kernel: Literal["Q", "K1"],
    sources: Sequence[SpectralField],
    m: int,
    params: ElasticParams,
    period: float,
    *,
    times: ArrayLike | None = None,
    rule: Rule = "trapezoid",
    row: Literal["u", "v"] = "u",
) -> SpectralField:
    """∫₀ᵀ Q(t_m − s)∗S(s) ds or ∫₀^{t_m} K₁(t_m − s)∗S(s) ds by composite quadrature.

    ``sources`` are samples at t_n = nT/N_t, n = 0..N_t.  ``row="v"`` applies
    the time-differentiated kernel instead.
    """
    grid = check_same_grid(*sources)
    n_t = len(sources) - 1
    _check_nodes(n_t)
    nodes = np.linspace(0.0, period, n_t + 1)
    if times is not None and (np.shape(times) != nodes.shape or not np.allclose(times, nodes, rtol=0, atol=1e-12 * period)):
        msg = f"source times do not match the uniform nodes of a period {period} with N_t={n_t}"
        raise GridMismatchError(msg)
    if not 0 <= m <= n_t:
        msg = f"node index {m} outside 0..{n_t}"
        raise GridMismatchError(msg)

    h = period / n_t
    upper = n_t if kernel == "Q" else m
    weights = _weights(upper + 1, h, rule)
    pick = 0 if row == "u" else 1
    total = np.zeros((3, *grid.spectral_shape), dtype=complex)
    for n in range(upper + 1):
        if weights[n] == 0:
            continue
        lag = (m - n) * h
        operator = q_operator(params, grid, lag, period) if kernel == "Q" else propagator_operator(params, grid, lag)
        total += weights[n] * operator.apply_source(sources[n].coeffs)[pick]
    return SpectralField(grid, total)


# ---------------------------------------------------------------------------
# Picard iteration
# ---------------------------------------------------------------------------


def _sources(current: PeriodicSolution, forcing: ForcingSpec, form: QuadraticForm) -> NDArray[np.complex128]:
    out = np.empty_like(current.u)
    for m, t in enumerate(current.nodes):
        out[m] = (eval_F(SpectralField(current.grid, current.u[m]), form) + forcing.field_at(float(t))).coeffs
    return out


def picard_step(
    current: PeriodicSolution,
    forcing: ForcingSpec,
    form: QuadraticForm,
    params: ElasticParams,
    *,
    iteration: int | None = None,
) -> PeriodicSolution:
    """Φ[current] at every node, with ∂ₜ from the lower blocks of the same tables."""
    grid = current.grid
    if forcing.grid != grid:
        msg = f"forcing lives on {forcing.grid}, iterate on {grid}"
        raise GridMismatchError(msg)
    if not math.isclose(forcing.period, current.period):
        msg = f"forcing period {forcing.period} differs from the solution period {current.period}"
        raise ConfigurationError(msg)

    sources = _sources(current, forcing, form)
    n_t = current.n_t
    half = current.period / n_t / 2
    step = propagator_operator(params, grid, 2 * half)

    def advance(u: NDArray, v: NDArray, m: int) -> tuple[NDArray, NDArray]:
        u, v = step.apply(u, v + half * sources[m])
        return u, v + half * sources[m + 1]

    acc_u = np.zeros_like(sources[0])
    acc_v = np.zeros_like(sources[0])
    for m in range(n_t):
        acc_u, acc_v = advance(acc_u, acc_v, m)

    u = np.empty_like(current.u)
    v = np.empty_like(current.v)
    u[0], v[0] = resolvent_operator(params, grid, current.period).apply(acc_u, acc_v)
    for m in range(n_t):
        u[m + 1], v[m + 1] = advance(u[m], v[m], m)

    if not (np.all(np.isfinite(u)) and np.all(np.isfinite(v))):
        msg = f"Picard iterate {iteration if iteration is not None else '?'} is non-finite"
        raise DivergenceError(msg, iteration=iteration)
    return PeriodicSolution(grid, current.period, u, v)


def solve_periodic(
    forcing: ForcingSpec,
    form: QuadraticForm,
    params: ElasticParams,
    *,
    tol: float = 1e-10,
    max_iter: int = 20,
    n_t: int = 64,
    p0: float = 2.5,
    initial: PeriodicSolution | None = None,
) -> PeriodicSolution:
    """Iterate :func:`picard_step` until the sup-node X₁-proxy step is below ``tol``."""
    if tol <= 0 or max_iter < 1:
        msg = f"need tol > 0 and max_iter >= 1, got tol={tol}, max_iter={max_iter}"
        raise ConfigurationError(msg)
    current = initial if initial is not None else PeriodicSolution.zeros(forcing.grid, forcing.period, n_t)
    records: list[IterationRecord] = []
    previous: float | None = None
    for iteration in range(1, max_iter + 1):
        following = picard_step(current, forcing, form, params, iteration=iteration)
        step = distance(following, current, p0)
        ratio = step / previous if previous else None
        records.append(IterationRecord(iteration=iteration, residual=step, ratio=ratio))
        logger.info("Picard %d: residual %.3e ratio %s", iteration, step, "-" if ratio is None else f"{ratio:.3f}")
        current = following
        if step < tol:
            return current.with_iterations(records)
        previous = step
    raise NonConvergenceError([record.residual for record in records])


def residual(sol: PeriodicSolution, forcing: ForcingSpec, form: QuadraticForm, params: ElasticParams, *, p0: float = 2.5) -> float:
    """sup over nodes of ‖sol − Φ[sol]‖ in the X₁ proxy."""
    return distance(sol, picard_step(sol, forcing, form, params), p0)


def contraction_ratio(forcing: ForcingSpec, form: QuadraticForm, params: ElasticParams, *, n_t: int, p0: float) -> float:
    """r₂/r₁ of the first two Picard increments from the zero iterate (0 when r₁ = 0)."""
    zero = PeriodicSolution.zeros(forcing.grid, forcing.period, n_t)
    first = picard_step(zero, forcing, form, params, iteration=1)
    second = picard_step(first, forcing, form, params, iteration=2)
    third = picard_step(second, forcing, form, params, iteration=3)
    r1 = distance(second, first, p0)
    return distance(third, second, p0) / r1 if r1 > 0 else 0.0


def calibrate_amplitude(
    forcing: ForcingSpec,
    form: QuadraticForm,
    params: ElasticParams,
    *,
    n_t: int = 64,
    p0: float = 2.5,
    max_halvings: int = 20,
) -> tuple[ForcingSpec, float]:
    """Halve the amplitude until the measured contraction ratio is below 1/2."""
    ratios: list[float] = []
    for _ in range(max_halvings + 1):
        ratio = contraction_ratio(forcing, form, params, n_t=n_t, p0=p0)
        ratios.append(ratio)
        if ratio < CONTRACTION_TARGET:
            logger.info("Working forcing amplitude %.4g (contraction ratio %.3f)", forcing.amplitude, ratio)
            return forcing, ratio
        logger.info("Contraction ratio %.3f at amplitude %.4g; halving", ratio, forcing.amplitude)
        forcing = forcing.scaled(0.5)
    raise NonConvergenceError(ratios)
