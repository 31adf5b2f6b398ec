"""Pydantic result models for elastoperiodic scenario outputs."""

from __future__ import annotations

from datetime import datetime  # noqa: TC003 - Pydantic needs this at runtime
from enum import StrEnum
from typing import Any

from pydantic import BaseModel, Field


class Verdict(StrEnum):
    """Outcome of a single acceptance comparison."""

    PASS = "pass"
    FAIL = "fail"
    WINDOW_TRUNCATED = "window-truncated"
    REPORT_ONLY = "report-only"
    DEGENERATE = "degenerate"


class SymbolCheck(BaseModel):
    """One identity or oracle comparison of the symbol suite."""

    name: str = Field(description="Identity being checked, e.g. 'projector-idempotence'")
    samples: int = Field(description="Number of frequencies (or frequency/time pairs) sampled")
    max_violation: float = Field(description="Largest measured violation over the samples")
    tolerance: float = Field(description="Acceptance threshold for max_violation")
    passed: bool = Field(description="max_violation <= tolerance")


class SymbolSuiteReport(BaseModel):
    """Result of the verify-symbols scenario."""

    checks: list[SymbolCheck] = Field(default_factory=list, description="Per-identity results")
    max_violation: float = Field(default=0.0, description="Largest violation relative to its tolerance across all checks")
    passed: bool = Field(default=True, description="True when every check passed")


class IterationRecord(BaseModel):
    """One Picard iteration of the periodic solve."""

    iteration: int = Field(description="1-based iteration index")
    residual: float = Field(description="Sup-node X1-proxy distance between successive iterates")
    ratio: float | None = Field(default=None, description="residual / previous residual; None on the first iteration")


class AmplitudeRecord(BaseModel):
    """Periodic solve at one forcing amplitude of the linear-response sweep."""

    factor: float = Field(description="Multiplier applied to the configured amplitude")
    amplitude: float = Field(description="Forcing amplitude actually used")
    forcing_norm: float = Field(description="Smallness functional of the forcing")
    solution_norm: float = Field(description="X1-proxy norm of the converged solution")
    ratio: float = Field(description="solution_norm / forcing_norm (linear bound constant)")
    iterations: int = Field(description="Picard iterations to converge")
    first_ratio: float | None = Field(default=None, description="First measured contraction ratio")
    worst_ratio: float | None = Field(default=None, description="Largest contraction ratio over all iterations")


class PeriodicSolveReport(BaseModel):
    """Result of the solve-periodic scenario."""

    converged: bool = Field(description="True when the base amplitude converged within max_iter")
    calibrated_amplitude: float = Field(description="Working forcing amplitude after calibration")
    iterations: list[IterationRecord] = Field(default_factory=list, description="Picard log at the working amplitude")
    periodicity_defect: float = Field(description="||u(T) - u(0)||_2 / max(||u(0)||_2, eps)")
    residual: float = Field(description="Fixed-point residual of the returned solution")
    amplitudes: list[AmplitudeRecord] = Field(default_factory=list, description="Linear-response sweep")
    constant_spread: float = Field(default=0.0, description="max/min - 1 of the solution-to-forcing ratios")
    passed: bool = Field(description="True when every solve-periodic acceptance check held")


class TrajectorySummary(BaseModel):
    """Result of the simulate-cauchy scenario."""

    samples: int = Field(description="Norm samples recorded")
    t_end: float = Field(description="Final time reached")
    peak: dict[str, float] = Field(default_factory=dict, description="Largest value of every recorded norm")
    final: dict[str, float] = Field(default_factory=dict, description="Every recorded norm at t_end")
    snapshots: int = Field(default=0, description="Snapshot files written along the run")


class DecayFit(BaseModel):
    """Fitted decay power of one norm against its theoretical targets."""

    norm_id: str = Field(description="Norm label, e.g. 'grad3_u_L5/2'")
    exponent: float | None = Field(default=None, description="Fitted slope of log(norm) vs log(1+t)")
    stderr: float | None = Field(default=None, description="Least-squares standard error of the slope")
    samples: int = Field(default=0, description="Samples inside the fit window")
    target: float = Field(description="Weight from the stability norm")
    alternate_target: float | None = Field(default=None, description="Stability-estimate exponent when it differs from target")
    margin: float | None = Field(default=None, description="|exponent - target|")
    verdict: Verdict = Field(description="Outcome of the comparison")


class DecayReport(BaseModel):
    """Result of the measure-decay scenario."""

    window: tuple[float, float] = Field(description="Fit window [t0, t1]")
    horizon: float = Field(description="Wrap-around horizon L / (2 max alpha)")
    tolerance: float = Field(description="Allowed |exponent - target|")
    fits: list[DecayFit] = Field(default_factory=list, description="One fit per stability-norm entry")
    note: str | None = Field(default=None, description="Explanation when fits were skipped")
    orbit_drift: float | None = Field(default=None, description="Largest norm reached from a zero perturbation over one period")
    orbit_tolerance: float | None = Field(default=None, description="Allowed orbit drift (a multiple of the Picard tolerance)")
    passed: bool = Field(description="True when no asserted fit failed")


class KernelProbeRow(BaseModel):
    """One sample of a kernel probe."""

    abscissa: float = Field(description="Time t (the quadrature node for time-integrated probes)")
    value: float = Field(description="Measured norm at that time")


class KernelProbeReport(BaseModel):
    """Measured decay of one localized kernel configuration."""

    kernel: str = Field(description="K0, K1 or Q")
    band: str = Field(description="L, M or H")
    p: str = Field(description="Output Lebesgue exponent")
    q: str = Field(description="Data Lebesgue exponent")
    alpha: float = Field(description="Spatial derivative order")
    ell: int = Field(description="Time derivative order")
    kind: str = Field(description="'power', 'exponential' or 'integrated'")
    predicted: float | None = Field(default=None, description="Predicted power, or the leading-term integral for 'integrated' probes")
    measured: float | None = Field(default=None, description="Fitted power, exponential rate or period integral")
    stderr: float | None = Field(default=None, description="Standard error of the fit")
    spread: float | None = Field(default=None, description="Relative gap to the leading-term integral for 'integrated' probes")
    verdict: Verdict = Field(description="Outcome against the prediction")
    rows: list[KernelProbeRow] = Field(default_factory=list, description="Samples behind the fit")


class RegularityRow(BaseModel):
    """Max over the period of one derivative norm of u_per at one amplitude."""

    order: int = Field(description="Derivative order 1, 2 or 3")
    p: str = Field(description="Lebesgue exponent")
    amplitude: float = Field(description="Forcing amplitude")
    value: float = Field(description="max over nodes of ||grad^order u_per||_p")
    forcing_norm: float = Field(description="Smallness functional of the forcing")
    ratio: float = Field(description="value / forcing_norm")


class RegularityReport(BaseModel):
    """Result of the probe-regularity scenario."""

    p0: float = Field(description="Integrability exponent of the forcing")
    p0_star: str = Field(description="Sobolev exponent 3 p0 / (3 - p0), or 'inf'")
    rows: list[RegularityRow] = Field(default_factory=list, description="One row per (order, p, amplitude)")
    constant_spread: float = Field(default=0.0, description="Worst max/min - 1 of the ratios across amplitudes")
    passed: bool = Field(description="True when every entry is finite and the constant is stable")


class ManifestEntry(BaseModel):
    """One file written by a scenario."""

    path: str = Field(description="Path relative to the output directory")
    sha256: str = Field(description="Hex digest of the file contents")
    size: int = Field(description="Size in bytes")


class RunManifest(BaseModel):
    """Reproducibility record written next to every scenario's outputs."""

    scenario: str = Field(description="Scenario id")
    config_hash: str = Field(description="sha256 of the canonical config JSON")
    seed: int = Field(description="Random seed")
    exit_code: int = Field(description="Process exit status")
    created_at: datetime = Field(description="When the run finished (UTC)")
    versions: dict[str, str] = Field(default_factory=dict, description="Package versions used")
    files: list[ManifestEntry] = Field(default_factory=list, description="Every emitted file with checksum")


class ErrorReport(BaseModel):
    """Machine-readable failure written as error.json."""

    error_type: str = Field(description="Exception class name")
    message: str = Field(description="Human-readable message")
    exit_code: int = Field(description="Process exit status")
    details: dict[str, Any] = Field(default_factory=dict, description="Structured attributes of the exception")
