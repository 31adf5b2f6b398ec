"""Run configuration.

A run is described by a TOML file (``--config``) whose tables mirror
:class:`RunConfig`.  ``EPW_*`` environment variables (``__`` for nesting, e.g.
``EPW_SOLVER__TOL``) and a ``.env`` file in the working directory override the
file; explicit keyword overrides (CLI flags) override everything.

Uses ``pydantic-settings`` ``BaseSettings`` with a ``TomlConfigSettingsSource``.
Unknown keys anywhere are errors.
"""

from __future__ import annotations

import logging
import math
from pathlib import Path
from typing import Any, Literal, Self

from pydantic import AliasChoices, BaseModel, ConfigDict, Field, ValidationError, field_validator, model_validator
from pydantic_settings import BaseSettings, PydanticBaseSettingsSource, SettingsConfigDict, TomlConfigSettingsSource

from elastoperiodic.errors import ConfigurationError
from elastoperiodic.nonlinear import QuadraticForm
from elastoperiodic.periodic import ForcingSpec, Waveform, WaveformKind
from elastoperiodic.spectral import MAX_POINTS, MIN_POINTS, Grid, default_cutoffs, make_grid
from elastoperiodic.symbols import ElasticParams

logger = logging.getLogger(__name__)

ENV_PREFIX = "EPW_"


class GridConfig(BaseModel):
    """Periodic box."""

    model_config = ConfigDict(extra="forbid")

    L: float = Field(
        default=64 * math.pi, gt=0, allow_inf_nan=False, validation_alias=AliasChoices("L", "l"), description="Box side length"
    )
    N: int = Field(default=64, validation_alias=AliasChoices("N", "n"), description="Points per dimension (even)")

    @field_validator("N")
    @classmethod
    def _check_points(cls, value: int) -> int:
        if value % 2 or not MIN_POINTS <= value <= MAX_POINTS:
            msg = f"N must be even and in [{MIN_POINTS}, {MAX_POINTS}], got {value}"
            raise ValueError(msg)
        return value


class ProfileConfig(BaseModel):
    """Spatial profile of the forcing."""

    model_config = ConfigDict(extra="forbid")

    kind: Literal["gaussian", "snapshot"] = Field(default="gaussian", description="Gaussian bump or EPWF snapshot file")
    center: tuple[float, float, float] | None = Field(default=None, description="Gaussian center; box center when absent")
    width: float = Field(default=4.0, gt=0, allow_inf_nan=False, description="Gaussian width")
    path: Path | None = Field(default=None, description="Snapshot file for kind = 'snapshot'")

    @model_validator(mode="after")
    def _check_path(self) -> Self:
        if self.kind == "snapshot" and self.path is None:
            msg = "profile kind 'snapshot' needs a path"
            raise ValueError(msg)
        return self


class WaveformConfig(BaseModel):
    """Time factor of the forcing."""

    model_config = ConfigDict(extra="forbid")

    kind: WaveformKind = Field(default=WaveformKind.SIN, description="sin, cos or fourier")
    coefficients: list[tuple[float, float]] = Field(default_factory=list, description="[a_n, b_n] pairs for n = 1, 2, ...")

    @model_validator(mode="after")
    def _check_coefficients(self) -> Self:
        if self.kind is WaveformKind.FOURIER and not self.coefficients:
            msg = "waveform kind 'fourier' needs coefficients"
            raise ValueError(msg)
        return self


class ForcingConfig(BaseModel):
    """Time-periodic external force."""

    model_config = ConfigDict(extra="forbid")

    T: float = Field(default=1.0, gt=0, allow_inf_nan=False, validation_alias=AliasChoices("T", "t"), description="Period")
    amplitude: float = Field(default=1e-3, allow_inf_nan=False, description="Forcing amplitude")
    direction: tuple[float, float, float] = Field(default=(1.0, 0.0, 0.0), description="Force direction, normalized on load")
    profile: ProfileConfig = Field(default_factory=ProfileConfig, description="Spatial profile")
    waveform: WaveformConfig = Field(default_factory=WaveformConfig, description="Time factor")

    @field_validator("direction")
    @classmethod
    def _normalize(cls, value: tuple[float, float, float]) -> tuple[float, float, float]:
        length = math.sqrt(sum(c * c for c in value))
        if not length > 0:
            msg = "forcing direction must be a nonzero vector"
            raise ValueError(msg)
        return (value[0] / length, value[1] / length, value[2] / length)

    def build(self, grid: Grid) -> ForcingSpec:
        waveform = Waveform(kind=self.waveform.kind, coefficients=tuple(self.waveform.coefficients))
        if self.profile.kind == "snapshot" and self.profile.path is not None:
            return ForcingSpec.from_snapshot(self.profile.path, grid, period=self.T, amplitude=self.amplitude, waveform=waveform)
        return ForcingSpec.gaussian(
            grid,
            period=self.T,
            amplitude=self.amplitude,
            width=self.profile.width,
            center=self.profile.center,
            direction=self.direction,
            waveform=waveform,
        )


class SolverConfig(BaseModel):
    """Periodic solver and time integrator settings."""

    model_config = ConfigDict(extra="forbid")

    tol: float = Field(default=1e-10, gt=0, description="Picard stopping tolerance (X1-proxy step)")
    max_iter: int = Field(default=20, ge=1, description="Maximum Picard iterations")
    n_t: int = Field(default=64, ge=8, description="Time nodes per period (even)")
    dt: float | None = Field(default=None, gt=0, description="Time step; T/256 when absent")
    c0: float | None = Field(default=None, gt=0, description="Low-band cutoff; half the smaller confluence radius when absent")
    c1: float | None = Field(default=None, gt=0, description="High-band cutoff; twice the larger confluence radius when absent")
    p0: float = Field(default=2.5, ge=2, allow_inf_nan=False, description="Forcing integrability exponent")
    blowup_factor: float = Field(default=1e6, gt=1, description="Divergence bound relative to the initial norm")
    amplitude_factors: list[float] = Field(default_factory=lambda: [1.0, 0.5], min_length=1, description="Linear-response sweep")
    snapshot_stride: int = Field(default=16, ge=1, description="Write every k-th node snapshot of u_per")

    @field_validator("n_t")
    @classmethod
    def _check_nodes(cls, value: int) -> int:
        if value % 2:
            msg = f"n_t must be even, got {value}"
            raise ValueError(msg)
        return value

    @model_validator(mode="after")
    def _check_cutoffs(self) -> Self:
        if self.c0 is not None and self.c1 is not None and not self.c0 < self.c1:
            msg = f"cutoffs must satisfy c0 < c1, got c0={self.c0}, c1={self.c1}"
            raise ValueError(msg)
        return self


class PerturbationConfig(BaseModel):
    """Initial perturbation and decay measurement."""

    model_config = ConfigDict(extra="forbid")

    amplitude: float = Field(default=1e-3, allow_inf_nan=False, description="Amplitude of the Gaussian data")
    width: float = Field(default=4.0, gt=0, description="Width of the Gaussian data")
    t_end: float | None = Field(default=None, gt=0, description="Run length; end of the fit window when absent")
    sample_every: int = Field(default=64, ge=1, description="Steps between norm samples")
    window: tuple[float, float] | None = Field(default=None, description="Fit window; [5, L/(4 max alpha)] when absent")
    tolerance: float = Field(default=0.3, gt=0, description="Allowed |fitted - target| exponent gap")

    @field_validator("window")
    @classmethod
    def _check_window(cls, value: tuple[float, float] | None) -> tuple[float, float] | None:
        if value is not None and not 0 <= value[0] < value[1]:
            msg = f"window must satisfy 0 <= t0 < t1, got {value}"
            raise ValueError(msg)
        return value


class ProbesConfig(BaseModel):
    """Kernel probe settings."""

    model_config = ConfigDict(extra="forbid")

    t_start: float = Field(default=5.0, gt=0, description="First probe time")
    t_stop: float = Field(default=40.0, gt=0, description="Last probe time")
    t_count: int = Field(default=16, ge=8, description="Probe times (log-spaced)")
    data_width: float = Field(default=1.0, gt=0, description="Width of the Gaussian probe data")
    band_count: int = Field(default=12, ge=8, description="Probe times for the exponential middle/high-band fits")

    @model_validator(mode="after")
    def _check_range(self) -> Self:
        if not self.t_start < self.t_stop:
            msg = f"need t_start < t_stop, got {self.t_start}, {self.t_stop}"
            raise ValueError(msg)
        return self


class RunConfig(BaseModel):
    """Top-level elastoperiodic configuration."""

    model_config = ConfigDict(extra="forbid")

    scenario: str = Field(default="verify-symbols", description="Scenario id")
    output_dir: Path = Field(default=Path("runs/latest"), description="Directory receiving every artifact")
    seed: int = Field(default=0, ge=0, description="Seed for randomized suites")
    workers: int = Field(default=1, ge=1, description="FFT worker threads")
    form: list[list[float]] | None = Field(
        default=None, description="Quadratic form rows [i, a, b, c, d, e, weight]; default contraction when absent"
    )
    params: ElasticParams = Field(default_factory=ElasticParams, description="Lamé constants and viscosity")
    grid: GridConfig = Field(default_factory=GridConfig, description="Periodic box")
    forcing: ForcingConfig = Field(default_factory=ForcingConfig, description="Periodic force")
    solver: SolverConfig = Field(default_factory=SolverConfig, description="Solver settings")
    perturbation: PerturbationConfig = Field(default_factory=PerturbationConfig, description="Perturbation settings")
    probes: ProbesConfig = Field(default_factory=ProbesConfig, description="Kernel probe settings")

    @field_validator("form")
    @classmethod
    def _check_form(cls, value: list[list[float]] | None) -> list[list[float]] | None:
        if value is not None:
            try:
                QuadraticForm.from_rows(value)
            except ConfigurationError as exc:
                raise ValueError(str(exc)) from exc
        return value

    def make_grid(self) -> Grid:
        return make_grid(self.grid.L, self.grid.N)

    def quadratic_form(self) -> QuadraticForm:
        return QuadraticForm.default() if self.form is None else QuadraticForm.from_rows(self.form)

    def cutoffs(self) -> tuple[float, float]:
        c0, c1 = default_cutoffs(self.params)
        c0 = self.solver.c0 if self.solver.c0 is not None else c0
        c1 = self.solver.c1 if self.solver.c1 is not None else c1
        if not c0 < c1:
            msg = f"cutoffs must satisfy c0 < c1, got c0={c0}, c1={c1}"
            raise ConfigurationError(msg)
        return c0, c1

    def time_step(self) -> float:
        return self.solver.dt if self.solver.dt is not None else self.forcing.T / 256


def load_config(path: Path | None = None, **overrides: Any) -> RunConfig:
    """Load a :class:`RunConfig` from ``path``, ``EPW_*`` variables, ``.env`` and ``overrides``.

    Any validation failure is re-raised as :class:`ConfigurationError`.

    Examples::

        EPW_SOLVER__TOL=1e-9
        EPW_PARAMS__LAMBDA=0.5
    """
    if path is not None and not path.is_file():
        msg = f"config file not found: {path}"
        raise ConfigurationError(msg)

    class _SettingsConfig(BaseSettings):
        """Thin wrapper that layers the config sources into a ``RunConfig``."""

        model_config = SettingsConfigDict(
            env_prefix=ENV_PREFIX,
            env_nested_delimiter="__",
            extra="forbid",
            env_file=".env",
            env_file_encoding="utf-8",
        )

        scenario: str = "verify-symbols"
        output_dir: Path = Path("runs/latest")
        seed: int = 0
        workers: int = 1
        form: list[list[float]] | None = None
        params: ElasticParams = Field(default_factory=ElasticParams)
        grid: GridConfig = Field(default_factory=GridConfig)
        forcing: ForcingConfig = Field(default_factory=ForcingConfig)
        solver: SolverConfig = Field(default_factory=SolverConfig)
        perturbation: PerturbationConfig = Field(default_factory=PerturbationConfig)
        probes: ProbesConfig = Field(default_factory=ProbesConfig)

        @classmethod
        def settings_customise_sources(
            cls,
            settings_cls: type[BaseSettings],
            init_settings: PydanticBaseSettingsSource,
            env_settings: PydanticBaseSettingsSource,
            dotenv_settings: PydanticBaseSettingsSource,
            file_secret_settings: PydanticBaseSettingsSource,
        ) -> tuple[PydanticBaseSettingsSource, ...]:
            sources = (init_settings, env_settings, dotenv_settings)
            if path is None:
                return sources
            return (*sources, TomlConfigSettingsSource(settings_cls, toml_file=path))

    try:
        settings = _SettingsConfig(**{key: value for key, value in overrides.items() if value is not None})
        config = RunConfig.model_validate({name: getattr(settings, name) for name in RunConfig.model_fields})
    except ValidationError as exc:
        msg = f"invalid configuration: {exc}"
        raise ConfigurationError(msg) from exc
    logger.info("Config loaded (scenario=%s, grid N=%d, source=%s)", config.scenario, config.grid.N, path or "defaults")
    return config


def known_env_prefixes() -> frozenset[str]:
    """``EPW_<SECTION>`` names accepted by :func:`load_config`."""
    return frozenset(f"{ENV_PREFIX}{name.upper()}" for name in RunConfig.model_fields)
