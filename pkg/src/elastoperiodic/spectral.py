"""Periodic-box discretization and the Fourier transform pipeline.

Conventions, fixed once for the whole package:

- The box is [0, L)³ sampled at x_n = n·L/N.  Physical samples of a vector
  field have shape (3, N, N, N), component first.
- Coefficients are ``scipy.fft.rfftn(..., norm="forward")`` of each
  component: the Fourier-series coefficients c_k with f(x) = Σ c_k e^{iξ_k·x},
  ξ_k = (2π/L)k.  The whole-space transform with the symmetric constant is
  f̂(ξ_k) ≈ (2π)^{−3/2}·L³·c_k, and Parseval reads ‖f‖₂² = L³·Σ_k |c_k|² over
  the full lattice.
- Storage is the real-transform half lattice of shape (3, N, N, N//2+1):
  axes k₁, k₂ in FFT order (0, 1, …, N/2−1, −N/2, …, −1) and k₃ ∈ [0, N/2].
- Fields entering the solvers are *policy-enforced*: the zero mode and the
  Nyquist planes (any |k_i| = N/2) are exactly 0.  Derivative multipliers
  use wavenumber 0 on the Nyquist planes so that real fields stay real.
"""

from __future__ import annotations

import logging
from dataclasses import dataclass
from functools import cached_property
from typing import TYPE_CHECKING

import numpy as np
import scipy.fft

from elastoperiodic.errors import ConfigurationError, GridMismatchError, NonFiniteError

if TYPE_CHECKING:
    from pathlib import Path

    from numpy.typing import ArrayLike, NDArray

    from elastoperiodic.symbols import ElasticParams

logger = logging.getLogger(__name__)

MIN_POINTS = 16
MAX_POINTS = 512

SNAPSHOT_MAGIC = b"EPWF"
SNAPSHOT_VERSION = 1
_SNAPSHOT_HEADER = np.dtype([("magic", "S4"), ("version", "<u4"), ("n", "<u4"), ("length", "<f8"), ("ncomp", "<u4")])
_SNAPSHOT_COEFF = np.dtype("<c16")


@dataclass(frozen=True)
class Grid:
    """Uniform periodic grid of N³ points on a box of side L."""

    L: float
    N: int

    @property
    def dx(self) -> float:
        return self.L / self.N

    @property
    def cell_volume(self) -> float:
        return self.dx**3

    @property
    def volume(self) -> float:
        return self.L**3

    @property
    def shape(self) -> tuple[int, int, int]:
        return (self.N, self.N, self.N)

    @property
    def spectral_shape(self) -> tuple[int, int, int]:
        return (self.N, self.N, self.N // 2 + 1)

    @property
    def spacing(self) -> float:
        """Lattice spacing 2π/L of the frequency lattice."""
        return 2 * np.pi / self.L

    @cached_property
    def integer_modes(self) -> tuple[NDArray[np.int64], NDArray[np.int64], NDArray[np.int64]]:
        """Broadcastable integer mode numbers (k₁, k₂, k₃) of the half lattice."""
        full = np.rint(scipy.fft.fftfreq(self.N, 1 / self.N)).astype(np.int64)
        half = np.arange(self.N // 2 + 1, dtype=np.int64)
        return full[:, None, None], full[None, :, None], half[None, None, :]

    @cached_property
    def wavevector(self) -> tuple[NDArray[np.float64], ...]:
        """ξ components including the Nyquist wavenumber (used for |ξ|)."""
        return tuple(self.spacing * k.astype(float) for k in self.integer_modes)

    @cached_property
    def derivative_wavevector(self) -> tuple[NDArray[np.float64], ...]:
        """ξ components with the Nyquist wavenumber set to 0 (used for ∂)."""
        half = self.N // 2
        return tuple(self.spacing * np.where(np.abs(k) == half, 0, k).astype(float) for k in self.integer_modes)

    @cached_property
    def xi_sq(self) -> NDArray[np.float64]:
        k1, k2, k3 = self.wavevector
        return np.broadcast_to(k1**2 + k2**2 + k3**2, self.spectral_shape).copy()

    @cached_property
    def xi_norm(self) -> NDArray[np.float64]:
        return np.sqrt(self.xi_sq)

    @cached_property
    def unit_wavevector(self) -> NDArray[np.float64]:
        """ξ/|ξ| stacked as (3, *spectral_shape); zero at the zero mode."""
        stacked = np.stack([np.broadcast_to(k, self.spectral_shape) for k in self.wavevector])
        norm = self.xi_norm
        return np.divide(stacked, norm, out=np.zeros_like(stacked), where=norm > 0)

    @cached_property
    def nyquist(self) -> NDArray[np.bool_]:
        half = self.N // 2
        k1, k2, k3 = self.integer_modes
        return np.broadcast_to((np.abs(k1) == half) | (np.abs(k2) == half) | (k3 == half), self.spectral_shape).copy()

    @cached_property
    def hermitian_weights(self) -> NDArray[np.float64]:
        """Multiplicity of each stored mode in the full lattice (1 or 2)."""
        weights = np.full(self.spectral_shape, 2.0)
        weights[..., 0] = 1.0
        weights[..., -1] = 1.0
        return weights

    @cached_property
    def coordinates(self) -> tuple[NDArray[np.float64], NDArray[np.float64], NDArray[np.float64]]:
        axis = np.arange(self.N) * self.dx
        return tuple(np.meshgrid(axis, axis, axis, indexing="ij"))

    def mode_at(self, index: tuple[int, ...]) -> tuple[int, int, int]:
        """Integer mode triple of a half-lattice array index."""
        k1, k2, k3 = self.integer_modes
        return int(k1[index[0], 0, 0]), int(k2[0, index[1], 0]), int(k3[0, 0, index[2]])


def make_grid(L: float, N: int) -> Grid:
    """Validated :class:`Grid`."""
    if not (np.isfinite(L) and L > 0):
        msg = f"box length L must be finite and > 0, got {L}"
        raise ConfigurationError(msg)
    if N % 2 or not MIN_POINTS <= N <= MAX_POINTS:
        msg = f"N must be even and in [{MIN_POINTS}, {MAX_POINTS}], got {N}"
        raise ConfigurationError(msg)
    return Grid(L=float(L), N=int(N))


@dataclass(frozen=True)
class SpectralField:
    """Half-lattice Fourier coefficients of a real 3-component field."""

    grid: Grid
    coeffs: NDArray[np.complex128]

    def __post_init__(self) -> None:
        expected = (3, *self.grid.spectral_shape)
        if self.coeffs.shape != expected:
            msg = f"coefficient array has shape {self.coeffs.shape}, expected {expected}"
            raise GridMismatchError(msg)

    @classmethod
    def zeros(cls, grid: Grid) -> SpectralField:
        return cls(grid, np.zeros((3, *grid.spectral_shape), dtype=complex))

    def _check(self, other: SpectralField) -> None:
        if other.grid != self.grid:
            msg = f"fields live on different grids: {self.grid} vs {other.grid}"
            raise GridMismatchError(msg)

    def __add__(self, other: SpectralField) -> SpectralField:
        self._check(other)
        return SpectralField(self.grid, self.coeffs + other.coeffs)

    def __sub__(self, other: SpectralField) -> SpectralField:
        self._check(other)
        return SpectralField(self.grid, self.coeffs - other.coeffs)

    def __mul__(self, scalar: complex) -> SpectralField:
        return SpectralField(self.grid, self.coeffs * scalar)

    __rmul__ = __mul__

    def is_finite(self) -> bool:
        return bool(np.all(np.isfinite(self.coeffs)))


def check_same_grid(*fields: SpectralField) -> Grid:
    grid = fields[0].grid
    for field in fields[1:]:
        if field.grid != grid:
            msg = f"fields live on different grids: {grid} vs {field.grid}"
            raise GridMismatchError(msg)
    return grid


# ---------------------------------------------------------------------------
# Transforms
# ---------------------------------------------------------------------------


def to_spectral(grid: Grid, samples: ArrayLike) -> SpectralField:
    """Raw forward transform of physical samples of shape (3, N, N, N)."""
    values = np.asarray(samples, dtype=float)
    if values.shape != (3, *grid.shape):
        msg = f"samples have shape {values.shape}, expected {(3, *grid.shape)}"
        raise GridMismatchError(msg)
    return SpectralField(grid, scipy.fft.rfftn(values, axes=(1, 2, 3), norm="forward"))


def to_physical(field: SpectralField) -> NDArray[np.float64]:
    """Inverse transform to samples of shape (3, N, N, N)."""
    return scipy.fft.irfftn(field.coeffs, s=field.grid.shape, axes=(1, 2, 3), norm="forward")


def scalar_to_physical(grid: Grid, coeffs: NDArray[np.complex128]) -> NDArray[np.float64]:
    return scipy.fft.irfftn(coeffs, s=grid.shape, axes=(0, 1, 2), norm="forward")


def scalar_to_spectral(values: NDArray[np.float64]) -> NDArray[np.complex128]:
    return scipy.fft.rfftn(values, axes=(0, 1, 2), norm="forward")


def enforce_policy(field: SpectralField) -> SpectralField:
    """Zero the zero mode and the Nyquist planes."""
    coeffs = field.coeffs.copy()
    coeffs[:, field.grid.nyquist] = 0
    coeffs[:, 0, 0, 0] = 0
    return SpectralField(field.grid, coeffs)


def hermitian_defect(field: SpectralField) -> float:
    """Relative size of the part of the coefficients that no real field can carry."""
    projected = scipy.fft.rfftn(to_physical(field), axes=(1, 2, 3), norm="forward")
    scale = max(float(np.max(np.abs(field.coeffs))), np.finfo(float).tiny)
    return float(np.max(np.abs(projected - field.coeffs))) / scale


def spectral_l2_norm(field: SpectralField) -> float:
    """‖f‖₂ from the coefficients (Parseval with the documented normalization)."""
    energy = np.sum(field.grid.hermitian_weights * np.sum(np.abs(field.coeffs) ** 2, axis=0))
    return float(np.sqrt(field.grid.volume * energy))


# ---------------------------------------------------------------------------
# Multipliers
# ---------------------------------------------------------------------------


def apply_multiplier(field: SpectralField, multiplier: ArrayLike) -> SpectralField:
    """Per-mode 3×3 matrix-vector product.

    ``multiplier`` broadcasts to (3, 3, *spectral_shape).  Its value at the
    zero mode is ignored and the output zero mode is 0.
    """
    grid = field.grid
    matrix = np.broadcast_to(np.asarray(multiplier), (3, 3, *grid.spectral_shape))
    bad = ~np.isfinite(matrix).all(axis=(0, 1))
    bad[0, 0, 0] = False
    if np.any(bad):
        index = tuple(int(i[0]) for i in np.nonzero(bad))
        raise NonFiniteError(grid.mode_at(index))
    if not np.isfinite(matrix[:, :, 0, 0, 0]).all():
        matrix = matrix.copy()
        matrix[:, :, 0, 0, 0] = 0
    coeffs = np.einsum("ij...,j...->i...", matrix, field.coeffs)
    coeffs[:, 0, 0, 0] = 0
    return SpectralField(grid, coeffs)


def riesz_multiplier(grid: Grid) -> NDArray[np.float64]:
    """R₁(ξ) = ξ̂⊗ξ̂ over the lattice, shape (3, 3, *spectral_shape)."""
    unit = grid.unit_wavevector
    return np.einsum("i...,j...->ij...", unit, unit)


def apply_riesz(coeffs: NDArray[np.complex128], grid: Grid, c1: ArrayLike, c2: ArrayLike) -> NDArray[np.complex128]:
    """(c₁R₁ + c₂R₂) applied to (3, *spectral_shape) coefficients with scalar arrays c₁, c₂."""
    unit = grid.unit_wavevector
    longitudinal = np.einsum("i...,i...->...", unit, coeffs)
    return c2 * coeffs + (np.asarray(c1) - np.asarray(c2)) * longitudinal * unit


def derivative(coeffs: NDArray[np.complex128], grid: Grid, axes: tuple[int, ...]) -> NDArray[np.complex128]:
    """∂_{a₁}⋯∂_{a_k} applied spectrally (works on scalar or stacked coefficients)."""
    factor: NDArray[np.complex128] | complex = 1.0
    for axis in axes:
        factor = factor * (1j * grid.derivative_wavevector[axis])
    return coeffs * factor


def curl(field: SpectralField) -> SpectralField:
    """Spectral curl iξ × f̂."""
    grid = field.grid
    xi = [np.broadcast_to(k, grid.spectral_shape) for k in grid.derivative_wavevector]
    f1, f2, f3 = field.coeffs
    coeffs = 1j * np.stack([xi[1] * f3 - xi[2] * f2, xi[2] * f1 - xi[0] * f3, xi[0] * f2 - xi[1] * f1])
    return SpectralField(grid, coeffs)


def divergence(field: SpectralField) -> NDArray[np.complex128]:
    """Spectral divergence iξ·f̂ (scalar coefficients)."""
    grid = field.grid
    xi = np.stack([np.broadcast_to(k, grid.spectral_shape) for k in grid.derivative_wavevector])
    return 1j * np.einsum("i...,i...->...", xi, field.coeffs)


# ---------------------------------------------------------------------------
# Masks
# ---------------------------------------------------------------------------


@dataclass(frozen=True)
class CutoffMasks:
    """Low/middle/high frequency partition of unity on the lattice."""

    c0: float
    c1: float
    chi_low: NDArray[np.float64]
    chi_mid: NDArray[np.float64]
    chi_high: NDArray[np.float64]

    def band(self, name: str) -> NDArray[np.float64]:
        bands = {"L": self.chi_low, "M": self.chi_mid, "H": self.chi_high}
        if name not in bands:
            msg = f"unknown band {name!r}; expected one of L, M, H"
            raise ConfigurationError(msg)
        return bands[name]


def _blend(s: NDArray[np.float64]) -> NDArray[np.float64]:
    """C² ramp 3s² − 2s³ on [0, 1], clamped outside."""
    s = np.clip(s, 0.0, 1.0)
    return s * s * (3.0 - 2.0 * s)


def default_cutoffs(params: ElasticParams) -> tuple[float, float]:
    """(c0, c1) bracketing both confluence radii inside the middle band."""
    radii = params.confluence_radii
    return min(radii) / 2, 2 * max(radii)


def cutoff_masks(grid: Grid, c0: float, c1: float) -> CutoffMasks:
    if not 0 < c0 < c1:
        msg = f"cutoffs must satisfy 0 < c0 < c1, got c0={c0}, c1={c1}"
        raise ConfigurationError(msg)
    r = grid.xi_norm
    chi_low = 1.0 - _blend((r - c0 / 2) / (c0 / 2))
    chi_high = _blend((r - c1) / c1)
    chi_mid = 1.0 - chi_low - chi_high
    return CutoffMasks(c0=c0, c1=c1, chi_low=chi_low, chi_mid=chi_mid, chi_high=chi_high)


def dealias_mask(grid: Grid) -> NDArray[np.float64]:
    """2/3-rule weights: 0 where any |k_i| > N/3, else 1."""
    k1, k2, k3 = grid.integer_modes
    keep = (3 * np.abs(k1) <= grid.N) & (3 * np.abs(k2) <= grid.N) & (3 * k3 <= grid.N)
    return np.broadcast_to(keep, grid.spectral_shape).astype(float)


def band_limit(field: SpectralField) -> SpectralField:
    """Dealias mask and policy applied together."""
    return enforce_policy(SpectralField(field.grid, field.coeffs * dealias_mask(field.grid)))


# ---------------------------------------------------------------------------
# Profiles
# ---------------------------------------------------------------------------


def gaussian_profile(grid: Grid, center: ArrayLike | None, width: float) -> NDArray[np.float64]:
    """exp(−|x − c|²/(2w²)) with the minimum-image distance on the torus."""
    if width <= 0:
        msg = f"Gaussian width must be > 0, got {width}"
        raise ConfigurationError(msg)
    c = np.full(3, grid.L / 2) if center is None else np.asarray(center, dtype=float)
    dist_sq = np.zeros(grid.shape)
    for axis, coord in enumerate(grid.coordinates):
        offset = coord - c[axis]
        offset -= grid.L * np.round(offset / grid.L)
        dist_sq += offset**2
    return np.exp(-dist_sq / (2 * width**2))


def vector_profile(grid: Grid, scalar: NDArray[np.float64], direction: ArrayLike) -> SpectralField:
    """Band-limited, policy-enforced field ``scalar(x)·direction``."""
    unit = np.asarray(direction, dtype=float)
    samples = unit[:, None, None, None] * scalar[None]
    return band_limit(to_spectral(grid, samples))


# ---------------------------------------------------------------------------
# Snapshot files
# ---------------------------------------------------------------------------


def _full_lattice(field: SpectralField) -> NDArray[np.complex128]:
    """Expand the half lattice to all N³ modes via c(−k) = conj(c(k))."""
    n = field.grid.N
    half = field.coeffs
    reflect = (-np.arange(n)) % n
    mirrored = half[:, reflect][:, :, reflect]
    full = np.empty((3, n, n, n), dtype=complex)
    full[..., : n // 2 + 1] = half
    full[..., n // 2 + 1 :] = np.conj(mirrored[..., 1 : n // 2][..., ::-1])
    return full


def write_snapshot(path: Path, field: SpectralField) -> Path:
    """Write the EPWF binary format: header, then 3·N³ little-endian complex128 in FFT order."""
    header = np.array([(SNAPSHOT_MAGIC, SNAPSHOT_VERSION, field.grid.N, field.grid.L, 3)], dtype=_SNAPSHOT_HEADER)
    path.parent.mkdir(parents=True, exist_ok=True)
    with path.open("wb") as handle:
        handle.write(header.tobytes())
        handle.write(_full_lattice(field).astype(_SNAPSHOT_COEFF).tobytes())
    logger.debug("Snapshot written: %s", path)
    return path


def read_snapshot(path: Path) -> SpectralField:
    raw = path.read_bytes()
    if len(raw) < _SNAPSHOT_HEADER.itemsize:
        msg = f"{path} is too short to be a field snapshot"
        raise ConfigurationError(msg)
    header = np.frombuffer(raw[: _SNAPSHOT_HEADER.itemsize], dtype=_SNAPSHOT_HEADER)[0]
    if header["magic"] != SNAPSHOT_MAGIC or int(header["version"]) != SNAPSHOT_VERSION:
        msg = f"{path} is not an EPWF v{SNAPSHOT_VERSION} snapshot"
        raise ConfigurationError(msg)
    n, ncomp = int(header["n"]), int(header["ncomp"])
    grid = make_grid(float(header["length"]), n)
    payload = np.frombuffer(raw[_SNAPSHOT_HEADER.itemsize :], dtype=_SNAPSHOT_COEFF)
    if payload.size != ncomp * n**3 or ncomp != 3:
        msg = f"{path} holds {payload.size} coefficients, expected 3*{n}^3"
        raise ConfigurationError(msg)
    full = payload.reshape(3, n, n, n)
    return SpectralField(grid, np.ascontiguousarray(full[..., : n // 2 + 1]).astype(complex))
