"""Per-frequency linear algebra of the damped elastic wave operator.

For a frequency ξ the linearized system u'' − μΔu − (λ+μ)∇div u − νΔu' = 0
becomes the 6×6 first-order system with symbol

    Â_ξ = [[0, I₃], [−μ|ξ|²I₃ − (λ+μ) ξ⊗ξ, −ν|ξ|²I₃]].

Â_ξ splits along the Riesz projections R₁ = ξ̂⊗ξ̂ (pressure branch, j = 1,
speed α₁ = √(λ+2μ)) and R₂ = I − R₁ (shear branch, j = 2, speed α₂ = √μ).
On branch j the characteristic roots solve σ² + ν|ξ|²σ + α_j²|ξ|² = 0, and
every analytic function f of Â_ξ acts on the branch as

    [[f₋ − σ₋·Df, Df], [−α_j²|ξ|²·Df, σ₊·Df + f₋]] ⊗ R_j

with f₋ = f(σ₋) and Df = (f(σ₊) − f(σ₋))/(σ₊ − σ₋).  All symbols in this module
(propagator, resolvent factor, the periodic kernel Q̂) are built from that
single block form, so the only delicate quantity is the divided difference Df.
It is evaluated in a form that stays finite at root confluence
|ξ| = 2α_j/ν and never forms e^{+ν|ξ|²t}.

Two layers are exposed:

- vectorized *branch scalars* (functions of |ξ|² arrays) used by the lattice
  operators, and
- the per-ξ API (``char_roots``, ``projections``, ``propagator``, ...) that
  assembles explicit 6×6 / 3×3 matrices.
"""

from __future__ import annotations

import logging
import math
from dataclasses import dataclass
from enum import StrEnum
from typing import TYPE_CHECKING, NamedTuple, Self

import numpy as np
from pydantic import BaseModel, ConfigDict, Field, model_validator

from elastoperiodic.errors import NearSingularError, ZeroModeError

if TYPE_CHECKING:
    from numpy.typing import ArrayLike, NDArray

logger = logging.getLogger(__name__)

CONFLUENCE_RTOL = 1e-8
RESOLVENT_FLOOR = 1e-12

_SERIES_RADIUS = 0.5
_SERIES_RTOL = 1e-16
_SERIES_MAX_TERMS = 60
_K1_INTEGRAL_TERMS = 40


class ElasticParams(BaseModel):
    """Lamé constants and viscosity of the medium."""

    model_config = ConfigDict(frozen=True, extra="forbid", validate_by_name=True, validate_by_alias=True, serialize_by_alias=True)

    mu: float = Field(default=1.0, gt=0, allow_inf_nan=False, description="Shear modulus μ")
    lam: float = Field(default=0.0, alias="lambda", allow_inf_nan=False, description="Lamé constant λ")
    nu: float = Field(default=1.0, gt=0, allow_inf_nan=False, description="Viscosity ν of the −νΔ∂ₜu damping")

    @model_validator(mode="after")
    def _check_lame(self) -> Self:
        if self.lam + 2 * self.mu <= 0:
            msg = f"Lamé constants must satisfy lambda + 2*mu > 0 (got lambda={self.lam}, mu={self.mu})"
            raise ValueError(msg)
        return self

    @property
    def alpha1(self) -> float:
        """Pressure wave speed √(λ+2μ)."""
        return math.sqrt(self.lam + 2 * self.mu)

    @property
    def alpha2(self) -> float:
        """Shear wave speed √μ."""
        return math.sqrt(self.mu)

    @property
    def branch_speeds_sq(self) -> tuple[float, float]:
        """(α₁², α₂²) taken directly from the constants, not by squaring the roots."""
        return (self.lam + 2 * self.mu, self.mu)

    @property
    def confluence_radii(self) -> tuple[float, float]:
        """|ξ| at which the two roots of each branch coincide."""
        return (2 * self.alpha1 / self.nu, 2 * self.alpha2 / self.nu)

    @property
    def max_speed(self) -> float:
        return max(self.alpha1, self.alpha2)


# ---------------------------------------------------------------------------
# Vectorized branch scalars
# ---------------------------------------------------------------------------


class BranchRoots(NamedTuple):
    """Roots σ₊, σ₋ of one branch over an array of |ξ|² values."""

    plus: NDArray[np.complex128]
    minus: NDArray[np.complex128]
    confluent: NDArray[np.bool_]


class BranchBlock(NamedTuple):
    """Scalar 2×2 block [[uu, uv], [vu, vv]] multiplying R_j on one branch."""

    uu: NDArray[np.complex128]
    uv: NDArray[np.complex128]
    vu: NDArray[np.complex128]
    vv: NDArray[np.complex128]


def branch_roots(speed_sq: float, nu: float, xi_sq: ArrayLike) -> BranchRoots:
    """Roots of σ² + ν|ξ|²σ + α²|ξ|² = 0 with the fixed ± labeling.

    σ₊ has the positive imaginary part when the roots are complex and the
    larger real part when they are real.  In the real case σ₊ is taken from
    the product σ₊σ₋ = α²|ξ|² so that it keeps full relative accuracy when
    ν|ξ|² ≫ α (σ₊ → −α²/ν).
    """
    s = np.asarray(xi_sq, dtype=float)
    damping = nu * s
    disc = damping**2 - 4.0 * speed_sq * s
    root = np.sqrt(disc.astype(complex))
    minus = -(damping + root) / 2
    plus_complex = (-damping + root) / 2
    plus_real = np.divide(speed_sq * s, minus, out=np.zeros_like(minus), where=minus != 0)
    plus = np.where(disc < 0, plus_complex, plus_real)
    confluent = (np.abs(disc) < CONFLUENCE_RTOL * damping**2) & (s > 0)
    return BranchRoots(plus, minus, confluent)


def _psi(z: NDArray[np.complex128], force_series: NDArray[np.bool_]) -> NDArray[np.complex128]:
    """(1 − e^{−z})/z, by power series near 0 and wherever ``force_series`` is set."""
    out = np.empty_like(z)
    series = force_series | (np.abs(z) < _SERIES_RADIUS)
    direct = ~series
    zd = z[direct]
    out[direct] = -np.expm1(-zd) / zd
    zs = z[series]
    term = np.ones_like(zs)
    total = term.copy()
    for k in range(1, _SERIES_MAX_TERMS):
        term = term * (-zs) / (k + 1)
        total += term
        if not np.any(np.abs(term) > _SERIES_RTOL * np.abs(total)):
            break
    out[series] = total
    return out


def exp_divided_difference(roots: BranchRoots, t: float) -> NDArray[np.complex128]:
    """(e^{σ₊t} − e^{σ₋t})/(σ₊ − σ₋) for t ≥ 0, written as t·e^{σ₊t}·ψ((σ₊−σ₋)t).

    Re(σ₊ − σ₋) ≥ 0 with the labeling of :func:`branch_roots`, so ψ never
    sees a large negative real argument.
    """
    gap = roots.plus - roots.minus
    return t * np.exp(roots.plus * t) * _psi(gap * t, roots.confluent)


def _spectral_block(f_minus: NDArray, df: NDArray, roots: BranchRoots, product: NDArray) -> BranchBlock:
    return BranchBlock(
        uu=f_minus - roots.minus * df,
        uv=df,
        vu=-product * df,
        vv=roots.plus * df + f_minus,
    )


def propagator_scalars(speed_sq: float, nu: float, xi_sq: ArrayLike, t: float) -> BranchBlock:
    """Branch block of e^{tÂ}: uu = K̂₀, uv = K̂₁, vu = ∂ₜK̂₀, vv = ∂ₜK̂₁."""
    s = np.asarray(xi_sq, dtype=float)
    roots = branch_roots(speed_sq, nu, s)
    return _spectral_block(np.exp(roots.minus * t), exp_divided_difference(roots, t), roots, speed_sq * s)


def _resolvent_weights(roots: BranchRoots, positive: NDArray[np.bool_], period: float) -> tuple[NDArray, NDArray]:
    """(1 − e^{σ₊T})⁻¹ and (1 − e^{σ₋T})⁻¹, zero where ``positive`` is false."""
    gap_plus = -np.expm1(roots.plus * period)
    gap_minus = -np.expm1(roots.minus * period)
    singular = positive & ((np.abs(gap_plus) < RESOLVENT_FLOOR) | (np.abs(gap_minus) < RESOLVENT_FLOOR))
    if np.any(singular):
        index = tuple(int(i[0]) for i in np.nonzero(singular))
        sigma = roots.plus[index] if abs(gap_plus[index]) < RESOLVENT_FLOOR else roots.minus[index]
        raise NearSingularError(complex(sigma), RESOLVENT_FLOOR)
    zeros = np.zeros_like(gap_plus)
    weight_plus = np.divide(1.0, gap_plus, out=zeros.copy(), where=positive)
    weight_minus = np.divide(1.0, gap_minus, out=zeros, where=positive)
    return weight_plus, weight_minus


def resolvent_scalars(speed_sq: float, nu: float, xi_sq: ArrayLike, period: float) -> BranchBlock:
    """Branch block of (I₆ − e^{TÂ})⁻¹; identically zero at ξ = 0."""
    s = np.asarray(xi_sq, dtype=float)
    roots = branch_roots(speed_sq, nu, s)
    weight_plus, weight_minus = _resolvent_weights(roots, s > 0, period)
    df = exp_divided_difference(roots, period) * weight_plus * weight_minus
    return _spectral_block(weight_minus, df, roots, speed_sq * s)


def q_scalars(speed_sq: float, nu: float, xi_sq: ArrayLike, t: float, period: float) -> BranchBlock:
    """Branch block of e^{tÂ}(I₆ − e^{TÂ})⁻¹e^{TÂ} for t ∈ [−T, T].

    uv is the periodic kernel Q̂^{(j)}(t) and vv its time derivative.  The
    numerator of the divided difference is rewritten as

        E(t+T) − sgn(t)·e^{−ν|ξ|² min(t+T, T)}·E(|t|),   E = exp divided difference,

    which only contains decaying exponentials.
    """
    s = np.asarray(xi_sq, dtype=float)
    roots = branch_roots(speed_sq, nu, s)
    weight_plus, weight_minus = _resolvent_weights(roots, s > 0, period)
    shifted = t + period
    h_minus = np.exp(roots.minus * shifted) * weight_minus
    numerator = exp_divided_difference(roots, shifted) - np.sign(t) * np.exp(-nu * s * min(shifted, period)) * exp_divided_difference(
        roots, abs(t)
    )
    df = numerator * weight_plus * weight_minus
    return _spectral_block(h_minus, df, roots, speed_sq * s)


def k1_integral(speed_sq: float, nu: float, xi_sq: ArrayLike, h: float) -> NDArray[np.complex128]:
    """∫₀ʰ K̂₁(s) ds on one branch.

    Closed form (1 − K̂₀(h))/(α²|ξ|²) where |σ₋|h > 1; Taylor series from the
    recursion K⁽ⁿ⁺²⁾ = −ν|ξ|²K⁽ⁿ⁺¹⁾ − α²|ξ|²K⁽ⁿ⁾ elsewhere (this covers ξ = 0,
    where the integral is h²/2).
    """
    s = np.asarray(xi_sq, dtype=float)
    roots = branch_roots(speed_sq, nu, s)
    product = speed_sq * s
    series = np.abs(roots.minus) * h <= 1.0
    out = np.empty(s.shape, dtype=complex)
    closed = ~series
    k0 = propagator_scalars(speed_sq, nu, s[closed], h).uu
    out[closed] = (1.0 - k0) / product[closed]

    damping = nu * s[series]
    prod = product[series]
    c_prev = np.zeros(damping.shape, dtype=complex)
    c_cur = np.ones(damping.shape, dtype=complex)
    factor = h * h / 2
    total = c_cur * factor
    for n in range(2, _K1_INTEGRAL_TERMS):
        c_prev, c_cur = c_cur, -damping * c_cur - prod * c_prev
        factor *= h / (n + 1)
        total += c_cur * factor
    out[series] = total
    return out


def time_derivative(value: NDArray, rate: NDArray, speed_sq: float, nu: float, xi_sq: ArrayLike, order: int) -> NDArray:
    """∂ₜ^order of a branch kernel y from (y, y') via y'' = −ν|ξ|²y' − α²|ξ|²y."""
    if order < 0:
        msg = f"time-derivative order must be >= 0, got {order}"
        raise ValueError(msg)
    s = np.asarray(xi_sq, dtype=float)
    if order == 0:
        return value
    previous, current = value, rate
    for _ in range(order - 1):
        previous, current = current, -nu * s * current - speed_sq * s * previous
    return current


# ---------------------------------------------------------------------------
# Per-frequency matrices
# ---------------------------------------------------------------------------


class MatrixRole(StrEnum):
    SYMBOL = "symbol"
    PROPAGATOR = "propagator"
    RESOLVENT_FACTOR = "resolvent-factor"
    KERNEL_BLOCK = "kernel-block"


@dataclass(frozen=True)
class ModeMatrix:
    """A 6×6 per-frequency matrix tagged with what it represents."""

    entries: NDArray[np.complex128]
    role: MatrixRole


@dataclass(frozen=True)
class CharRoots:
    """σ[j, 0] = σ_{j+1,+}, σ[j, 1] = σ_{j+1,−}; ``confluent[j]`` flags branch j+1."""

    sigma: NDArray[np.complex128]
    confluent: NDArray[np.bool_]

    def plus(self, branch: int) -> complex:
        return complex(self.sigma[branch - 1, 0])

    def minus(self, branch: int) -> complex:
        return complex(self.sigma[branch - 1, 1])


@dataclass(frozen=True)
class ProjectionSet:
    """Riesz and spectral projections at one frequency.

    ``p`` is ordered (P_{1,+}, P_{1,−}, P_{2,+}, P_{2,−}).  On a confluent
    branch the eigenprojections do not exist separately; there P_{j,+} is the
    whole branch projection diag(R_j, R_j), P_{j,−} = 0, and the nilpotent
    remainder (Â − σ_{j,+})·diag(R_j, R_j) is collected in ``nilpotent`` so that
    Â = Σ σP + nilpotent.
    """

    r1: NDArray[np.float64]
    r2: NDArray[np.float64]
    p: tuple[NDArray[np.complex128], NDArray[np.complex128], NDArray[np.complex128], NDArray[np.complex128]]
    rtilde: NDArray[np.float64]
    nilpotent: NDArray[np.complex128]


def _frequency(xi: ArrayLike) -> NDArray[np.float64]:
    vec = np.asarray(xi, dtype=float)
    if vec.shape != (3,) or not np.all(np.isfinite(vec)):
        msg = f"frequency must be a finite 3-vector, got {xi!r}"
        raise ValueError(msg)
    return vec


def riesz_projections(xi: ArrayLike) -> tuple[NDArray[np.float64], NDArray[np.float64]]:
    """R₁ = ξ̂⊗ξ̂ and R₂ = I₃ − R₁."""
    vec = _frequency(xi)
    norm = np.linalg.norm(vec)
    if norm == 0:
        raise ZeroModeError("riesz_projections")
    unit = vec / norm
    r1 = np.outer(unit, unit)
    return r1, np.eye(3) - r1


def _lift(block: NDArray, riesz: NDArray) -> NDArray[np.complex128]:
    """Kronecker lift of a scalar 2×2 block onto a 3×3 projection."""
    return np.kron(np.asarray(block, dtype=complex), riesz)


def _assemble(xi: NDArray[np.float64], blocks: tuple[BranchBlock, BranchBlock]) -> NDArray[np.complex128]:
    r1, r2 = riesz_projections(xi)
    out = np.zeros((6, 6), dtype=complex)
    for block, riesz in zip(blocks, (r1, r2), strict=True):
        scalars = [[block.uu[0], block.uv[0]], [block.vu[0], block.vv[0]]]
        out += _lift(scalars, riesz)
    return out


def _per_branch(params: ElasticParams, xi_sq: float) -> list[tuple[float, NDArray[np.float64]]]:
    return [(speed_sq, np.array([xi_sq])) for speed_sq in params.branch_speeds_sq]


def char_roots(params: ElasticParams, xi_norm: float) -> CharRoots:
    """Characteristic roots of both branches at |ξ| = ``xi_norm``."""
    if not (math.isfinite(xi_norm) and xi_norm >= 0):
        msg = f"|xi| must be finite and >= 0, got {xi_norm}"
        raise ValueError(msg)
    sigma = np.zeros((2, 2), dtype=complex)
    confluent = np.zeros(2, dtype=bool)
    for j, (speed_sq, s) in enumerate(_per_branch(params, xi_norm**2)):
        roots = branch_roots(speed_sq, params.nu, s)
        sigma[j] = (roots.plus[0], roots.minus[0])
        confluent[j] = roots.confluent[0]
    return CharRoots(sigma=sigma, confluent=confluent)


def assemble_symbol(params: ElasticParams, xi: ArrayLike) -> ModeMatrix:
    """The block matrix Â_ξ."""
    vec = _frequency(xi)
    s = float(vec @ vec)
    entries = np.zeros((6, 6), dtype=complex)
    entries[:3, 3:] = np.eye(3)
    entries[3:, :3] = -params.mu * s * np.eye(3) - (params.lam + params.mu) * np.outer(vec, vec)
    entries[3:, 3:] = -params.nu * s * np.eye(3)
    return ModeMatrix(entries=entries, role=MatrixRole.SYMBOL)


def projections(params: ElasticParams, xi: ArrayLike) -> ProjectionSet:
    """Riesz projections, R̃ and the four spectral projections of Â_ξ."""
    vec = _frequency(xi)
    s = float(vec @ vec)
    if s == 0:
        raise ZeroModeError("projections")
    r1, r2 = riesz_projections(vec)
    rtilde = r1 / (params.lam + 2 * params.mu) + r2 / params.mu
    symbol = assemble_symbol(params, vec).entries
    roots = char_roots(params, math.sqrt(s))
    spectral: list[NDArray[np.complex128]] = []
    nilpotent = np.zeros((6, 6), dtype=complex)
    for j, riesz in enumerate((r1, r2)):
        speed_sq = params.branch_speeds_sq[j]
        sp, sm = roots.sigma[j]
        if roots.confluent[j]:
            lifted = _lift(np.eye(2), riesz)
            spectral.extend((lifted, np.zeros((6, 6), dtype=complex)))
            nilpotent += (symbol - sp * np.eye(6)) @ lifted
            logger.debug("Branch %d confluent at |xi|^2=%g; using the merged projection", j + 1, s)
            continue
        gap = sp - sm
        spectral.append(_lift([[-sm, 1.0], [-speed_sq * s, sp]], riesz) / gap)
        spectral.append(_lift([[sp, -1.0], [speed_sq * s, -sm]], riesz) / gap)
    return ProjectionSet(r1=r1, r2=r2, p=tuple(spectral), rtilde=rtilde, nilpotent=nilpotent)


def propagator(params: ElasticParams, xi: ArrayLike, t: float) -> ModeMatrix:
    """e^{tÂ_ξ} for t ≥ 0 (I₆ + tN at ξ = 0)."""
    if not (math.isfinite(t) and t >= 0):
        msg = f"propagator time must be finite and >= 0, got {t}"
        raise ValueError(msg)
    vec = _frequency(xi)
    s = float(vec @ vec)
    if s == 0:
        entries = np.eye(6, dtype=complex)
        entries[:3, 3:] = t * np.eye(3)
        return ModeMatrix(entries=entries, role=MatrixRole.PROPAGATOR)
    blocks = tuple(propagator_scalars(a, params.nu, xs, t) for a, xs in _per_branch(params, s))
    return ModeMatrix(entries=_assemble(vec, blocks), role=MatrixRole.PROPAGATOR)


def kernel_blocks(params: ElasticParams, xi: ArrayLike, t: float) -> tuple[NDArray[np.complex128], NDArray[np.complex128]]:
    """(K̂₀(t), K̂₁(t)): the solution operators for initial displacement and velocity."""
    vec = _frequency(xi)
    s = float(vec @ vec)
    if s == 0:
        raise ZeroModeError("kernel_blocks")
    if not (math.isfinite(t) and t >= 0):
        msg = f"kernel time must be finite and >= 0, got {t}"
        raise ValueError(msg)
    r1, r2 = riesz_projections(vec)
    k0 = np.zeros((3, 3), dtype=complex)
    k1 = np.zeros((3, 3), dtype=complex)
    for (speed_sq, xs), riesz in zip(_per_branch(params, s), (r1, r2), strict=True):
        block = propagator_scalars(speed_sq, params.nu, xs, t)
        k0 += block.uu[0] * riesz
        k1 += block.uv[0] * riesz
    return k0, k1


def resolvent_factor(params: ElasticParams, xi: ArrayLike, period: float) -> ModeMatrix:
    """(I₆ − e^{TÂ_ξ})⁻¹ through its spectral sum."""
    vec = _frequency(xi)
    s = float(vec @ vec)
    if s == 0:
        raise ZeroModeError("resolvent_factor")
    if period <= 0:
        msg = f"period must be > 0, got {period}"
        raise ValueError(msg)
    blocks = tuple(resolvent_scalars(a, params.nu, xs, period) for a, xs in _per_branch(params, s))
    return ModeMatrix(entries=_assemble(vec, blocks), role=MatrixRole.RESOLVENT_FACTOR)


def q_symbol(params: ElasticParams, xi: ArrayLike, t: float, period: float) -> NDArray[np.complex128]:
    """The periodic kernel Q̂(t) = Σ_j Q̂^{(j)}(t) R_j for t ∈ [−T, T]."""
    vec = _frequency(xi)
    s = float(vec @ vec)
    if s == 0:
        raise ZeroModeError("q_symbol")
    if period <= 0:
        msg = f"period must be > 0, got {period}"
        raise ValueError(msg)
    if abs(t) > period * (1 + 1e-12):
        msg = f"q_symbol argument must lie in [-T, T], got t={t} with T={period}"
        raise ValueError(msg)
    t = max(-period, min(period, t))
    r1, r2 = riesz_projections(vec)
    out = np.zeros((3, 3), dtype=complex)
    for (speed_sq, xs), riesz in zip(_per_branch(params, s), (r1, r2), strict=True):
        out += q_scalars(speed_sq, params.nu, xs, t, period).uv[0] * riesz
    return out
