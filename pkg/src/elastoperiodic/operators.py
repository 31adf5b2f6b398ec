"""Lattice-wide 6×6 operators assembled from the branch scalars.

Every operator built from Â_ξ has the per-mode form Σ_j B_j ⊗ R_j with a
scalar 2×2 block B_j per branch.  A :class:`BranchOperator` stores those
scalars over the half lattice and applies them to a pair of coefficient arrays
(u, v) using R₁w = ξ̂(ξ̂·w) and R₂w = w − R₁w, so no per-mode 3×3 matrices are
ever formed.  Builders memoize their tables in :mod:`elastoperiodic.cache`.
"""

from __future__ import annotations

import logging
from dataclasses import dataclass
from typing import TYPE_CHECKING, Literal

import numpy as np

from elastoperiodic import cache, symbols
from elastoperiodic.symbols import BranchBlock

if TYPE_CHECKING:
    from collections.abc import Callable

    from numpy.typing import NDArray

    from elastoperiodic.spectral import Grid
    from elastoperiodic.symbols import ElasticParams

logger = logging.getLogger(__name__)

KernelName = Literal["K0", "K1", "Q"]


@dataclass(frozen=True)
class BranchOperator:
    """Σ_j [[uu, uv], [vu, vv]]_j ⊗ R_j over the lattice."""

    grid: Grid
    pressure: BranchBlock
    shear: BranchBlock

    def _split(self, coeffs: NDArray[np.complex128]) -> NDArray[np.complex128]:
        return np.einsum("i...,i...->...", self.grid.unit_wavevector, coeffs)

    def apply(self, u: NDArray[np.complex128], v: NDArray[np.complex128]) -> tuple[NDArray[np.complex128], NDArray[np.complex128]]:
        """Act on the state (u, v)."""
        unit = self.grid.unit_wavevector
        pu, pv = self._split(u), self._split(v)
        p, s = self.pressure, self.shear
        out_u = s.uu * u + s.uv * v + ((p.uu - s.uu) * pu + (p.uv - s.uv) * pv) * unit
        out_v = s.vu * u + s.vv * v + ((p.vu - s.vu) * pu + (p.vv - s.vv) * pv) * unit
        return out_u, out_v

    def apply_source(self, source: NDArray[np.complex128]) -> tuple[NDArray[np.complex128], NDArray[np.complex128]]:
        """Act on the state (0, source): only the right-hand column is used."""
        unit = self.grid.unit_wavevector
        ps = self._split(source)
        p, s = self.pressure, self.shear
        return s.uv * source + (p.uv - s.uv) * ps * unit, s.vv * source + (p.vv - s.vv) * ps * unit


def _memo(kind: str, params: ElasticParams, grid: Grid, *args: float, build: Callable[[], BranchOperator]) -> BranchOperator:
    key = cache.make_key(kind, params.model_dump(), grid.L, grid.N, *args)
    hit = cache.get(key)
    if hit is not cache._SENTINEL:
        return hit
    operator = build()
    cache.put(key, operator)
    return operator


def _per_branch(params: ElasticParams, grid: Grid, make: Callable[[float], BranchBlock]) -> BranchOperator:
    pressure, shear = (make(speed_sq) for speed_sq in params.branch_speeds_sq)
    return BranchOperator(grid=grid, pressure=pressure, shear=shear)


def propagator_operator(params: ElasticParams, grid: Grid, t: float) -> BranchOperator:
    """e^{tÂ} on every mode."""
    return _memo(
        "propagator",
        params,
        grid,
        t,
        build=lambda: _per_branch(params, grid, lambda a: symbols.propagator_scalars(a, params.nu, grid.xi_sq, t)),
    )


def resolvent_operator(params: ElasticParams, grid: Grid, period: float) -> BranchOperator:
    """(I₆ − e^{TÂ})⁻¹ on every mode, 0 on the zero mode."""
    return _memo(
        "resolvent",
        params,
        grid,
        period,
        build=lambda: _per_branch(params, grid, lambda a: symbols.resolvent_scalars(a, params.nu, grid.xi_sq, period)),
    )


def q_operator(params: ElasticParams, grid: Grid, t: float, period: float) -> BranchOperator:
    """e^{tÂ}(I₆ − e^{TÂ})⁻¹e^{TÂ}: the right-hand column holds (Q̂(t), ∂ₜQ̂(t))."""
    return _memo(
        "q",
        params,
        grid,
        t,
        period,
        build=lambda: _per_branch(params, grid, lambda a: symbols.q_scalars(a, params.nu, grid.xi_sq, t, period)),
    )


def duhamel_operator(params: ElasticParams, grid: Grid, h: float) -> BranchOperator:
    """∫₀ʰ e^{sÂ} ds restricted to sources in the velocity row.

    Right-hand column (∫₀ʰK̂₁, K̂₁(h)); the left column is unused and zero.
    """

    def make(speed_sq: float) -> BranchBlock:
        propagated = symbols.propagator_scalars(speed_sq, params.nu, grid.xi_sq, h)
        integral = symbols.k1_integral(speed_sq, params.nu, grid.xi_sq, h)
        zero = np.zeros_like(integral)
        return BranchBlock(uu=zero, uv=integral, vu=zero, vv=propagated.uv)

    return _memo("duhamel", params, grid, h, build=lambda: _per_branch(params, grid, make))


def kernel_scalars(
    params: ElasticParams,
    grid: Grid,
    kernel: KernelName,
    t: float,
    *,
    period: float = 1.0,
    time_order: int = 0,
) -> tuple[NDArray[np.complex128], NDArray[np.complex128]]:
    """Per-branch scalars of ∂ₜ^ℓ K̂₀(t), ∂ₜ^ℓ K̂₁(t) or ∂ₜ^ℓ Q̂(t) on the lattice.

    Returned as (pressure, shear) arrays for :func:`elastoperiodic.spectral.apply_riesz`.
    K̂₀/K̂₁ are 0 on the zero mode by the zero-mode policy.
    """
    out = []
    for speed_sq in params.branch_speeds_sq:
        if kernel == "Q":
            block = symbols.q_scalars(speed_sq, params.nu, grid.xi_sq, t, period)
            value, rate = block.uv, block.vv
        else:
            block = symbols.propagator_scalars(speed_sq, params.nu, grid.xi_sq, t)
            value, rate = (block.uu, block.vu) if kernel == "K0" else (block.uv, block.vv)
        scalar = symbols.time_derivative(value, rate, speed_sq, params.nu, grid.xi_sq, time_order)
        scalar = np.array(scalar, copy=True)
        scalar[0, 0, 0] = 0
        out.append(scalar)
    return out[0], out[1]
