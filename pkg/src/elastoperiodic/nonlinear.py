"""Pseudo-spectral quadratic nonlinearity F(u) = ∇u∇²u and the perturbation source G.

A :class:`QuadraticForm` is a sparse table of entries (i, (a, b), (c, d, e), w)
meaning F_i += w·(∂_a u_b)(∂_c∂_d u_e), indices 1-based.  The bilinear map
B(U, W)_i = Σ w·(∂_a U_b)(∂_c∂_d W_e) is evaluated with 2/3-rule dealiasing:
inputs are truncated to the retained band, derivatives are taken spectrally,
products are formed in physical space and the result is truncated again.
"""

from __future__ import annotations

import logging
from collections.abc import Iterable, Sequence
from typing import TYPE_CHECKING, Self

import numpy as np
from pydantic import BaseModel, ConfigDict, Field, ValidationError, model_validator

from elastoperiodic.errors import ConfigurationError, DivergenceError
from elastoperiodic.spectral import (
    SpectralField,
    check_same_grid,
    dealias_mask,
    derivative,
    enforce_policy,
    scalar_to_physical,
    to_spectral,
)

if TYPE_CHECKING:
    from numpy.typing import NDArray

logger = logging.getLogger(__name__)

_INDEX = (1, 2, 3)


class FormEntry(BaseModel):
    """One term w·(∂_a u_b)(∂_c∂_d u_e) added to component i."""

    model_config = ConfigDict(frozen=True, extra="forbid")

    component: int = Field(ge=1, le=3, description="Output component i")
    gradient: tuple[int, int] = Field(description="(a, b) in ∂_a u_b")
    hessian: tuple[int, int, int] = Field(description="(c, d, e) in ∂_c ∂_d u_e")
    weight: float = Field(default=1.0, allow_inf_nan=False, description="Coefficient w")

    @model_validator(mode="after")
    def _check_indices(self) -> Self:
        if any(index not in _INDEX for index in (*self.gradient, *self.hessian)):
            msg = f"form indices must lie in {{1, 2, 3}}, got gradient={self.gradient}, hessian={self.hessian}"
            raise ValueError(msg)
        return self


class QuadraticForm(BaseModel):
    """Coefficient table of the quadratic nonlinearity."""

    model_config = ConfigDict(frozen=True, extra="forbid")

    entries: tuple[FormEntry, ...] = Field(min_length=1, description="Nonempty list of terms")

    @classmethod
    def default(cls) -> QuadraticForm:
        """F_i = Σ_{j,k} (∂_j u_k)(∂_j∂_k u_i)."""
        return cls(
            entries=tuple(
                FormEntry(component=i, gradient=(j, k), hessian=(j, k, i), weight=1.0) for i in _INDEX for j in _INDEX for k in _INDEX
            )
        )

    @classmethod
    def from_rows(cls, rows: Iterable[Sequence[float]]) -> QuadraticForm:
        """Build from config rows ``[i, a, b, c, d, e, weight]``."""
        try:
            entries = []
            for row in rows:
                if len(row) != 7:
                    msg = f"form rows need 7 items [i, a, b, c, d, e, weight], got {list(row)}"
                    raise ConfigurationError(msg)
                i, a, b, c, d, e = (_as_index(value) for value in row[:6])
                entries.append(FormEntry(component=i, gradient=(a, b), hessian=(c, d, e), weight=float(row[6])))
            return cls(entries=tuple(entries))
        except ValidationError as exc:
            msg = f"invalid quadratic form: {exc}"
            raise ConfigurationError(msg) from exc

    def scaled(self, factor: float) -> QuadraticForm:
        return QuadraticForm(entries=tuple(entry.model_copy(update={"weight": entry.weight * factor}) for entry in self.entries))


def _as_index(value: float) -> int:
    if int(value) != value:
        msg = f"form index must be an integer, got {value}"
        raise ConfigurationError(msg)
    return int(value)


def bilinear(first: SpectralField, second: SpectralField, form: QuadraticForm) -> SpectralField:
    """B(first, second): gradients taken from ``first``, Hessians from ``second``."""
    grid = check_same_grid(first, second)
    mask = dealias_mask(grid)
    lhs = first.coeffs * mask
    rhs = second.coeffs * mask
    gradients: dict[tuple[int, int], NDArray[np.float64]] = {}
    hessians: dict[tuple[int, int, int], NDArray[np.float64]] = {}
    products = np.zeros((3, *grid.shape))
    with np.errstate(over="ignore", invalid="ignore"):
        for entry in form.entries:
            a, b = entry.gradient
            c, d, e = entry.hessian
            if entry.gradient not in gradients:
                gradients[entry.gradient] = scalar_to_physical(grid, derivative(lhs[b - 1], grid, (a - 1,)))
            if entry.hessian not in hessians:
                hessians[entry.hessian] = scalar_to_physical(grid, derivative(rhs[e - 1], grid, (c - 1, d - 1)))
            products[entry.component - 1] += entry.weight * gradients[entry.gradient] * hessians[entry.hessian]
    if not np.all(np.isfinite(products)):
        msg = "quadratic term overflowed in physical space"
        raise DivergenceError(msg)
    result = to_spectral(grid, products)
    return enforce_policy(SpectralField(grid, result.coeffs * mask))


def eval_F(u: SpectralField, form: QuadraticForm) -> SpectralField:
    """F(u) = B(u, u)."""
    return bilinear(u, u, form)


def eval_G(utilde: SpectralField, uper: SpectralField, form: QuadraticForm) -> SpectralField:
    """G(ũ) = F(ũ) + B(ũ, u_per) + B(u_per, ũ), grouped as B(ũ, ũ + u_per) + B(u_per, ũ)."""
    check_same_grid(utilde, uper)
    return bilinear(utilde, utilde + uper, form) + bilinear(uper, utilde, form)
