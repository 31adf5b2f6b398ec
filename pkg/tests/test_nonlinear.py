"""Tests for the quadratic nonlinearity."""

from __future__ import annotations

import numpy as np
import pytest
from helpers.fields import smooth_field

from elastoperiodic.errors import ConfigurationError
from elastoperiodic.nonlinear import QuadraticForm, bilinear, eval_F, eval_G
from elastoperiodic.spectral import SpectralField, to_physical, to_spectral


@pytest.fixture
def form() -> QuadraticForm:
    return QuadraticForm.default()


class TestQuadraticForm:
    def test_default_has_every_term(self, form):
        assert len(form.entries) == 27
        assert {entry.component for entry in form.entries} == {1, 2, 3}

    def test_from_rows(self):
        built = QuadraticForm.from_rows([[1, 1, 1, 1, 1, 1, 0.5], [2, 1, 2, 3, 3, 2, -1.0]])
        assert built.entries[1].hessian == (3, 3, 2)
        assert built.entries[0].weight == 0.5

    def test_row_length_checked(self):
        with pytest.raises(ConfigurationError, match="7 items"):
            QuadraticForm.from_rows([[1, 1, 1, 1, 1, 1]])

    def test_fractional_index_rejected(self):
        with pytest.raises(ConfigurationError, match="integer"):
            QuadraticForm.from_rows([[1, 1.5, 1, 1, 1, 1, 1.0]])

    def test_out_of_range_index_rejected(self):
        with pytest.raises(ConfigurationError, match="invalid quadratic form"):
            QuadraticForm.from_rows([[1, 4, 1, 1, 1, 1, 1.0]])

    def test_empty_rejected(self):
        with pytest.raises(ConfigurationError):
            QuadraticForm.from_rows([])

    def test_scaled(self, form):
        assert all(entry.weight == 3.0 for entry in form.scaled(3.0).entries)


class TestBilinear:
    def test_known_product(self, grid16):
        # u₁ = cos(x₁/2): (∂₁u₁)(∂₁∂₁u₁) = sin(x₁)/16
        x1 = grid16.coordinates[0]
        zeros = np.zeros_like(x1)
        u = to_spectral(grid16, np.stack([np.cos(x1 / 2), zeros, zeros]))
        form = QuadraticForm.from_rows([[1, 1, 1, 1, 1, 1, 1.0]])
        result = to_physical(eval_F(u, form))
        np.testing.assert_allclose(result[0], np.sin(x1) / 16, atol=1e-12)
        np.testing.assert_allclose(result[1:], 0.0, atol=1e-14)

    def test_zero_field(self, grid16, form):
        assert not np.any(eval_F(SpectralField.zeros(grid16), form).coeffs)

    def test_linear_in_each_argument(self, grid16, rng, form):
        a, b, c = (smooth_field(grid16, rng) for _ in range(3))
        np.testing.assert_allclose(bilinear(2.0 * a, b, form).coeffs, 2.0 * bilinear(a, b, form).coeffs, atol=1e-10)
        np.testing.assert_allclose(
            bilinear(a, b + c, form).coeffs, (bilinear(a, b, form) + bilinear(a, c, form)).coeffs, atol=1e-12
        )

    def test_output_respects_policy(self, grid16, rng, form):
        result = eval_F(smooth_field(grid16, rng), form)
        assert not np.any(result.coeffs[:, grid16.nyquist])
        assert not np.any(result.coeffs[:, 0, 0, 0])


class TestPerturbationSource:
    def test_vanishes_at_zero(self, grid16, rng, form):
        assert not np.any(eval_G(SpectralField.zeros(grid16), smooth_field(grid16, rng), form).coeffs)

    def test_is_difference_of_nonlinearities(self, grid16, rng, form):
        utilde, uper = smooth_field(grid16, rng, 0.1), smooth_field(grid16, rng)
        expected = eval_F(utilde + uper, form) - eval_F(uper, form)
        np.testing.assert_allclose(eval_G(utilde, uper, form).coeffs, expected.coeffs, atol=1e-10)
