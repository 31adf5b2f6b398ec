"""Tests for norms, exponent tables, fits and probes."""

from __future__ import annotations

import math
from fractions import Fraction

import numpy as np
import pytest
from helpers.fields import smooth_field

from elastoperiodic.analysis import (
    X2_SPECS,
    ExponentSource,
    NormSpec,
    NormTarget,
    default_window,
    derivative_magnitude,
    fit_decay_exponent,
    fit_exponential_rate,
    fit_power_law,
    format_exponent,
    norm,
    norm_table,
    p0_star,
    predicted_power,
    probe_kernel_estimate,
    probe_regularity,
    q_leading_integral,
    q_leading_radius,
    theoretical_exponent,
    wrap_horizon,
    x1_norm,
)
from elastoperiodic.cauchy import TrajectoryLog
from elastoperiodic.errors import DegenerateDataError, DomainError
from elastoperiodic.models import Verdict
from elastoperiodic.periodic import PeriodicSolution
from elastoperiodic.spectral import SpectralField, cutoff_masks, default_cutoffs, make_grid, to_spectral


@pytest.fixture
def wave(grid16) -> SpectralField:
    """u = (sin((x₁ + x₂)/2), 0, 0)."""
    x1, x2, _ = grid16.coordinates
    zeros = np.zeros_like(x1)
    return to_spectral(grid16, np.stack([np.sin((x1 + x2) / 2), zeros, zeros]))


class TestLabels:
    @pytest.mark.parametrize(
        ("spec", "label"),
        [
            (NormSpec(), "u_L2"),
            (NormSpec(order=1, p=math.inf), "grad_u_Linf"),
            (NormSpec(order=3, p=2.5), "grad3_u_L5/2"),
            (NormSpec(target=NormTarget.V, order=0.5), "grad1/2_v_L2"),
        ],
    )
    def test_label(self, spec, label):
        assert spec.label == label

    def test_format_exponent(self):
        assert [format_exponent(p) for p in (2.0, 2.5, 10 / 9, math.inf)] == ["2", "5/2", "10/9", "inf"]


class TestNorms:
    def test_l2_and_sup(self, grid16, wave):
        volume = grid16.volume
        assert norm(wave, NormSpec()) == pytest.approx(math.sqrt(volume / 2))
        assert norm(wave, NormSpec(p=math.inf)) == pytest.approx(1.0)

    def test_gradient_magnitude(self, grid16, wave):
        # |∇u₁| = |cos|/√2
        assert norm(wave, NormSpec(order=1, p=math.inf)) == pytest.approx(1 / math.sqrt(2))

    def test_second_order_counts_mixed_entries(self, wave):
        assert float(np.max(derivative_magnitude(wave, 2))) == pytest.approx(0.5)

    def test_fractional_order_uses_modulus(self, wave):
        assert float(np.max(derivative_magnitude(wave, 0.5))) == pytest.approx((1 / math.sqrt(2)) ** 0.5)

    def test_l1_needs_opt_in(self, wave):
        with pytest.raises(DomainError, match="p=1"):
            norm(wave, NormSpec(p=1.0))
        assert norm(wave, NormSpec(p=1.0), allow_l1=True) > 0

    def test_table_uses_target(self, grid16, wave):
        table = norm_table(wave, SpectralField.zeros(grid16), [NormSpec(), NormSpec(target=NormTarget.V)])
        assert table["v_L2"] == 0.0
        assert table["u_L2"] > 0

    def test_x1_norm_is_sum(self, grid16, rng):
        u, v = smooth_field(grid16, rng), smooth_field(grid16, rng)
        assert x1_norm(u, v, 2.0) < x1_norm(u, v, 2.5)
        assert x1_norm(SpectralField.zeros(grid16), SpectralField.zeros(grid16), 2.5) == 0.0


class TestTheoreticalExponent:
    @pytest.mark.parametrize(
        ("spec", "expected"),
        [
            (NormSpec(order=3, p=2.0), Fraction(-7, 4)),
            (NormSpec(order=3, p=2.5), Fraction(-2)),
            (NormSpec(order=1, p=2.0), Fraction(-1, 4)),
            (NormSpec(order=1, p=math.inf), Fraction(-3, 2)),
            (NormSpec(target=NormTarget.V, p=2.0), Fraction(-3, 4)),
            (NormSpec(target=NormTarget.V, order=1, p=2.5), Fraction(-3, 2)),
            (NormSpec(target=NormTarget.V, order=0.5, p=2.0), Fraction(-1)),
        ],
    )
    def test_estimates(self, spec, expected):
        assert theoretical_exponent(spec) == expected

    def test_norm_weights_cover_stability_norm(self):
        weights = [theoretical_exponent(spec, ExponentSource.NORM_WEIGHT) for spec in X2_SPECS]
        assert len(weights) == 8
        assert theoretical_exponent(NormSpec(order=1, p=2.0), ExponentSource.NORM_WEIGHT) == Fraction(-3, 4)

    def test_weights_agree_with_estimates_off_gradient(self):
        for spec in X2_SPECS:
            if spec.target is NormTarget.U and spec.integer_order == 1:
                continue
            assert theoretical_exponent(spec) == theoretical_exponent(spec, ExponentSource.NORM_WEIGHT)

    def test_uncovered(self):
        with pytest.raises(DomainError, match="covered"):
            theoretical_exponent(NormSpec(order=2, p=2.0))
        with pytest.raises(DomainError, match="not an entry"):
            theoretical_exponent(NormSpec(order=2, p=2.0), ExponentSource.NORM_WEIGHT)


class TestWindows:
    def test_horizon_and_default_window(self, params, grid16):
        assert wrap_horizon(params, grid16) == pytest.approx(8 * math.pi / (2 * math.sqrt(2)))
        start, end = default_window(params, grid16)
        assert start == 5.0
        assert end == pytest.approx(wrap_horizon(params, grid16) / 2)


class TestFits:
    def test_power_law(self):
        times = np.linspace(0.0, 50.0, 30)
        fit = fit_power_law(times, (1 + times) ** -1.5)
        assert fit.slope == pytest.approx(-1.5)
        assert fit.samples == 30

    def test_power_law_window(self):
        times = np.linspace(0.0, 50.0, 51)
        values = np.where(times < 10, 1.0, (1 + times) ** -0.75)
        assert fit_power_law(times, values, (10.0, 50.0)).slope == pytest.approx(-0.75)

    def test_exponential_rate(self):
        times = np.linspace(1.0, 10.0, 12)
        assert fit_exponential_rate(times, np.exp(-0.3 * times)).slope == pytest.approx(-0.3)

    def test_too_few_samples(self):
        with pytest.raises(DegenerateDataError, match="at least"):
            fit_power_law([1.0, 2.0, 3.0], [1.0, 0.5, 0.3])

    def test_zero_values(self):
        with pytest.raises(DegenerateDataError, match="strictly positive"):
            fit_power_law(np.arange(10.0), np.zeros(10))

    def test_decay_exponent_from_log(self):
        log = TrajectoryLog()
        for t in np.linspace(0.0, 20.0, 21):
            log.record(float(t), {"u_L2": float((1 + t) ** -0.25)})
        exponent, stderr = fit_decay_exponent(log, NormSpec(), (0.0, 20.0))
        assert exponent == pytest.approx(-0.25)
        assert stderr == pytest.approx(0.0, abs=1e-10)
        with pytest.raises(DegenerateDataError, match="no samples"):
            fit_decay_exponent(log, NormSpec(order=1), (0.0, 20.0))


class TestPredictedPower:
    @pytest.mark.parametrize(
        ("kernel", "alpha", "ell", "expected"),
        [
            ("K1", 0.0, 0, Fraction(-1, 4)),
            ("K0", 0.0, 0, Fraction(-3, 4)),
            ("K1", 1.0, 0, Fraction(-3, 4)),
            ("K1", 0.0, 1, Fraction(-3, 4)),
        ],
    )
    def test_low_band(self, kernel, alpha, ell, expected):
        assert predicted_power(kernel, "L", 2.0, 1.0, alpha, ell) == expected

    def test_other_bands_are_exponential(self):
        assert predicted_power("K0", "M", 2.0, 1.0, 0.0, 0) is None
        assert predicted_power("Q", "L", 2.0, 1.0, 2.0, 0) is None

    @pytest.mark.parametrize(
        ("kernel", "band", "p", "q", "alpha"),
        [
            ("K1", "L", 1.0, 1.0, 0.0),
            ("K1", "L", math.inf, math.inf, 0.0),
            ("K0", "L", 1.5, 2.0, 0.0),
            ("K1", "H", math.inf, 1.0, 0.0),
            ("Q", "L", 2.0, 1.0, 0.0),
            ("Q", "L", 1.5, 1.0, 1.0),
            ("Q", "H", 2.0, 1.0, 4.0),
        ],
    )
    def test_outside_estimates(self, kernel, band, p, q, alpha):
        with pytest.raises(DomainError):
            predicted_power(kernel, band, p, q, alpha, 0)


class TestKernelProbes:
    @pytest.fixture
    def masks(self, params, grid16):
        return cutoff_masks(grid16, *default_cutoffs(params))

    @pytest.fixture
    def data(self, grid16, rng):
        return smooth_field(grid16, rng)

    def test_middle_band_decays_exponentially(self, params, data, masks):
        report = probe_kernel_estimate(params, data, masks, kernel="K0", band="M", p=2.0, q=1.0, times=np.linspace(1.0, 20.0, 12))
        assert report.kind == "exponential"
        assert report.verdict is Verdict.PASS
        assert report.measured < 0
        assert len(report.rows) == 12

    def test_empty_high_band_is_degenerate(self, params, data, masks):
        report = probe_kernel_estimate(params, data, masks, kernel="Q", band="H", p=2.0, q=1.0, quadrature_nodes=5)
        assert report.kind == "integrated"
        assert report.verdict is Verdict.DEGENERATE

    def test_coarse_low_band_has_no_leading_term_modes(self, params, data, masks):
        report = probe_kernel_estimate(params, data, masks, kernel="Q", band="L", p=2.0, q=1.0, alpha=2.0, quadrature_nodes=5)
        assert report.verdict is Verdict.DEGENERATE

    def test_too_few_times_is_degenerate(self, params, data, masks):
        report = probe_kernel_estimate(params, data, masks, kernel="K1", band="L", p=2.0, q=1.0, times=[5.0, 10.0])
        assert report.verdict is Verdict.DEGENERATE
        assert report.predicted == pytest.approx(-0.25)


class TestPeriodIntegralOfQ:
    """One-period integral of the periodic kernel against its low-frequency leading term."""

    @pytest.fixture
    def wide_grid(self):
        # spacing 1/32 puts several lattice modes below the leading-term radius
        return make_grid(64 * math.pi, 16)

    @pytest.fixture
    def masks(self, params, wide_grid):
        return cutoff_masks(wide_grid, *default_cutoffs(params))

    @pytest.fixture
    def data(self, wide_grid, rng):
        return smooth_field(wide_grid, rng)

    def test_leading_radius(self, params):
        assert q_leading_radius(params, 1.0) == pytest.approx(0.1)
        assert q_leading_radius(params, 2.0) == pytest.approx(0.05)

    def test_leading_integral_inverts_the_static_operator(self, params, wide_grid):
        coeffs = np.zeros((3, *wide_grid.spectral_shape), dtype=complex)
        coeffs[0, 1, 0, 0] = 1.0
        coeffs[0, 0, 2, 0] = 1.0
        result = q_leading_integral(params, SpectralField(wide_grid, coeffs))
        xi_x = wide_grid.xi_sq[1, 0, 0]
        xi_y = wide_grid.xi_sq[0, 2, 0]
        # x-polarized: longitudinal on the x mode, transverse on the y mode
        assert result.coeffs[0, 1, 0, 0] == pytest.approx(1.0 / (params.branch_speeds_sq[0] * xi_x))
        assert result.coeffs[0, 0, 2, 0] == pytest.approx(1.0 / (params.branch_speeds_sq[1] * xi_y))

    def test_zero_mode_maps_to_zero(self, params, wide_grid):
        coeffs = np.zeros((3, *wide_grid.spectral_shape), dtype=complex)
        coeffs[:, 0, 0, 0] = 1.0
        assert not np.any(q_leading_integral(params, SpectralField(wide_grid, coeffs)).coeffs)

    @pytest.mark.parametrize("p", [2.0, 4.0])
    def test_low_band_matches_leading_term(self, params, data, masks, p):
        report = probe_kernel_estimate(params, data, masks, kernel="Q", band="L", p=p, q=1.0, alpha=2.0, quadrature_nodes=9)
        assert report.kind == "integrated"
        assert report.verdict is Verdict.PASS
        assert report.measured == pytest.approx(report.predicted, rel=0.01)
        assert report.spread < 0.01
        assert len(report.rows) == 9

    def test_wrong_leading_term_fails(self, params, data, masks, mocker):
        exact = q_leading_integral
        mocker.patch("elastoperiodic.analysis.q_leading_integral", side_effect=lambda p, field: exact(p, field) * 2.0)
        report = probe_kernel_estimate(params, data, masks, kernel="Q", band="L", p=2.0, q=1.0, alpha=2.0, quadrature_nodes=9)
        assert report.verdict is Verdict.FAIL
        assert report.spread == pytest.approx(0.5, abs=0.01)

    def test_time_derivative_is_report_only(self, params, data, masks):
        report = probe_kernel_estimate(params, data, masks, kernel="Q", band="L", p=2.0, q=1.0, alpha=1.0, ell=1, quadrature_nodes=9)
        assert report.verdict is Verdict.REPORT_ONLY
        assert report.predicted is None
        assert report.measured > 0


class TestRegularity:
    def test_p0_star(self):
        assert p0_star(2.5) == pytest.approx(15.0)
        assert math.isinf(p0_star(3.0))

    def test_zero_solution_table(self, grid16):
        rows = probe_regularity(PeriodicSolution.zeros(grid16, 1.0, 8), p0=2.5, forcing_norm=0.0, amplitude=0.0)
        assert len(rows) == 9
        assert {row.order for row in rows} == {1, 2, 3}
        assert all(row.value == 0.0 and row.ratio == 0.0 for row in rows)

    def test_custom_request(self, grid16, rng):
        shape = (9, 3, *grid16.spectral_shape)
        u = np.stack([smooth_field(grid16, rng).coeffs for _ in range(9)])
        solution = PeriodicSolution(grid16, 1.0, u, np.zeros(shape, dtype=complex))
        rows = probe_regularity(solution, {1: (2.0,)}, p0=2.5, forcing_norm=2.0, amplitude=1.0)
        expected = max(norm(SpectralField(grid16, u[m]), NormSpec(order=1)) for m in range(8))
        assert rows[0].value == pytest.approx(expected)
        assert rows[0].ratio == pytest.approx(expected / 2.0)

    @pytest.mark.parametrize(("order", "p", "p0"), [(1, 1.5, 2.5), (2, 20.0, 2.5), (3, 3.0, 2.5), (4, 2.0, 2.5), (1, 2.0, 1.5)])
    def test_outside_range(self, grid16, order, p, p0):
        with pytest.raises(DomainError):
            probe_regularity(PeriodicSolution.zeros(grid16, 1.0, 8), {order: (p,)}, p0=p0, forcing_norm=1.0, amplitude=1.0)
