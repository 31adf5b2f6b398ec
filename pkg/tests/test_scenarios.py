"""Tests for the scenario implementations on small grids."""

from __future__ import annotations

import json
import math

import numpy as np
import pytest

from elastoperiodic.analysis import NormSpec, NormTarget
from elastoperiodic.cauchy import TrajectoryLog
from elastoperiodic.config import RunConfig
from elastoperiodic.models import IterationRecord, RegularityRow, Verdict
from elastoperiodic.periodic import CONTRACTION_TARGET, PeriodicSolution
from elastoperiodic.runner import ArtifactWriter
from elastoperiodic.scenarios import probe, simulate, solve, symbols_suite


@pytest.fixture
def small_config(tmp_path) -> RunConfig:
    return RunConfig.model_validate(
        {
            "output_dir": str(tmp_path),
            "grid": {"L": 8 * math.pi, "N": 16},
            "forcing": {"profile": {"width": 2.0}},
            "solver": {"n_t": 8, "max_iter": 30, "snapshot_stride": 4, "dt": 0.1},
            "perturbation": {"t_end": 1.0, "sample_every": 1, "window": [0.0, 1.0]},
            "probes": {"t_start": 1.0, "t_stop": 20.0, "t_count": 8, "band_count": 8},
        }
    )


@pytest.fixture
def artifacts(tmp_path) -> ArtifactWriter:
    return ArtifactWriter(tmp_path)


def _log(values, times=None) -> TrajectoryLog:
    log = TrajectoryLog()
    for t in np.linspace(0.0, 20.0, 21) if times is None else times:
        log.record(float(t), {label: float(fn(t)) for label, fn in values.items()})
    return log


class TestSymbolChecks:
    def test_checks_pass_on_small_samples(self, params, rng):
        wide = symbols_suite.random_frequencies(rng, 40, 1e-6, 1e6)
        moderate = np.concatenate([
            symbols_suite.random_frequencies(rng, 20, 1e-2, 10.0),
            symbols_suite.confluence_frequencies(params, rng),
        ])
        checks = [
            symbols_suite.check_vieta(params, wide),
            *symbols_suite.check_projectors(params, wide),
            *symbols_suite.check_propagator(params, moderate, rng.uniform(0.0, 10.0, len(moderate))),
            *symbols_suite.check_resolvent_and_q(params, moderate, rng.uniform(-1.0, 1.0, len(moderate)), 1.0),
        ]
        failed = [check.name for check in checks if not check.passed]
        assert not failed

    def test_asymptotics_and_limits(self, params):
        checks = [*symbols_suite.check_root_asymptotics(params), *symbols_suite.check_limits(params, 1.0)]
        assert all(check.passed for check in checks), [(c.name, c.max_violation) for c in checks]

    def test_confluence_frequencies(self, params, rng):
        frequencies = symbols_suite.confluence_frequencies(params, rng)
        radii = np.linalg.norm(frequencies, axis=1)
        assert len(frequencies) == 2 * len(symbols_suite.CONFLUENCE_OFFSETS)
        assert radii[0] == pytest.approx(params.confluence_radii[0])

    def test_random_frequencies_range(self, rng):
        radii = np.linalg.norm(symbols_suite.random_frequencies(rng, 200, 1e-3, 1e3), axis=1)
        assert radii.min() >= 1e-3
        assert radii.max() <= 1e3

    @pytest.mark.slow
    def test_full_suite(self, params, rng):
        report = symbols_suite.run_suite(params, rng)
        assert report.passed, [(c.name, c.max_violation) for c in report.checks if not c.passed]


class TestSolveHelpers:
    @pytest.mark.parametrize(("ratios", "expected"), [([1.0, 1.05], 0.05), ([0.0, 2.0], 0.0), ([], 0.0), ([2.0, 1.0, 1.5], 1.0)])
    def test_constant_spread(self, ratios, expected):
        assert solve.constant_spread(ratios) == pytest.approx(expected)

    def test_worst_ratio_covers_every_iteration(self, grid16):
        records = (
            IterationRecord(iteration=1, residual=1.0, ratio=None),
            IterationRecord(iteration=2, residual=0.1, ratio=0.1),
            IterationRecord(iteration=3, residual=0.04, ratio=0.4),
            IterationRecord(iteration=4, residual=0.002, ratio=0.05),
        )
        solution = PeriodicSolution.zeros(grid16, 1.0, 8).with_iterations(records)
        assert solve.first_ratio(solution) == pytest.approx(0.1)
        assert solve.worst_ratio(solution) == pytest.approx(0.4)
        assert solve.worst_ratio(solution.with_iterations(records[:1])) is None

    def test_solve_scenario(self, small_config, artifacts, tmp_path):
        solve.run(small_config, artifacts, np.random.default_rng(0))
        report = json.loads((tmp_path / "solve_report.json").read_text(encoding="utf-8"))
        assert report["converged"] is True
        assert report["calibrated_amplitude"] <= small_config.forcing.amplitude
        assert [record["factor"] for record in report["amplitudes"]] == [1.0, 0.5]
        assert report["periodicity_defect"] <= solve.PERIODICITY_TOLERANCE
        assert all(record["worst_ratio"] < CONTRACTION_TARGET for record in report["amplitudes"])
        assert (tmp_path / "iterations.csv").is_file()
        assert sorted(p.name for p in (tmp_path / "snapshots").iterdir()) == ["u_per_0000.epwf", "u_per_0004.epwf"]


class TestCompareFit:
    def test_pass(self):
        spec = NormSpec(order=3, p=2.0)
        log = _log({spec.label: lambda t: (1 + t) ** -1.75})
        fit = simulate.compare_fit(log, spec, (0.0, 20.0), horizon=100.0, tolerance=0.3)
        assert fit.verdict is Verdict.PASS
        assert fit.exponent == pytest.approx(-1.75)
        assert fit.alternate_target is None
        assert fit.samples == 21

    def test_fail(self):
        spec = NormSpec(order=3, p=2.0)
        log = _log({spec.label: lambda t: (1 + t) ** -0.5})
        assert simulate.compare_fit(log, spec, (0.0, 20.0), horizon=100.0, tolerance=0.3).verdict is Verdict.FAIL

    def test_gradient_is_report_only(self):
        spec = NormSpec(order=1, p=2.0)
        log = _log({spec.label: lambda t: (1 + t) ** -0.75})
        fit = simulate.compare_fit(log, spec, (0.0, 20.0), horizon=100.0, tolerance=0.3)
        assert fit.verdict is Verdict.REPORT_ONLY
        assert fit.target == pytest.approx(-0.75)
        assert fit.alternate_target == pytest.approx(-0.25)

    def test_window_past_horizon(self):
        spec = NormSpec(target=NormTarget.V, p=2.0)
        log = _log({spec.label: lambda t: (1 + t) ** -0.75})
        fit = simulate.compare_fit(log, spec, (0.0, 20.0), horizon=10.0, tolerance=0.3)
        assert fit.verdict is Verdict.WINDOW_TRUNCATED
        assert fit.samples == 11

    def test_missing_norm_is_degenerate(self):
        fit = simulate.compare_fit(_log({}), NormSpec(order=3, p=2.5), (0.0, 20.0), horizon=100.0, tolerance=0.3)
        assert fit.verdict is Verdict.DEGENERATE
        assert fit.exponent is None


class TestSimulateScenarios:
    def test_cauchy(self, small_config, artifacts, tmp_path):
        assert simulate.run_cauchy(small_config, artifacts, np.random.default_rng(0)) is True
        summary = json.loads((tmp_path / "trajectory_summary.json").read_text(encoding="utf-8"))
        assert summary["samples"] == 11
        assert summary["snapshots"] == 11
        assert (tmp_path / "trajectory.csv").is_file()
        assert len(list((tmp_path / "trajectory").iterdir())) == 11

    def test_zero_perturbation_is_degenerate(self, small_config, artifacts, tmp_path):
        config = small_config.model_copy(update={"perturbation": small_config.perturbation.model_copy(update={"amplitude": 0.0})})
        assert simulate.run_decay(config, artifacts, np.random.default_rng(0)) is True
        report = json.loads((tmp_path / "decay_report.json").read_text(encoding="utf-8"))
        assert report["note"] == simulate.DEGENERATE_NOTE
        assert {fit["verdict"] for fit in report["fits"]} == {"degenerate"}
        assert len(report["fits"]) == 8

    def test_decay_report_checks_the_orbit(self, small_config, artifacts, tmp_path):
        simulate.run_decay(small_config, artifacts, np.random.default_rng(0))
        report = json.loads((tmp_path / "decay_report.json").read_text(encoding="utf-8"))
        assert report["orbit_tolerance"] == pytest.approx(simulate.ORBIT_TOLERANCE_FACTOR * small_config.solver.tol)
        assert 0.0 <= report["orbit_drift"] <= report["orbit_tolerance"]

    def test_orbit_drift_of_converged_solution(self, small_config):
        base = solve.solve_base(small_config)
        assert simulate.orbit_drift(small_config, base.solution) <= simulate.ORBIT_TOLERANCE_FACTOR * small_config.solver.tol


class TestProbeScenarios:
    def test_middle_band_probe(self, small_config):
        reports = probe.run_probes(small_config, [probe.ProbeCase("K0", "M", 2.0, 1.0)])
        assert [report.verdict for report in reports] == [Verdict.PASS]

    def test_probe_times(self, small_config):
        power, band = probe.kernel_probe_times(small_config)
        assert power[0] == pytest.approx(1.0)
        assert power[-1] == pytest.approx(20.0)
        assert len(band) == 8

    def test_regularity_spread_groups_by_entry(self):
        rows = [
            RegularityRow(order=1, p="2", amplitude=1.0, value=1.0, forcing_norm=1.0, ratio=1.0),
            RegularityRow(order=1, p="2", amplitude=0.5, value=0.55, forcing_norm=0.5, ratio=1.1),
            RegularityRow(order=2, p="2", amplitude=1.0, value=3.0, forcing_norm=1.0, ratio=3.0),
        ]
        assert probe.regularity_spread(rows) == pytest.approx(0.1)

    def test_regularity_scenario(self, small_config, artifacts, tmp_path):
        probe.run_regularity(small_config, artifacts, np.random.default_rng(0))
        report = json.loads((tmp_path / "regularity_report.json").read_text(encoding="utf-8"))
        assert report["p0_star"] == "15"
        assert len(report["rows"]) == 18
        assert all(math.isfinite(row["value"]) for row in report["rows"])
