"""Tests for the configuration system."""

from __future__ import annotations

import math

import pytest

from elastoperiodic.config import RunConfig, known_env_prefixes, load_config
from elastoperiodic.errors import ConfigurationError
from elastoperiodic.periodic import WaveformKind


@pytest.fixture(autouse=True)
def _isolate_from_dotenv(monkeypatch: pytest.MonkeyPatch, tmp_path):
    """Prevent a local .env file from contaminating config tests."""
    monkeypatch.chdir(tmp_path)


def _write(tmp_path, text: str):
    path = tmp_path / "run.toml"
    path.write_text(text, encoding="utf-8")
    return path


class TestRunConfig:
    def test_defaults(self):
        config = RunConfig()
        assert config.scenario == "verify-symbols"
        assert (config.grid.N, config.grid.L) == (64, pytest.approx(64 * math.pi))
        assert config.time_step() == pytest.approx(1 / 256)
        assert config.solver.amplitude_factors == [1.0, 0.5]

    def test_direction_normalized(self):
        config = RunConfig.model_validate({"forcing": {"direction": [3.0, 4.0, 0.0]}})
        assert config.forcing.direction == pytest.approx((0.6, 0.8, 0.0))

    def test_default_cutoffs(self):
        c0, c1 = RunConfig().cutoffs()
        assert c0 == pytest.approx(1.0)
        assert c1 == pytest.approx(4 * math.sqrt(2))

    def test_partial_cutoff_override_checked(self):
        config = RunConfig.model_validate({"solver": {"c0": 50.0}})
        with pytest.raises(ConfigurationError, match="c0 < c1"):
            config.cutoffs()

    def test_default_form(self):
        assert len(RunConfig().quadratic_form().entries) == 27

    def test_custom_form(self):
        config = RunConfig.model_validate({"form": [[1, 1, 1, 1, 1, 1, 2.0]]})
        assert config.quadratic_form().entries[0].weight == 2.0


class TestLoadConfig:
    def test_defaults_without_file(self):
        assert load_config().grid.N == 64

    def test_toml(self, tmp_path):
        path = _write(
            tmp_path,
            """
scenario = "solve-periodic"

[params]
mu = 2.0
lambda = 0.5

[grid]
N = 32

[forcing]
T = 2.0

[forcing.waveform]
kind = "fourier"
coefficients = [[0.0, 1.0], [0.5, 0.0]]
""",
        )
        config = load_config(path)
        assert config.scenario == "solve-periodic"
        assert config.params.lam == 0.5
        assert config.grid.N == 32
        assert config.forcing.T == 2.0
        assert config.forcing.waveform.kind is WaveformKind.FOURIER
        assert config.time_step() == pytest.approx(2.0 / 256)

    def test_env_overrides_file(self, tmp_path, monkeypatch: pytest.MonkeyPatch):
        path = _write(tmp_path, "[solver]\ntol = 1e-9\n")
        monkeypatch.setenv("EPW_SOLVER__TOL", "1e-8")
        assert load_config(path).solver.tol == pytest.approx(1e-8)

    def test_lambda_from_env(self, monkeypatch: pytest.MonkeyPatch):
        monkeypatch.setenv("EPW_PARAMS__LAMBDA", "0.25")
        assert load_config().params.lam == pytest.approx(0.25)

    def test_dotenv(self, tmp_path):
        (tmp_path / ".env").write_text("EPW_SEED=7\n", encoding="utf-8")
        assert load_config().seed == 7

    def test_overrides_win(self, tmp_path, monkeypatch: pytest.MonkeyPatch):
        monkeypatch.setenv("EPW_SEED", "3")
        config = load_config(None, scenario="probe-kernels", output_dir=tmp_path / "out", seed=11, workers=None)
        assert (config.scenario, config.seed, config.workers) == ("probe-kernels", 11, 1)
        assert config.output_dir == tmp_path / "out"

    def test_missing_file(self, tmp_path):
        with pytest.raises(ConfigurationError, match="not found"):
            load_config(tmp_path / "absent.toml")

    @pytest.mark.parametrize(
        "text",
        [
            "[grid]\nM = 3\n",
            "[grid]\nN = 33\n",
            "[params]\nmu = -1.0\n",
            "[solver]\nc0 = 2.0\nc1 = 1.0\n",
            "[forcing.profile]\nkind = 'snapshot'\n",
            "[forcing.waveform]\nkind = 'fourier'\n",
            "[perturbation]\nwindow = [10.0, 5.0]\n",
            "form = [[1, 1, 1]]\n",
        ],
    )
    def test_invalid(self, tmp_path, text):
        with pytest.raises(ConfigurationError, match="invalid configuration"):
            load_config(_write(tmp_path, text))

    def test_unknown_env_vars_ignored(self, monkeypatch: pytest.MonkeyPatch):
        monkeypatch.setenv("EPW_BOGUS_SETTING", "whatever")
        load_config()


class TestKnownEnvPrefixes:
    def test_sections(self):
        known = known_env_prefixes()
        assert {"EPW_SOLVER", "EPW_PARAMS", "EPW_GRID", "EPW_SEED"} <= known
        assert "EPW_BOGUS" not in known
