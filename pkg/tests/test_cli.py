"""Tests for the CLI module."""

from __future__ import annotations

import contextlib
import json
import logging
from typing import TYPE_CHECKING

import pytest

if TYPE_CHECKING:
    from pytest_mock import MockerFixture

from elastoperiodic import cli
from elastoperiodic.cli import _is_known_var, _truncate, check_config

_KNOWN = frozenset({"EPW_SOLVER", "EPW_PARAMS", "EPW_SEED"})


@pytest.fixture(autouse=True)
def _isolate_from_dotenv(monkeypatch: pytest.MonkeyPatch, tmp_path):
    """Prevent a local .env file from affecting CLI tests."""
    monkeypatch.chdir(tmp_path)


class TestIsKnownVar:
    def test_exact_match(self):
        assert _is_known_var("EPW_SEED", _KNOWN) is True

    def test_nested_match(self):
        assert _is_known_var("EPW_SOLVER__TOL", _KNOWN) is True

    def test_unknown(self):
        assert _is_known_var("EPW_TYPO", _KNOWN) is False

    def test_partial_prefix_not_matched(self):
        assert _is_known_var("EPW_SOLVERS", _KNOWN) is False


class TestTruncate:
    def test_short_value(self):
        assert _truncate("1e-9") == "1e-9"

    def test_long_value_truncated(self):
        result = _truncate("x" * 100)
        assert len(result) == 80
        assert result.endswith("...")


class TestCheckConfig:
    def test_runs_without_error(self, capsys):
        check_config()
        captured = capsys.readouterr()
        assert "elastoperiodic check-config" in captured.out
        assert "No EPW_* environment variables set." in captured.out
        assert "N=64" in captured.out

    def test_detects_unrecognized_vars(self, monkeypatch, capsys):
        monkeypatch.setenv("EPW_TYPO_VAR", "oops")
        monkeypatch.setenv("EPW_SOLVER__TOL", "1e-9")
        check_config()
        captured = capsys.readouterr()
        assert "UNRECOGNIZED" in captured.out
        assert "tol=1e-09" in captured.out

    def test_detects_unrecognized_dotenv_vars(self, tmp_path, capsys):
        (tmp_path / ".env").write_text("EPW_SOLVR__TOL=1\n", encoding="utf-8")
        with contextlib.suppress(SystemExit):
            check_config()
        assert "possible typo" in capsys.readouterr().out

    def test_invalid_file_exits_with_config_code(self, tmp_path, capsys):
        path = tmp_path / "bad.toml"
        path.write_text("[grid]\nN = 7\n", encoding="utf-8")
        with pytest.raises(SystemExit) as excinfo:
            check_config(path)
        assert excinfo.value.code == 2
        assert "Configuration error" in capsys.readouterr().out


class TestCommands:
    @pytest.fixture(autouse=True)
    def _reset_logger(self):
        yield
        cli.logger.handlers.clear()
        cli.logger.setLevel(logging.NOTSET)

    def test_config_error_leaves_error_json(self, tmp_path):
        bad = tmp_path / "bad.toml"
        bad.write_text("[grid]\nN = 7\n", encoding="utf-8")
        out = tmp_path / "out"
        with pytest.raises(SystemExit) as excinfo:
            cli.solve_periodic(config=bad, out=out)
        assert excinfo.value.code == 2
        error = json.loads((out / "error.json").read_text(encoding="utf-8"))
        assert error["error_type"] == "ConfigurationError"
        manifest = json.loads((out / "manifest.json").read_text(encoding="utf-8"))
        assert manifest["scenario"] == "solve-periodic"
        assert manifest["exit_code"] == 2

    def test_dispatches_scenario(self, tmp_path, mocker: MockerFixture):
        run = mocker.patch("elastoperiodic.cli.run_scenario", return_value=0)
        with pytest.raises(SystemExit) as excinfo:
            cli.probe_kernels(out=tmp_path / "out", seed=4, workers=2)
        assert excinfo.value.code == 0
        config = run.call_args.args[0]
        assert (config.scenario, config.seed, config.workers) == ("probe-kernels", 4, 2)

    def test_verbose_sets_debug(self):
        cli.configure_logging(verbose=True)
        cli.configure_logging(verbose=True)
        assert cli.logger.level == logging.DEBUG
        assert sum(type(h).__name__ == "RichHandler" for h in cli.logger.handlers) == 1
