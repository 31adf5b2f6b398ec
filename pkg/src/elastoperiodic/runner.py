"""Scenario dispatch, artifact bookkeeping and exit codes."""

from __future__ import annotations

import csv
import hashlib
import json
import logging
from datetime import UTC, datetime
from importlib.metadata import PackageNotFoundError, version
from pathlib import Path
from typing import TYPE_CHECKING, Any

import numpy as np
import scipy.fft

from elastoperiodic import spectral
from elastoperiodic.errors import ConfigurationError, ElastoperiodicError, GridMismatchError, UnknownScenarioError
from elastoperiodic.models import ErrorReport, ManifestEntry, RunManifest
from elastoperiodic.scenarios import SCENARIOS

if TYPE_CHECKING:
    from collections.abc import Iterable, Sequence

    from pydantic import BaseModel

    from elastoperiodic.config import RunConfig
    from elastoperiodic.spectral import SpectralField

logger = logging.getLogger(__name__)

EXIT_OK = 0
EXIT_FAILED_CHECK = 1
EXIT_CONFIG = 2
EXIT_NUMERICAL = 3

_VERSIONED_PACKAGES = ("elastoperiodic", "numpy", "scipy", "pydantic", "pydantic-settings")


class ArtifactWriter:
    """Writes scenario outputs under one directory and remembers every file."""

    def __init__(self, directory: Path) -> None:
        self.directory = directory
        self.files: list[Path] = []

    def _target(self, name: str) -> Path:
        path = self.directory / name
        path.parent.mkdir(parents=True, exist_ok=True)
        self.files.append(path)
        return path

    def write_json(self, name: str, model: BaseModel) -> Path:
        path = self._target(name)
        path.write_text(model.model_dump_json(indent=2) + "\n", encoding="utf-8")
        logger.info("Wrote %s", path)
        return path

    def write_json_list(self, name: str, models: Sequence[BaseModel]) -> Path:
        path = self._target(name)
        payload = [model.model_dump(mode="json") for model in models]
        path.write_text(json.dumps(payload, indent=2) + "\n", encoding="utf-8")
        logger.info("Wrote %s", path)
        return path

    def write_csv(self, name: str, header: Sequence[str], rows: Iterable[Sequence[Any]]) -> Path:
        path = self._target(name)
        with path.open("w", newline="", encoding="utf-8") as handle:
            writer = csv.writer(handle)
            writer.writerow(header)
            writer.writerows([_cell(value) for value in row] for row in rows)
        logger.info("Wrote %s", path)
        return path

    def write_snapshot(self, name: str, field: SpectralField) -> Path:
        return spectral.write_snapshot(self._target(name), field)

    def adopt(self, paths: Iterable[Path]) -> None:
        """Register files written elsewhere (e.g. trajectory snapshots)."""
        self.files.extend(paths)


def _cell(value: Any) -> Any:
    # repr keeps every digit so reruns are byte-identical
    if isinstance(value, float | np.floating):
        return repr(float(value))
    return "" if value is None else value


def config_hash(config: RunConfig) -> str:
    canonical = json.dumps(config.model_dump(mode="json"), sort_keys=True, separators=(",", ":"))
    return hashlib.sha256(canonical.encode()).hexdigest()


def package_versions() -> dict[str, str]:
    versions = {}
    for name in _VERSIONED_PACKAGES:
        try:
            versions[name] = version(name)
        except PackageNotFoundError:
            versions[name] = "unknown"
    return versions


def _sha256(path: Path) -> str:
    return hashlib.sha256(path.read_bytes()).hexdigest()


def _jsonable(value: Any) -> Any:
    if isinstance(value, str | int | float | bool) or value is None:
        return value
    if isinstance(value, list | tuple):
        return [_jsonable(item) for item in value]
    return repr(value)


def exit_code_for(exc: BaseException) -> int:
    if isinstance(exc, ConfigurationError | UnknownScenarioError | GridMismatchError):
        return EXIT_CONFIG
    return EXIT_NUMERICAL


def write_error(directory: Path, exc: BaseException, code: int) -> Path:
    report = ErrorReport(
        error_type=type(exc).__name__,
        message=str(exc),
        exit_code=code,
        details={key: _jsonable(value) for key, value in vars(exc).items()},
    )
    path = directory / "error.json"
    path.parent.mkdir(parents=True, exist_ok=True)
    path.write_text(report.model_dump_json(indent=2) + "\n", encoding="utf-8")
    return path


def write_manifest(config: RunConfig, artifacts: ArtifactWriter, code: int) -> Path:
    entries = [
        ManifestEntry(path=path.relative_to(artifacts.directory).as_posix(), sha256=_sha256(path), size=path.stat().st_size)
        for path in dict.fromkeys(artifacts.files)
        if path.is_file()
    ]
    manifest = RunManifest(
        scenario=config.scenario,
        config_hash=config_hash(config),
        seed=config.seed,
        exit_code=code,
        created_at=datetime.now(UTC),
        versions=package_versions(),
        files=entries,
    )
    path = artifacts.directory / "manifest.json"
    path.write_text(manifest.model_dump_json(indent=2) + "\n", encoding="utf-8")
    return path


def run_scenario(config: RunConfig) -> int:
    """Run ``config.scenario`` and return the process exit status.

    0 success, 1 a scenario check failed, 2 configuration error or unknown
    scenario, 3 numerical failure.  Failures leave ``error.json`` next to the
    manifest.
    """
    artifacts = ArtifactWriter(config.output_dir)
    config.output_dir.mkdir(parents=True, exist_ok=True)
    try:
        scenario = SCENARIOS.get(config.scenario)
        if scenario is None:
            raise UnknownScenarioError(config.scenario, sorted(SCENARIOS))
        logger.info("Running %s into %s (workers=%d, seed=%d)", config.scenario, config.output_dir, config.workers, config.seed)
        with scipy.fft.set_workers(config.workers):
            passed = scenario(config, artifacts, np.random.default_rng(config.seed))
        code = EXIT_OK if passed else EXIT_FAILED_CHECK
    except ElastoperiodicError as exc:
        code = exit_code_for(exc)
        logger.error("%s failed: %s", config.scenario, exc)  # noqa: TRY400
        artifacts.adopt([write_error(config.output_dir, exc, code)])
    if code == EXIT_FAILED_CHECK:
        logger.warning("%s finished with failed checks", config.scenario)
    write_manifest(config, artifacts, code)
    return code


def record_config_failure(scenario: str, directory: Path, exc: ConfigurationError) -> int:
    """error.json plus a manifest for a run whose configuration never loaded.

    The manifest hashes the default configuration since no valid one exists.
    """
    from elastoperiodic.config import RunConfig  # noqa: PLC0415

    artifacts = ArtifactWriter(directory)
    artifacts.adopt([write_error(directory, exc, EXIT_CONFIG)])
    write_manifest(RunConfig(scenario=scenario, output_dir=directory), artifacts, EXIT_CONFIG)
    return EXIT_CONFIG
