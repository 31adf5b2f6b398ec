"""Scenario registry: id → ``run(config, artifacts, rng) -> passed``."""

from __future__ import annotations

from typing import TYPE_CHECKING

from elastoperiodic.scenarios import probe, simulate, solve, symbols_suite

if TYPE_CHECKING:
    from collections.abc import Callable

    import numpy as np

    from elastoperiodic.config import RunConfig
    from elastoperiodic.runner import ArtifactWriter

    type Scenario = Callable[[RunConfig, ArtifactWriter, np.random.Generator], bool]

SCENARIOS: dict[str, Scenario] = {
    "verify-symbols": symbols_suite.run,
    "solve-periodic": solve.run,
    "simulate-cauchy": simulate.run_cauchy,
    "measure-decay": simulate.run_decay,
    "probe-kernels": probe.run_kernels,
    "probe-regularity": probe.run_regularity,
}
