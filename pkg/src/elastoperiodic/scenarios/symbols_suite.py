"""verify-symbols: identity and oracle checks of the per-frequency symbols."""

from __future__ import annotations

import logging
import math
from typing import TYPE_CHECKING

import numpy as np
import scipy.linalg
import scipy.stats

from elastoperiodic import symbols
from elastoperiodic.models import SymbolCheck, SymbolSuiteReport

if TYPE_CHECKING:
    from collections.abc import Callable, Iterable

    from numpy.typing import NDArray

    from elastoperiodic.config import RunConfig
    from elastoperiodic.runner import ArtifactWriter
    from elastoperiodic.symbols import ElasticParams

logger = logging.getLogger(__name__)

IDENTITY_SAMPLES = 1000
ORACLE_SAMPLES = 1000
CONFLUENCE_OFFSETS = (0.0, 1e-9, -1e-9, 1e-7, -1e-7, 1e-6, -1e-6)


def random_frequencies(rng: np.random.Generator, count: int, low: float, high: float) -> NDArray[np.float64]:
    """``count`` vectors with log-uniform |ξ| in [low, high] and uniform directions."""
    directions = rng.standard_normal((count, 3))
    directions /= np.linalg.norm(directions, axis=1, keepdims=True)
    radii = np.exp(rng.uniform(math.log(low), math.log(high), count))
    return directions * radii[:, None]


def confluence_frequencies(params: ElasticParams, rng: np.random.Generator) -> NDArray[np.float64]:
    """Frequencies at and within 1e-6 of both confluence radii."""
    out = []
    for radius in params.confluence_radii:
        for offset in CONFLUENCE_OFFSETS:
            direction = rng.standard_normal(3)
            out.append(direction / np.linalg.norm(direction) * radius * (1 + offset))
    return np.array(out)


def _relative(error: NDArray, scale: NDArray | float) -> float:
    return float(np.linalg.norm(error) / max(float(np.linalg.norm(scale)), np.finfo(float).tiny))


def _check(name: str, violations: Iterable[float], tolerance: float) -> SymbolCheck:
    values = list(violations)
    worst = max(values) if values else 0.0
    passed = bool(worst <= tolerance)
    log = logger.info if passed else logger.warning
    log("%s: max violation %.3e (tolerance %.1e, %d samples)", name, worst, tolerance, len(values))
    return SymbolCheck(name=name, samples=len(values), max_violation=worst, tolerance=tolerance, passed=passed)


# ---------------------------------------------------------------------------
# Checks
# ---------------------------------------------------------------------------


def check_vieta(params: ElasticParams, frequencies: NDArray[np.float64]) -> SymbolCheck:
    violations = []
    for xi in frequencies:
        s = float(xi @ xi)
        roots = symbols.char_roots(params, math.sqrt(s))
        for j, speed_sq in enumerate(params.branch_speeds_sq, start=1):
            plus, minus = roots.plus(j), roots.minus(j)
            scale = abs(plus) + abs(minus)
            violations.append(abs(plus + minus + params.nu * s) / scale)
            violations.append(abs(plus * minus - speed_sq * s) / (abs(plus) * abs(minus)))
    return _check("vieta", violations, 1e-12)


def check_projectors(params: ElasticParams, frequencies: NDArray[np.float64]) -> list[SymbolCheck]:
    idempotence, partition, annihilation, resolution = [], [], [], []
    identity = np.eye(6)
    for xi in frequencies:
        proj = symbols.projections(params, xi)
        nonzero = [p for p in proj.p if np.any(p)]
        scale = max(float(np.linalg.norm(p)) for p in nonzero)
        idempotence.extend(_relative(p @ p - p, p) for p in nonzero)
        partition.append(_relative(sum(proj.p) - identity, scale))
        annihilation.extend(
            float(np.linalg.norm(a @ b) / (np.linalg.norm(a) * np.linalg.norm(b)))
            for i, a in enumerate(nonzero)
            for k, b in enumerate(nonzero)
            if i != k
        )
        roots = symbols.char_roots(params, float(np.linalg.norm(xi)))
        sigmas = roots.sigma.reshape(-1)
        rebuilt = sum(sigma * p for sigma, p in zip(sigmas, proj.p, strict=True)) + proj.nilpotent
        symbol = symbols.assemble_symbol(params, xi).entries
        resolution.append(_relative(symbol - rebuilt, symbol))
    return [
        _check("projector-idempotence", idempotence, 1e-10),
        _check("projector-partition", partition, 1e-10),
        _check("projector-annihilation", annihilation, 1e-10),
        _check("spectral-resolution", resolution, 1e-8),
    ]


def check_propagator(params: ElasticParams, frequencies: NDArray[np.float64], times: NDArray[np.float64]) -> list[SymbolCheck]:
    oracle, semigroup, blocks = [], [], []
    for xi, t in zip(frequencies, times, strict=True):
        symbol = symbols.assemble_symbol(params, xi).entries
        reference = scipy.linalg.expm(t * symbol)
        computed = symbols.propagator(params, xi, t).entries
        oracle.append(_relative(computed - reference, reference))
        half = symbols.propagator(params, xi, t / 2).entries
        semigroup.append(_relative(half @ half - computed, computed))
        k0, k1 = symbols.kernel_blocks(params, xi, t)
        blocks.append(_relative(np.block([k0, k1]) - computed[:3], computed[:3]))
    return [
        _check("propagator-expm", oracle, 1e-8),
        _check("propagator-semigroup", semigroup, 1e-8),
        _check("kernel-blocks", blocks, 1e-10),
    ]


def check_resolvent_and_q(
    params: ElasticParams, frequencies: NDArray[np.float64], lags: NDArray[np.float64], period: float
) -> list[SymbolCheck]:
    resolvent, kernel = [], []
    identity = np.eye(6)
    for xi, t in zip(frequencies, lags, strict=True):
        symbol = symbols.assemble_symbol(params, xi).entries
        inverse = np.linalg.inv(identity - scipy.linalg.expm(period * symbol))
        computed = symbols.resolvent_factor(params, xi, period).entries
        resolvent.append(_relative(computed - inverse, inverse))
        reference = (scipy.linalg.expm((t + period) * symbol) @ inverse)[:3, 3:]
        kernel.append(_relative(symbols.q_symbol(params, xi, t, period) - reference, reference))
    return [_check("resolvent-inverse", resolvent, 1e-8), _check("q-composition", kernel, 1e-8)]


def _slope(radii: NDArray[np.float64], errors: Iterable[float]) -> float:
    return float(scipy.stats.linregress(np.log(radii), np.log(np.asarray(list(errors)))).slope)


def check_root_asymptotics(params: ElasticParams) -> list[SymbolCheck]:
    """Remainders of the small- and large-|ξ| root expansions and their orders."""
    small = np.geomspace(1e-4, 1e-2, 21)
    large = np.geomspace(1e1, 1e3, 21)
    low, high, bounded = [], [], []
    for j, speed_sq in enumerate(params.branch_speeds_sq, start=1):
        speed = math.sqrt(speed_sq)
        low.append(abs(_slope(small, (abs(symbols.char_roots(params, r).plus(j) - 1j * speed * r) for r in small)) - 2))
        high.append(abs(_slope(large, (abs(symbols.char_roots(params, r).plus(j) + speed_sq / params.nu) for r in large)) + 2))
        bounded.extend(
            abs(symbols.char_roots(params, r).minus(j) + params.nu * r * r) / (2 * speed_sq / params.nu) for r in large
        )
    return [
        _check("low-frequency-root-order", low, 0.1),
        _check("high-frequency-root-order", high, 0.1),
        _check("high-frequency-fast-root-bounded", bounded, 1.0),
    ]


def check_limits(params: ElasticParams, period: float) -> list[SymbolCheck]:
    """Leading terms of Q̂ and the resolvent at small and large |ξ|."""
    direction = np.array([1.0, 2.0, 2.0]) / 3
    r1, r2 = symbols.riesz_projections(direction)
    low_q, high_q, low_resolvent = [], [], []
    for r in (1e-3, 2e-3, 5e-3):
        xi = direction * r
        leading = sum(riesz / (speed_sq * r * r * period) for speed_sq, riesz in zip(params.branch_speeds_sq, (r1, r2), strict=True))
        low_q.append(_relative(symbols.q_symbol(params, xi, 0.0, period) - leading, leading))
        upper_right = symbols.resolvent_factor(params, xi, period).entries[:3, 3:]
        rtilde = symbols.projections(params, xi).rtilde
        low_resolvent.append(_relative(upper_right - rtilde / (period * r * r), rtilde / (period * r * r)))
    for r in (1e3, 2e3, 5e3):
        xi = direction * r
        leading = np.zeros((3, 3))
        for speed_sq, riesz in zip(params.branch_speeds_sq, (r1, r2), strict=True):
            decay = math.exp(-speed_sq * period / params.nu)
            leading = leading + decay / (params.nu * r * r * (1 - decay)) * riesz
        high_q.append(_relative(symbols.q_symbol(params, xi, 0.0, period) - leading, leading))
    return [
        _check("q-low-frequency-leading-term", low_q, 1e-4),
        _check("q-high-frequency-leading-term", high_q, 1e-4),
        _check("resolvent-low-frequency-leading-term", low_resolvent, 1e-4),
    ]


def run_suite(params: ElasticParams, rng: np.random.Generator, *, period: float = 1.0) -> SymbolSuiteReport:
    """Every check of the suite on freshly drawn samples."""
    wide = random_frequencies(rng, IDENTITY_SAMPLES, 1e-6, 1e6)
    moderate = np.concatenate([random_frequencies(rng, ORACLE_SAMPLES, 1e-2, 10.0), confluence_frequencies(params, rng)])
    times = rng.uniform(0.0, 10.0, len(moderate))
    lags = rng.uniform(-period, period, len(moderate))
    suites: list[Callable[[], SymbolCheck | list[SymbolCheck]]] = [
        lambda: check_vieta(params, wide),
        lambda: check_projectors(params, wide),
        lambda: check_propagator(params, moderate, times),
        lambda: check_resolvent_and_q(params, moderate, lags, period),
        lambda: check_root_asymptotics(params),
        lambda: check_limits(params, period),
    ]
    checks: list[SymbolCheck] = []
    for suite in suites:
        result = suite()
        checks.extend(result if isinstance(result, list) else [result])
    worst = max(check.max_violation / check.tolerance for check in checks)
    return SymbolSuiteReport(checks=checks, max_violation=worst, passed=all(check.passed for check in checks))


def run(config: RunConfig, artifacts: ArtifactWriter, rng: np.random.Generator) -> bool:
    report = run_suite(config.params, rng, period=config.forcing.T)
    artifacts.write_json("symbol_checks.json", report)
    artifacts.write_csv(
        "symbol_checks.csv",
        ("name", "samples", "max_violation", "tolerance", "passed"),
        ((c.name, c.samples, c.max_violation, c.tolerance, c.passed) for c in report.checks),
    )
    return report.passed
