"""Global test fixtures for elastoperiodic."""

from __future__ import annotations

import math
import os

import numpy as np
import pytest

from elastoperiodic import cache
from elastoperiodic.config import ENV_PREFIX
from elastoperiodic.spectral import make_grid
from elastoperiodic.symbols import ElasticParams


@pytest.fixture(autouse=True)
def _clean_state(monkeypatch: pytest.MonkeyPatch):
    """Empty the operator memo and hide EPW_* variables from the developer's shell."""
    for key in [k for k in os.environ if k.startswith(ENV_PREFIX)]:
        monkeypatch.delenv(key)
    cache.clear()
    yield
    cache.clear()


@pytest.fixture
def params() -> ElasticParams:
    return ElasticParams()


@pytest.fixture
def grid16():
    """16³ box of side 8π: lattice spacing 1/4, largest |k_i| = 8."""
    return make_grid(8 * math.pi, 16)


@pytest.fixture
def rng() -> np.random.Generator:
    return np.random.default_rng(20240611)
