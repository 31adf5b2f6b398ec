"""Tests for the operator memo."""

from __future__ import annotations

from typing import TYPE_CHECKING

from elastoperiodic import cache
from elastoperiodic.operators import propagator_operator

if TYPE_CHECKING:
    from pytest_mock import MockerFixture


class TestMakeKey:
    def test_same_args_same_key(self):
        assert cache.make_key("propagator", {"mu": 1.0}, 0.5) == cache.make_key("propagator", {"mu": 1.0}, 0.5)

    def test_last_bit_of_float_distinguished(self):
        assert cache.make_key("propagator", 0.1) != cache.make_key("propagator", 0.1 + 2**-55)

    def test_different_kind_different_key(self):
        assert cache.make_key("propagator", 0.5) != cache.make_key("resolvent", 0.5)


class TestGetPut:
    def test_miss_returns_sentinel(self):
        assert cache.get("nonexistent") is cache._SENTINEL

    def test_put_then_get(self):
        cache.put("k1", {"table": 1})
        assert cache.get("k1") == {"table": 1}

    def test_cached_none_is_a_hit(self):
        cache.put("k1", None)
        assert cache.get("k1") is None

    def test_oldest_entry_evicted(self, mocker: MockerFixture):
        mocker.patch.object(cache, "_MAX_ENTRIES", 2)
        cache.put("k1", 1)
        cache.put("k2", 2)
        cache.put("k3", 3)
        assert cache.get("k1") is cache._SENTINEL
        assert cache.size() == 2

    def test_recent_use_protects_from_eviction(self, mocker: MockerFixture):
        mocker.patch.object(cache, "_MAX_ENTRIES", 2)
        cache.put("k1", 1)
        cache.put("k2", 2)
        cache.get("k1")
        cache.put("k3", 3)
        assert cache.get("k1") == 1
        assert cache.get("k2") is cache._SENTINEL


class TestClear:
    def test_clear_removes_all(self):
        cache.put("k1", "v1")
        cache.put("k2", "v2")
        assert cache.size() == 2
        cache.clear()
        assert cache.size() == 0

    def test_clear_empty_is_noop(self):
        cache.clear()
        assert cache.size() == 0


class TestOperatorMemo:
    def test_repeated_builds_share_the_table(self, params, grid16):
        first = propagator_operator(params, grid16, 0.25)
        second = propagator_operator(params, grid16, 0.25)
        assert first is second
        assert cache.size() == 1

    def test_different_times_build_new_tables(self, params, grid16):
        propagator_operator(params, grid16, 0.25)
        propagator_operator(params, grid16, 0.5)
        assert cache.size() == 2
