"""In-memory memo for per-grid symbol tables.

Picard sweeps and exponential time steps apply the same lattice operators
(propagator over one node spacing, the resolvent factor over one period,
Duhamel source columns) thousands of times.  Building a table costs a full
pass of complex exponentials over the mode lattice, so tables are memoized:

- Keys are hashes of (params, grid, kind, time arguments)
- The memo is bounded; the oldest entry is evicted first
- The memo is process-scoped (one scenario per process)
"""

from __future__ import annotations

import hashlib
import json
import logging
import threading
from collections import OrderedDict
from typing import Any

logger = logging.getLogger(__name__)

_cache: OrderedDict[str, Any] = OrderedDict()
_lock = threading.Lock()
_MAX_ENTRIES: int = 32

_SENTINEL = object()


def make_key(*args: Any, **kwargs: Any) -> str:
    """Create a stable cache key from function arguments.

    Floats are serialised with ``repr`` so that keys distinguish values
    that differ in the last bit.
    """
    raw = json.dumps({"a": args, "k": kwargs}, sort_keys=True, default=repr)
    return hashlib.sha256(raw.encode()).hexdigest()[:16]


def get(key: str) -> Any:
    """Get a memoized table.

    Returns ``_SENTINEL`` on a miss (to distinguish from a cached ``None``).
    """
    with _lock:
        if key in _cache:
            _cache.move_to_end(key)
            logger.debug("Cache hit: %s", key)
            return _cache[key]
        return _SENTINEL


def put(key: str, value: Any) -> None:
    """Store a table, evicting the least recently used entry when full."""
    with _lock:
        _cache[key] = value
        _cache.move_to_end(key)
        while len(_cache) > _MAX_ENTRIES:
            evicted, _ = _cache.popitem(last=False)
            logger.debug("Cache evicted: %s", evicted)
    logger.debug("Cache put: %s", key)


def clear() -> None:
    """Clear the entire memo."""
    with _lock:
        if _cache:
            logger.debug("Cache cleared (%d entries)", len(_cache))
        _cache.clear()


def size() -> int:
    """Return the number of memoized tables (for testing)."""
    with _lock:
        return len(_cache)
