"""Small shared helpers: the worker pool and deterministic output encoding."""

from __future__ import annotations

import json
import os
from concurrent.futures import ThreadPoolExecutor

__all__ = ["thread_count", "parallel_map", "json_line", "ff"]


def ff(value):
    """Shortest round-trip decimal form of a float (CSV cell encoding)."""
    return repr(float(value))


def thread_count():
    """Worker cap from RRW_THREADS; defaults to 1 (results never depend on it)."""
    raw = os.environ.get("RRW_THREADS", "1")
    try:
        return max(1, int(raw))
    except ValueError:
        return 1


def parallel_map(fn, items, workers=None):
    """Map preserving input order; output is identical for any worker count."""
    items = list(items)
    workers = thread_count() if workers is None else workers
    if workers <= 1 or len(items) <= 1:
        return [fn(it) for it in items]
    with ThreadPoolExecutor(max_workers=workers) as pool:
        return list(pool.map(fn, items))


def json_line(obj):
    return json.dumps(obj, sort_keys=True, separators=(", ", ": "))
