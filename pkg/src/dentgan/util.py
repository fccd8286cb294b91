"""Worker-pool helper honoring the DENTGAN_THREADS environment variable."""

from __future__ import annotations

import os
from concurrent.futures import ThreadPoolExecutor


def thread_count() -> int:
    """0 means sequential reference mode (the default)."""
    raw = os.environ.get("DENTGAN_THREADS", "0")
    try:
        return max(int(raw), 0)
    except ValueError:
        return 0


def parallel_map(fn, items):
    """Order-preserving map; results equal the sequential computation."""
    items = list(items)
    workers = thread_count()
    if workers <= 1 or len(items) <= 1:
        return [fn(item) for item in items]
    with ThreadPoolExecutor(max_workers=workers) as pool:
        return list(pool.map(fn, items))
