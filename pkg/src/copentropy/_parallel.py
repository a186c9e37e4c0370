from __future__ import annotations

import os
from concurrent.futures import ThreadPoolExecutor


def resolve_threads(threads: int) -> int:
    if threads is None or threads <= 0:
        return os.cpu_count() or 1
    return threads


def pmap(fn, items, threads: int = 1) -> list:
    """Order-preserving map; results never depend on the thread count."""
    items = list(items)
    n = resolve_threads(threads)
    if n == 1 or len(items) < 2:
        return [fn(it) for it in items]
    with ThreadPoolExecutor(max_workers=n) as ex:
        return list(ex.map(fn, items))
