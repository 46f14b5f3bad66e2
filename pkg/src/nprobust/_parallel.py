"""Order-preserving thread-pool map, capped by ``NPROBUST_THREADS``."""

import os
from concurrent.futures import ThreadPoolExecutor


def worker_count(requested=None):
    cap = os.environ.get("NPROBUST_THREADS")
    n = requested if requested is not None else (os.cpu_count() or 1)
    if cap:
        n = min(n, max(1, int(cap)))
    return max(1, int(n))


def parallel_map(fn, items, workers=None):
    """``[fn(x) for x in items]``, fanned out over threads when more than one is allowed."""
    items = list(items)
    n = worker_count(workers)
    if n == 1 or len(items) < 2:
        return [fn(x) for x in items]
    with ThreadPoolExecutor(max_workers=n) as pool:
        return list(pool.map(fn, items))
