"""
Ordered parallel map used for per-sample work.

Results always come back in input order and are reduced sequentially by
the caller, so the thread count never changes a single output bit.
"""

import os
from concurrent.futures import ThreadPoolExecutor
from typing import Callable, Iterable, TypeVar

T = TypeVar('T')
R = TypeVar('R')

THREADS_ENV = "GENGRAD_THREADS"


def thread_count() -> int:
    """Worker cap from GENGRAD_THREADS (default 1)."""
    raw = os.environ.get(THREADS_ENV, "").strip()
    if not raw:
        return 1
    try:
        count = int(raw)
    except ValueError:
        raise ValueError(f"{THREADS_ENV} must be a positive integer, got '{raw}'") from None
    if count < 1:
        raise ValueError(f"{THREADS_ENV} must be a positive integer, got '{raw}'")
    return count


def ordered_map(fn: Callable[[T], R], items: Iterable[T]) -> list[R]:
    items = list(items)
    workers = min(thread_count(), len(items))
    if workers <= 1:
        return [fn(item) for item in items]
    with ThreadPoolExecutor(max_workers=workers) as pool:
        return list(pool.map(fn, items))
