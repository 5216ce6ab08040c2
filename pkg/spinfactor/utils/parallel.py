"""
Ordered worker-pool helpers.

Results always come back in input order so every reduction over them is
deterministic regardless of the worker count.
"""

import os
from concurrent.futures import ThreadPoolExecutor
from typing import Callable, Iterable, List, Optional, TypeVar

from spinfactor.config import THREADS_ENV_VAR
from spinfactor.exceptions import InputValidationError

T = TypeVar("T")
R = TypeVar("R")


def resolve_thread_count(threads: Optional[int] = None) -> int:
    """Explicit value, else the environment variable, else the CPU count."""
    if threads is None:
        raw = os.environ.get(THREADS_ENV_VAR)
        if raw:
            try:
                threads = int(raw)
            except ValueError as exc:
                raise InputValidationError(
                    f"{THREADS_ENV_VAR} must be an integer, got {raw!r}"
                ) from exc
        else:
            threads = os.cpu_count() or 1
    if threads < 1:
        raise InputValidationError("thread count must be >= 1")
    return threads


def ordered_map(
    fn: Callable[[T], R], items: Iterable[T], workers: Optional[int] = 1
) -> List[R]:
    """Map ``fn`` over ``items`` on up to ``workers`` threads, preserving order."""
    work = list(items)
    count = resolve_thread_count(workers)
    if count == 1 or len(work) <= 1:
        return [fn(item) for item in work]
    with ThreadPoolExecutor(max_workers=min(count, len(work))) as pool:
        return list(pool.map(fn, work))
