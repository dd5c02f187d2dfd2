"""Ordered parallel map shared by every module that sweeps over samples.

The worker count is process-wide so the CLI flag can funnel all module
parallelism through one setting.  Threads are used because the heavy work is
inside LAPACK/FFT calls that release the GIL.
"""
from __future__ import annotations

import os
from concurrent.futures import ThreadPoolExecutor
from typing import Callable, Iterable, TypeVar

ENV_VAR = "FLOQUET_DIRAC_WORKERS"

T = TypeVar("T")
R = TypeVar("R")

_workers: int | None = None


def set_workers(n: int | None) -> None:
    global _workers
    if n is not None and n < 1:
        raise ValueError("worker count must be positive")
    _workers = n


def get_workers() -> int:
    if _workers is not None:
        return _workers
    env = os.environ.get(ENV_VAR)
    if env:
        try:
            return max(1, int(env))
        except ValueError:
            pass
    return os.cpu_count() or 1


def pmap(func: Callable[[T], R], items: Iterable[T], workers: int | None = None) -> list[R]:
    """map() that keeps input order regardless of completion order."""
    items = list(items)
    n = workers or get_workers()
    if n <= 1 or len(items) <= 1:
        return [func(it) for it in items]
    with ThreadPoolExecutor(max_workers=n) as pool:
        return list(pool.map(func, items))
