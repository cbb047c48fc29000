"""Order-preserving fan-out of per-image work over a bounded process pool."""

from __future__ import annotations

import multiprocessing as mp
import os
from concurrent.futures import ProcessPoolExecutor
from typing import Callable, Optional, Sequence

ENV_THREADS = "NUCLEITOOL_THREADS"

_job: Optional[tuple[Callable, tuple]] = None


def available_cores() -> int:
    try:
        return len(os.sched_getaffinity(0))
    except AttributeError:
        return os.cpu_count() or 1


def resolve_threads(requested: Optional[int] = None) -> int:
    """Worker count: the environment variable wins over ``requested``."""
    env = os.environ.get(ENV_THREADS)
    if env:
        try:
            n = int(env)
        except ValueError:
            raise ValueError(f"{ENV_THREADS} must be an integer, got {env!r}") from None
    elif requested is not None:
        n = requested
    else:
        n = available_cores()
    if n < 1:
        raise ValueError("thread count must be at least 1")
    return n


def _run_chunk(bounds: tuple[int, int]) -> list:
    fn, args = _job
    return [fn(i, *args) for i in range(*bounds)]


def map_indices(fn: Callable, n: int, args: Sequence = (), threads: int = 1) -> list:
    """Return ``[fn(i, *args) for i in range(n)]``, possibly in parallel.

    With more than one worker the index range is split into contiguous chunks
    handled by forked processes; ``args`` reach the workers through fork, not
    pickling. Results come back in index order regardless of worker count.
    """
    global _job
    threads = max(1, min(threads, n))
    if threads == 1 or "fork" not in mp.get_all_start_methods():
        return [fn(i, *args) for i in range(n)]
    step = -(-n // threads)
    chunks = [(s, min(s + step, n)) for s in range(0, n, step)]
    _job = (fn, tuple(args))
    try:
        with ProcessPoolExecutor(max_workers=len(chunks), mp_context=mp.get_context("fork")) as pool:
            parts = list(pool.map(_run_chunk, chunks))
    finally:
        _job = None
    return [r for part in parts for r in part]
