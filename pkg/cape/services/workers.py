"""Process-level parallelism for independent jobs (seeds, ablation rows)."""

import logging
import os
from collections.abc import Callable, Iterable
from concurrent.futures import ProcessPoolExecutor
from typing import TypeVar

logger = logging.getLogger(__name__)

THREADS_ENV = "CAPE_THREADS"

T = TypeVar("T")
R = TypeVar("R")


def worker_count(requested: int | None = None) -> int:
    """Number of worker processes: ``requested``, capped by ``CAPE_THREADS`` and CPUs."""
    limit = os.cpu_count() or 1
    env = os.environ.get(THREADS_ENV)
    if env:
        try:
            limit = max(1, int(env))
        except ValueError:
            logger.warning("Ignoring non-integer %s=%r", THREADS_ENV, env)
    return max(1, min(requested or limit, limit))


def run_parallel(fn: Callable[[T], R], jobs: Iterable[T], workers: int | None = None) -> list[R]:
    """Apply ``fn`` to every job, preserving order.

    ``fn`` and the jobs must be picklable when more than one worker is used.
    Each job must draw its randomness from its own seed, so results do not
    depend on the worker count.
    """
    items = list(jobs)
    count = min(worker_count(workers), max(len(items), 1))
    if count == 1:
        return [fn(item) for item in items]
    logger.debug("Running %d jobs on %d workers", len(items), count)
    with ProcessPoolExecutor(max_workers=count) as pool:
        return list(pool.map(fn, items))
