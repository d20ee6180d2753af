"""Order-preserving worker pool for independently seeded work items."""

import logging
import os
from concurrent.futures import ThreadPoolExecutor
from typing import Callable, Iterable, Optional, TypeVar

logger = logging.getLogger(__name__)

T = TypeVar("T")
R = TypeVar("R")


class WorkerPool:
    """Maps a function over items with a fixed number of threads.

    Results always come back in input order, and every item is expected to
    carry its own seed, so the output does not depend on ``concurrency``.
    """

    def __init__(self, concurrency: Optional[int] = None):
        self.concurrency = concurrency or int(os.getenv("RLUNLEARN_CONCURRENCY", "1"))
        if self.concurrency < 1:
            raise ValueError("concurrency must be at least 1")
        self._executor: Optional[ThreadPoolExecutor] = None

    def __enter__(self) -> "WorkerPool":
        if self.concurrency > 1:
            self._executor = ThreadPoolExecutor(
                max_workers=self.concurrency, thread_name_prefix="rlunlearn"
            )
        return self

    def __exit__(self, exc_type, exc_val, exc_tb):
        self.close()

    def close(self) -> None:
        if self._executor is not None:
            self._executor.shutdown(wait=True)
            self._executor = None

    def map(self, fn: Callable[[T], R], items: Iterable[T]) -> list[R]:
        items = list(items)
        if self._executor is None or len(items) < 2:
            return [fn(item) for item in items]
        return list(self._executor.map(fn, items))


def ordered_map(
    fn: Callable[[T], R], items: Iterable[T], concurrency: Optional[int] = None
) -> list[R]:
    """One-shot :class:`WorkerPool` map."""
    with WorkerPool(concurrency) as pool:
        logger.debug(f"ordered_map with {pool.concurrency} thread(s)")
        return pool.map(fn, items)
