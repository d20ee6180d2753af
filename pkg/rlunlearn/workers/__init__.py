"""Worker pool for parallel, order-preserving stage work."""

from rlunlearn.workers.pool import WorkerPool, ordered_map

__all__ = ["WorkerPool", "ordered_map"]
