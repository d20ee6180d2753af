"""Tests for the order-preserving worker pool."""

import threading

import pytest

from rlunlearn.utils.seeding import derive_rng
from rlunlearn.workers.pool import WorkerPool, ordered_map


def test_sequential_map():
    with WorkerPool(1) as pool:
        assert pool.map(lambda x: x * 2, [1, 2, 3]) == [2, 4, 6]


def test_results_in_input_order():
    """Threads finish out of order but results come back in input order."""
    barrier = threading.Barrier(3)

    def slow(i):
        if i < 3:
            barrier.wait(timeout=5)
        return i

    with WorkerPool(3) as pool:
        assert pool.map(slow, range(6)) == list(range(6))


def test_seeded_work_independent_of_concurrency():
    def draw(i):
        return float(derive_rng(1, "item", i).random())

    assert ordered_map(draw, range(8), 1) == ordered_map(draw, range(8), 4)


def test_env_fallback(monkeypatch):
    monkeypatch.setenv("RLUNLEARN_CONCURRENCY", "2")
    assert WorkerPool().concurrency == 2


def test_rejects_zero_threads(monkeypatch):
    monkeypatch.setenv("RLUNLEARN_CONCURRENCY", "0")
    with pytest.raises(ValueError, match="at least 1"):
        WorkerPool()


def test_exceptions_propagate():
    def fail(i):
        raise RuntimeError(f"item {i}")

    with WorkerPool(2) as pool:
        with pytest.raises(RuntimeError, match="item"):
            pool.map(fail, [1, 2])
