"""Tests for OpenTelemetry metrics fallbacks."""

from rlunlearn.telemetry.metrics import (
    NoOpCounter,
    NoOpHistogram,
    NoOpMeter,
    get_meter,
    record_iteration_metric,
    record_stage_metric,
)


def test_noop_counter_add():
    c = NoOpCounter()
    c.add(1, {"key": "val"})  # should not raise


def test_noop_histogram_record():
    h = NoOpHistogram()
    h.record(42.0, {"key": "val"})  # should not raise


def test_noop_meter_creates_instruments():
    m = NoOpMeter()
    assert isinstance(m.create_counter("test.counter"), NoOpCounter)
    assert isinstance(m.create_histogram("test.histogram"), NoOpHistogram)


def test_get_meter_returns_meter():
    meter = get_meter()
    assert meter is not None


def test_record_stage_metric_does_not_raise():
    record_stage_metric("started", "train")
    record_stage_metric("succeeded", "train", duration_ms=120.0)
    record_stage_metric("failed", "eval", duration_ms=3.0)
    record_stage_metric("skipped", "lemma-verify")


def test_unknown_stage_metric_is_ignored():
    record_stage_metric("exploded", "train")


def test_record_iteration_metric_does_not_raise():
    record_iteration_metric("composite", 0.41, 1.0, 0.03, 0.002)
