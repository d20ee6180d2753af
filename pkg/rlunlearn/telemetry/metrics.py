"""OpenTelemetry metrics support for rlunlearn."""

import logging
import os
from typing import Any, Dict, Optional

logger = logging.getLogger(__name__)

try:
    from opentelemetry import metrics
    from opentelemetry.exporter.otlp.proto.grpc.metric_exporter import (
        OTLPMetricExporter,
    )
    from opentelemetry.sdk.metrics import MeterProvider
    from opentelemetry.sdk.metrics.export import PeriodicExportingMetricReader
    from opentelemetry.sdk.resources import Resource

    OTEL_AVAILABLE = True
except ImportError:
    OTEL_AVAILABLE = False
    logger.debug(
        "OpenTelemetry metrics not available. Install with: pip install rlunlearn[telemetry]"
    )


class NoOpCounter:
    def add(self, amount: int, attributes: Optional[Dict[str, Any]] = None) -> None:
        pass


class NoOpHistogram:
    def record(self, amount: float, attributes: Optional[Dict[str, Any]] = None) -> None:
        pass


class NoOpMeter:
    """Meter stand-in when OpenTelemetry is missing or disabled."""

    def create_counter(self, name: str, unit: str = "", description: str = ""):
        return NoOpCounter()

    def create_histogram(self, name: str, unit: str = "", description: str = ""):
        return NoOpHistogram()


_meter: Optional[Any] = None
_telemetry_enabled = os.getenv("RLUNLEARN_TELEMETRY_ENABLED", "false").lower() in (
    "true",
    "1",
    "yes",
)

_instruments: Dict[str, Any] = {}

# name -> (kind, unit, description)
_INSTRUMENT_SPECS = {
    "stage.started": ("counter", "1", "Pipeline stages started"),
    "stage.succeeded": ("counter", "1", "Pipeline stages finished successfully"),
    "stage.failed": ("counter", "1", "Pipeline stages that raised"),
    "stage.skipped": ("counter", "1", "Pipeline stages skipped"),
    "stage.duration": ("histogram", "ms", "Stage wall time in milliseconds"),
    "train.forget_reward": ("histogram", "1", "Mean forget-context reward per iteration"),
    "train.retain_reward": ("histogram", "1", "Mean retain-context reward per iteration"),
    "train.kl": ("histogram", "nat", "KL to the reference policy per iteration"),
    "train.forget_mass": ("histogram", "1", "Forget keyword emission mass per iteration"),
}


def _initialize_meter():
    global _meter

    meter: Any = NoOpMeter()
    if OTEL_AVAILABLE and _telemetry_enabled:
        try:
            service_name = os.getenv("OTEL_SERVICE_NAME", "rlunlearn")
            otlp_endpoint = os.getenv("OTEL_EXPORTER_OTLP_ENDPOINT", "http://localhost:4317")
            reader = PeriodicExportingMetricReader(
                OTLPMetricExporter(endpoint=otlp_endpoint, insecure=True),
                export_interval_millis=60000,
            )
            provider = MeterProvider(
                resource=Resource.create({"service.name": service_name}), metric_readers=[reader]
            )
            metrics.set_meter_provider(provider)
            meter = metrics.get_meter(__name__)
            logger.info(
                f"OpenTelemetry metrics initialized: service={service_name}, "
                f"endpoint={otlp_endpoint}"
            )
        except Exception as e:
            logger.error(f"Failed to initialize OpenTelemetry metrics: {e}")
            meter = NoOpMeter()
    else:
        logger.debug("Metrics disabled. Set RLUNLEARN_TELEMETRY_ENABLED=true to enable.")

    _meter = meter
    for name, (kind, unit, description) in _INSTRUMENT_SPECS.items():
        create = meter.create_counter if kind == "counter" else meter.create_histogram
        _instruments[name] = create(name=f"rlunlearn.{name}", unit=unit, description=description)


def get_meter():
    """Get the global meter (OpenTelemetry meter or NoOpMeter)."""
    if _meter is None:
        _initialize_meter()
    return _meter


def record_stage_metric(metric_type: str, stage: str, duration_ms: Optional[float] = None):
    """Record a stage lifecycle event.

    Args:
        metric_type: 'started', 'succeeded', 'failed' or 'skipped'
        stage: Stage name
        duration_ms: Wall time, recorded for finished stages

    Example:
        record_stage_metric("succeeded", "train", duration_ms=5120.0)
    """
    if _meter is None:
        _initialize_meter()

    attributes = {"stage.name": stage}
    counter = _instruments.get(f"stage.{metric_type}")
    if counter is None:
        logger.debug(f"Unknown stage metric type {metric_type!r}")
        return
    counter.add(1, attributes)
    if duration_ms is not None and metric_type in ("succeeded", "failed"):
        _instruments["stage.duration"].record(duration_ms, attributes)


def record_iteration_metric(
    mode: str,
    forget_reward: float,
    retain_reward: float,
    kl: float,
    forget_mass: float,
):
    """Record per-iteration training signals.

    Example:
        record_iteration_metric("composite", 0.41, 1.0, 0.03, 0.002)
    """
    if _meter is None:
        _initialize_meter()

    attributes = {"train.mode": mode}
    _instruments["train.forget_reward"].record(forget_reward, attributes)
    _instruments["train.retain_reward"].record(retain_reward, attributes)
    _instruments["train.kl"].record(kl, attributes)
    _instruments["train.forget_mass"].record(forget_mass, attributes)
