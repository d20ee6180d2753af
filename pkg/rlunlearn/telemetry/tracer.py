"""OpenTelemetry tracing support for rlunlearn."""

import logging
import os
from contextlib import contextmanager
from typing import Any, Dict, Optional

logger = logging.getLogger(__name__)

try:
    from opentelemetry import trace
    from opentelemetry.exporter.otlp.proto.grpc.trace_exporter import OTLPSpanExporter
    from opentelemetry.sdk.resources import Resource
    from opentelemetry.sdk.trace import TracerProvider
    from opentelemetry.sdk.trace.export import BatchSpanProcessor
    from opentelemetry.trace import Status, StatusCode

    OTEL_AVAILABLE = True
except ImportError:
    OTEL_AVAILABLE = False
    logger.debug("OpenTelemetry not available. Install with: pip install rlunlearn[telemetry]")


class NoOpSpan:
    """Span stand-in when tracing is off."""

    def set_attribute(self, key: str, value: Any) -> None:
        pass

    def set_status(self, status) -> None:
        pass

    def record_exception(self, exception: Exception) -> None:
        pass

    def end(self) -> None:
        pass

    def __enter__(self):
        return self

    def __exit__(self, exc_type, exc_val, exc_tb):
        pass


class NoOpTracer:
    """Tracer stand-in when OpenTelemetry is missing or disabled."""

    @contextmanager
    def start_as_current_span(self, name: str, attributes: Optional[Dict[str, Any]] = None):
        yield NoOpSpan()

    def start_span(self, name: str, attributes: Optional[Dict[str, Any]] = None):
        return NoOpSpan()


_tracer: Optional[Any] = None
_telemetry_enabled = os.getenv("RLUNLEARN_TELEMETRY_ENABLED", "false").lower() in (
    "true",
    "1",
    "yes",
)


def _initialize_tracer():
    global _tracer

    if not OTEL_AVAILABLE or not _telemetry_enabled:
        logger.debug("Tracing disabled. Set RLUNLEARN_TELEMETRY_ENABLED=true to enable.")
        _tracer = NoOpTracer()
        return

    try:
        service_name = os.getenv("OTEL_SERVICE_NAME", "rlunlearn")
        otlp_endpoint = os.getenv("OTEL_EXPORTER_OTLP_ENDPOINT", "http://localhost:4317")
        provider = TracerProvider(resource=Resource.create({"service.name": service_name}))
        provider.add_span_processor(
            BatchSpanProcessor(OTLPSpanExporter(endpoint=otlp_endpoint, insecure=True))
        )
        trace.set_tracer_provider(provider)
        _tracer = trace.get_tracer(__name__)
        logger.info(
            f"OpenTelemetry tracer initialized: service={service_name}, endpoint={otlp_endpoint}"
        )
    except Exception as e:
        logger.error(f"Failed to initialize OpenTelemetry tracer: {e}")
        _tracer = NoOpTracer()


def get_tracer():
    """Get the global tracer (OpenTelemetry tracer or NoOpTracer)."""
    if _tracer is None:
        _initialize_tracer()
    return _tracer


def _tracing_live() -> bool:
    return OTEL_AVAILABLE and _telemetry_enabled and not isinstance(_tracer, NoOpTracer)


@contextmanager
def trace_operation(operation_name: str, attributes: Optional[Dict[str, Any]] = None):
    """Context manager tracing one operation; errors are recorded on the span and re-raised.

    Example:
        with trace_operation("lemma.sweep", {"instances": 200}):
            ...
    """
    tracer = get_tracer()
    with tracer.start_as_current_span(operation_name, attributes=attributes) as span:
        try:
            yield span
        except Exception as e:
            if span is not None and _tracing_live():
                span.set_status(Status(StatusCode.ERROR))
                span.record_exception(e)
            raise


@contextmanager
def trace_stage(stage: str, run_seed: int, config_digest: str):
    """Span around one pipeline stage."""
    attributes = {"stage.name": stage, "run.seed": str(run_seed), "config.digest": config_digest}
    with trace_operation(f"stage.{stage}", attributes) as span:
        yield span
        if span is not None and _tracing_live():
            span.set_status(Status(StatusCode.OK))
