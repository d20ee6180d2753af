"""OpenTelemetry integration for rlunlearn.

Tracing and metrics are optional. Install the extra to enable them:

    pip install rlunlearn[telemetry]

Configuration via environment variables:
- RLUNLEARN_TELEMETRY_ENABLED: Enable telemetry (default: false)
- OTEL_SERVICE_NAME: Service name (default: rlunlearn)
- OTEL_EXPORTER_OTLP_ENDPOINT: OTLP endpoint (default: http://localhost:4317)

Telemetry only observes; it never feeds back into any numerical result.
"""

from .metrics import get_meter, record_iteration_metric, record_stage_metric
from .tracer import get_tracer, trace_operation, trace_stage

__all__ = [
    "get_tracer",
    "trace_stage",
    "trace_operation",
    "get_meter",
    "record_iteration_metric",
    "record_stage_metric",
]
