"""Run spans for catecho commands, exported only when OpenTelemetry is installed."""

from __future__ import annotations

import math
import os
from typing import Any, Dict, Mapping, Optional, Sequence, Union

from .core import Grid
from .model import ModelParams, Schedule

try:  # pragma: no cover - optional dependency
    from opentelemetry import trace
    from opentelemetry.sdk.resources import Resource
    from opentelemetry.sdk.trace import TracerProvider
    from opentelemetry.sdk.trace.export import BatchSpanProcessor, ConsoleSpanExporter
except Exception:  # pragma: no cover - optional dependency
    trace = None  # type: ignore[assignment]

AttributeValue = Union[str, bool, int, float, Sequence[str], Sequence[int], Sequence[float]]

EXPORTER_ENV = "CATECHO_OTEL_EXPORTER"
EXPORTERS = ("console", "otlp")

_TRACER: Any = None


def experiment_attributes(
    params: ModelParams,
    grid: Optional[Grid] = None,
    schedule: Optional[Schedule] = None,
) -> Dict[str, AttributeValue]:
    """Resolved model, lattice and time-step values of one experiment."""
    attributes: Dict[str, AttributeValue] = {
        "model.m": params.m,
        "model.omega": params.omega,
        "model.force": params.force,
        "model.omega_e": params.omega_e,
        "model.kinetic_enabled": params.kinetic_enabled,
    }
    if grid is not None:
        attributes.update({"grid.n": grid.n, "grid.extent": grid.extent, "grid.dx": grid.dx, "grid.p_max": grid.p_max})
    if schedule is not None:
        attributes.update(
            {
                "schedule.dt": schedule.dt,
                "schedule.n_steps": schedule.n_steps,
                "schedule.record_stride": schedule.record_stride,
                "schedule.pulses": len(schedule.pulses),
            }
        )
    return attributes


def span_attributes(attributes: Mapping[str, Any]) -> Dict[str, AttributeValue]:
    """Drop values a span cannot carry: None and non-finite floats. Numpy scalars become Python scalars."""
    cleaned: Dict[str, AttributeValue] = {}
    for key, value in attributes.items():
        if hasattr(value, "item"):
            value = value.item()
        if value is None or (isinstance(value, float) and not math.isfinite(value)):
            continue
        cleaned[key] = value
    return cleaned


def _tracer() -> Any:
    global _TRACER
    choice = os.environ.get(EXPORTER_ENV, "").lower()
    if trace is None or choice not in EXPORTERS:
        return None
    if _TRACER is None:
        if choice == "console":
            exporter = ConsoleSpanExporter()
        else:
            try:  # pragma: no cover - optional dependency
                from opentelemetry.exporter.otlp.proto.http.trace_exporter import OTLPSpanExporter
            except Exception:
                return None
            exporter = OTLPSpanExporter()
        provider = TracerProvider(resource=Resource.create({"service.name": "catecho"}))
        provider.add_span_processor(BatchSpanProcessor(exporter))
        trace.set_tracer_provider(provider)
        _TRACER = trace.get_tracer("catecho")
    return _TRACER


def emit_run_span(command: str, label: str, attributes: Mapping[str, Any]) -> bool:
    """One span per CLI command; False when no exporter is configured."""
    tracer = _tracer()
    if tracer is None:
        return False
    with tracer.start_as_current_span(f"catecho.{command}") as span:  # pragma: no cover - requires otel
        span.set_attribute("run.label", label)
        span.set_attributes(span_attributes(attributes))
    return True
