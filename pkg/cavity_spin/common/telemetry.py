"""
Telemetry helpers

Custom events, metrics and tracked exceptions are emitted as structured log
records, so a run's history (pulse outcomes, lock-in, divergences, stage
timings) can be reconstructed from its log alone. Numeric values arrive from
numpy as often as not and are stored as plain floats.
"""

from datetime import datetime, timezone
import logging
import math
from typing import Any, Dict, Mapping, Optional

logger = logging.getLogger(__name__)


def _payload(
    key: str, name: str, properties: Optional[Mapping[str, str]]
) -> Dict[str, Any]:
    data: Dict[str, Any] = {
        key: name,
        "timestamp": datetime.now(timezone.utc).isoformat(),
    }
    if properties:
        data.update(properties)
    return data


def track_custom_event(
    name: str,
    properties: Optional[Dict[str, str]] = None,
    measurements: Optional[Dict[str, float]] = None,
) -> None:
    """
    Track a custom event such as a pulse lock-in or a divergence

    Args:
        name: Event name
        properties: Custom properties (string values)
        measurements: Custom measurements (numeric values)
    """
    event_data = _payload("event_name", name, properties)
    for k, v in (measurements or {}).items():
        event_data[f"measurement_{k}"] = float(v)

    logger.info(f"Custom Event: {name}", extra={"custom_event": event_data})


def track_custom_metric(
    name: str, value: float, properties: Optional[Dict[str, str]] = None
) -> None:
    """
    Track a custom metric

    Finite values are logged at DEBUG; a NaN or infinite value is logged at
    WARNING since it marks a blown-up readout.

    Args:
        name: Metric name
        value: Metric value
        properties: Custom properties
    """
    value = float(value)
    metric_data = _payload("metric_name", name, properties)
    metric_data["metric_value"] = value

    level = logging.DEBUG if math.isfinite(value) else logging.WARNING
    logger.log(level, f"Custom Metric: {name} = {value}", extra={"custom_metric": metric_data})


def track_exception(
    exception: BaseException,
    properties: Optional[Dict[str, str]] = None,
) -> None:
    """
    Track an exception

    Attributes a package error carries (mode index, pulse index, time) are
    copied into the record when present.

    Args:
        exception: The exception to track
        properties: Custom properties
    """
    exception_data = _payload("exception_type", type(exception).__name__, properties)
    exception_data["exception_message"] = str(exception)
    for attr in ("mode_index", "pulse_index", "time"):
        value = getattr(exception, attr, None)
        if value is not None:
            exception_data[attr] = value

    logger.error(
        f"Exception tracked: {type(exception).__name__}: {exception}",
        extra={"tracked_exception": exception_data},
    )
