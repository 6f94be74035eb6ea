"""
Common utilities for the cavity spin machine

This package provides shared functionality across all modules including:
- Logging configuration with run context
- Telemetry helpers
- Decorators for automatic instrumentation
"""

from cavity_spin.common.decorators import log_command_execution, log_stage
from cavity_spin.common.logging_config import get_logger, setup_logging
from cavity_spin.common.telemetry import (
    track_custom_event,
    track_custom_metric,
    track_exception,
)

__all__ = [
    "get_logger",
    "setup_logging",
    "track_custom_event",
    "track_custom_metric",
    "track_exception",
    "log_command_execution",
    "log_stage",
]
