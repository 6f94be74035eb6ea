"""
Decorators for command logging and telemetry

``log_command_execution`` wraps a CLI command handler: it assigns a run id,
tags every record with it and reports start, completion or failure.
``log_stage`` times a long numerical stage (integration, enumeration, batch).
"""

import functools
import time
from typing import Any, Callable, Dict, Optional, TypeVar, cast
import uuid

from cavity_spin.common.logging_config import get_logger
from cavity_spin.common.telemetry import (
    track_custom_event,
    track_custom_metric,
    track_exception,
)

F = TypeVar("F", bound=Callable[..., Any])

# RunConfig fields worth carrying on every command record
RUN_PROPERTIES = ("mode", "seed", "homogenization")


def _run_properties(args: tuple) -> Dict[str, str]:
    if not args:
        return {}
    config = args[0]
    return {
        name: str(getattr(config, name))
        for name in RUN_PROPERTIES
        if getattr(config, name, None) is not None
    }


def log_command_execution(
    command_name: Optional[str] = None,
    track_performance: bool = True,
    track_events: bool = True,
    custom_properties: Optional[Dict[str, str]] = None,
) -> Callable[[F], F]:
    """
    Decorator to log execution of a CLI command

    The first positional argument, when it is a run configuration, lends
    its mode, seed and homogenization to the tracked properties.

    Args:
        command_name: Override command name for logging
        track_performance: Whether to track execution time
        track_events: Whether to track start/end events
        custom_properties: Additional properties to include in logs

    Returns:
        Decorated function
    """

    def decorator(command_handler: F) -> F:
        @functools.wraps(command_handler)
        def wrapper(*args: Any, **kwargs: Any) -> Any:
            run_id = uuid.uuid4().hex[:12]
            name = command_name or command_handler.__name__
            properties = {
                "command": name,
                "run_id": run_id,
                **_run_properties(args),
                **(custom_properties or {}),
            }
            logger = get_logger(
                __name__, command=name, run_id=run_id, custom_properties=custom_properties
            )

            if track_events:
                track_custom_event("CommandStarted", properties=properties)
            logger.info(f"Command {name} started")

            start_time = time.perf_counter()
            try:
                result = command_handler(*args, **kwargs)
            except Exception as e:
                elapsed_ms = (time.perf_counter() - start_time) * 1000
                track_exception(
                    e, properties={**properties, "execution_time_ms": f"{elapsed_ms:.2f}"}
                )
                if track_events:
                    track_custom_event(
                        "CommandFailed",
                        properties={
                            **properties,
                            "error_type": type(e).__name__,
                            "error_message": str(e),
                        },
                    )
                logger.error(
                    f"Command {name} failed after {elapsed_ms:.2f}ms - "
                    f"{type(e).__name__}: {e}"
                )
                raise

            elapsed_ms = (time.perf_counter() - start_time) * 1000
            if track_performance:
                track_custom_metric(
                    "CommandExecutionTime",
                    elapsed_ms,
                    properties={"command": name, "run_id": run_id},
                )
            if track_events:
                track_custom_event(
                    "CommandCompleted",
                    properties={**properties, "execution_time_ms": f"{elapsed_ms:.2f}"},
                )
            logger.info(f"Command {name} completed in {elapsed_ms:.2f}ms")
            return result

        return cast(F, wrapper)

    return decorator


def log_stage(stage_name: str) -> Callable[[F], F]:
    """
    Decorator to time a numerical stage

    The duration goes to the stage module's logger at DEBUG and to a
    ``StageDuration`` metric. Exceptions pass through untouched.

    Args:
        stage_name: Name reported in the log record

    Returns:
        Decorated function
    """

    def decorator(stage: F) -> F:
        @functools.wraps(stage)
        def wrapper(*args: Any, **kwargs: Any) -> Any:
            logger = get_logger(stage.__module__)
            start_time = time.perf_counter()
            result = stage(*args, **kwargs)
            duration_ms = (time.perf_counter() - start_time) * 1000
            logger.debug(f"Stage {stage_name} finished in {duration_ms:.2f}ms")
            track_custom_metric("StageDuration", duration_ms, properties={"stage": stage_name})
            return result

        return cast(F, wrapper)

    return decorator
