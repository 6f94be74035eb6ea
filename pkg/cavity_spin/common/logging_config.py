"""
Logging configuration for the cavity spin machine

This module provides centralized logging configuration with run context
(command name and run id) for both interactive use and batch runs.
"""

from datetime import datetime, timezone
import logging
import os
import sys
from typing import Any, Dict, MutableMapping, Optional, Tuple, Union

from dotenv import load_dotenv

_logging_configured = False

LOG_FORMAT = (
    "%(timestamp)s - %(name)s - %(levelname)s - "
    "%(command_context)s%(run_context)s %(message)s"
)


class RunContextFormatter(logging.Formatter):
    """Formatter that renders the command and run id attached to a record"""

    def format(self, record: logging.LogRecord) -> str:
        """Format log record with additional context"""
        record.timestamp = datetime.now(timezone.utc).isoformat()

        if hasattr(record, "command"):
            setattr(record, "command_context", f"[{getattr(record, 'command')}]")
        else:
            setattr(record, "command_context", "")

        if hasattr(record, "run_id"):
            setattr(record, "run_context", f"[{getattr(record, 'run_id')}]")
        else:
            setattr(record, "run_context", "")

        return super().format(record)


def setup_logging(
    log_level: str = "INFO",
    log_file: Optional[str] = None,
) -> bool:
    """
    Configure the ``cavity_spin`` logger hierarchy

    Args:
        log_level: Logging level (DEBUG, INFO, WARNING, ERROR, CRITICAL)
        log_file: Optional file that receives a copy of every record

    Returns:
        bool: True if handlers were installed by this call
    """
    global _logging_configured

    if _logging_configured:
        return False

    level = getattr(logging, log_level.upper(), None)
    if not isinstance(level, int):
        logging.warning(f"Unknown log level '{log_level}', falling back to INFO")
        level = logging.INFO

    package_logger = logging.getLogger("cavity_spin")
    package_logger.setLevel(level)
    formatter = RunContextFormatter(LOG_FORMAT)

    console_handler = logging.StreamHandler(sys.stderr)
    console_handler.setLevel(level)
    console_handler.setFormatter(formatter)
    package_logger.addHandler(console_handler)

    if log_file:
        file_handler = logging.FileHandler(log_file, encoding="utf-8")
        file_handler.setLevel(level)
        file_handler.setFormatter(formatter)
        package_logger.addHandler(file_handler)

    _logging_configured = True
    package_logger.debug("Logging configured at level %s", logging.getLevelName(level))
    return True


def get_logger(
    name: str,
    command: Optional[str] = None,
    run_id: Optional[str] = None,
    custom_properties: Optional[Dict[str, Any]] = None,
) -> Union[logging.Logger, logging.LoggerAdapter]:
    """
    Get a logger with optional run context

    Args:
        name: Logger name (typically __name__)
        command: CLI command the record belongs to
        run_id: Identifier of the run, shared by all records of one command
        custom_properties: Additional properties to include in records

    Returns:
        logging.Logger or a LoggerAdapter carrying the context
    """
    logger = logging.getLogger(name)

    if command or run_id or custom_properties:
        return LoggerAdapter(logger, command, run_id, custom_properties)

    return logger


class LoggerAdapter(logging.LoggerAdapter):
    """Logger adapter to add run context to log records"""

    def __init__(
        self,
        logger: logging.Logger,
        command: Optional[str] = None,
        run_id: Optional[str] = None,
        custom_properties: Optional[Dict[str, Any]] = None,
    ):
        self.command = command
        self.run_id = run_id
        self.custom_properties = custom_properties or {}
        super().__init__(logger, {})

    def process(
        self, msg: Any, kwargs: MutableMapping[str, Any]
    ) -> Tuple[Any, MutableMapping[str, Any]]:
        """Process log record to add context"""
        if self.command:
            kwargs.setdefault("extra", {})["command"] = self.command

        if self.run_id:
            kwargs.setdefault("extra", {})["run_id"] = self.run_id

        if self.custom_properties:
            kwargs.setdefault("extra", {}).update(self.custom_properties)

        return msg, kwargs


def is_logging_configured() -> bool:
    """Check if package logging has been configured"""
    return _logging_configured


def _auto_configure() -> None:
    """Auto-configure logging if environment variables are set"""
    load_dotenv()
    log_level = os.getenv("CAVITY_SPIN_LOG_LEVEL")
    if log_level:
        setup_logging(log_level, os.getenv("CAVITY_SPIN_LOG_FILE"))


# Auto-configure on module import
_auto_configure()
