"""Logging configuration for geotomo.

Everything logs under the ``geotomo`` namespace to stderr, so tables and JSON
written to stdout stay machine-readable. Runs are long and numerical, so this
module also provides:
- Start/complete/error messages for generation, training, analysis and sweeps
- Compact rendering of float, tuple and array context values
- One INFO line per training epoch
- numpy and scipy warnings (constant input, overflow) routed into the same handlers
"""

from __future__ import annotations

import logging
import sys
from typing import TYPE_CHECKING

import numpy as np

if TYPE_CHECKING:
    from pathlib import Path

    from .models import EpochRecord

ROOT_LOGGER_NAME = "geotomo"
WARNINGS_LOGGER_NAME = "py.warnings"
FLOAT_FORMAT = ".6g"


class PlatformIndependentFormatter(logging.Formatter):
    """Formatter that normalizes line endings to LF on every platform."""

    def format(self, record: logging.LogRecord) -> str:
        """Format the log record with platform-independent line endings.

        Args:
            record: The log record to format

        Returns:
            Formatted log message with normalized line endings
        """
        formatted = super().format(record)
        return formatted.replace("\r\n", "\n").replace("\r", "\n")


def setup_logging(
    level: int = logging.INFO,
    verbose: bool = False,
    log_file: Path | None = None,
) -> logging.Logger:
    """Set up logging for the geotomo package.

    Python warnings are captured and sent to the same handlers, so a
    ``ConstantInputWarning`` from the correlation step lands in the run log.

    Args:
        level: Base logging level (default: INFO)
        verbose: Enable verbose logging (sets level to DEBUG, adds file:line)
        log_file: Optional path to log file for persistent logging

    Returns:
        Configured logger instance for the geotomo package
    """
    effective_level = logging.DEBUG if verbose else level

    logger = logging.getLogger(ROOT_LOGGER_NAME)
    logger.setLevel(effective_level)

    # Remove any existing handlers to avoid duplicates
    for handler in logger.handlers:
        handler.close()
    logger.handlers.clear()

    # stderr only: stdout carries command output
    console_handler = logging.StreamHandler(sys.stderr)
    console_handler.setLevel(effective_level)

    if verbose:
        format_string = (
            "%(asctime)s - %(name)s - %(levelname)s - %(filename)s:%(lineno)d - %(message)s"
        )
    else:
        format_string = "%(asctime)s - %(levelname)s - %(message)s"

    formatter = PlatformIndependentFormatter(format_string, datefmt="%Y-%m-%d %H:%M:%S")
    console_handler.setFormatter(formatter)
    logger.addHandler(console_handler)

    if log_file:
        try:
            log_file.parent.mkdir(parents=True, exist_ok=True)
            file_handler = logging.FileHandler(log_file, mode="a", encoding="utf-8", delay=False)
            file_handler.setLevel(effective_level)
            file_handler.setFormatter(formatter)
            logger.addHandler(file_handler)
            logger.debug(f"Logging to file: {log_file}")
        except OSError as e:
            # Console logging still works
            logger.warning(f"Failed to set up file logging: {e}")

    logging.captureWarnings(True)
    warnings_logger = logging.getLogger(WARNINGS_LOGGER_NAME)
    warnings_logger.handlers = list(logger.handlers)
    warnings_logger.setLevel(logging.WARNING)
    warnings_logger.propagate = False

    logger.debug(
        f"Logging configured: level={logging.getLevelName(effective_level)}, "
        f"verbose={verbose}, log_file={log_file}"
    )

    return logger


def get_logger(name: str) -> logging.Logger:
    """Get a logger under the geotomo namespace.

    Args:
        name: Name of the module (typically __name__)

    Returns:
        Logger instance for the specified module
    """
    if not name.startswith(ROOT_LOGGER_NAME):
        name = f"{ROOT_LOGGER_NAME}.{name}"

    return logging.getLogger(name)


def set_log_level(level: int | str) -> None:
    """Change the logging level for the geotomo package.

    Args:
        level: New logging level (int or name such as 'DEBUG')

    Raises:
        ValueError: If the level string is invalid
    """
    logger = logging.getLogger(ROOT_LOGGER_NAME)

    if isinstance(level, str):
        numeric_level = getattr(logging, level.upper(), None)
        if not isinstance(numeric_level, int):
            raise ValueError(f"Invalid log level: {level}")
        level = numeric_level

    logger.setLevel(level)
    for handler in logger.handlers:
        handler.setLevel(level)

    logger.debug(f"Log level changed to {logging.getLevelName(level)}")


def format_value(value: object) -> str:
    """Render one context value: floats to six significant digits, arrays by shape."""
    if isinstance(value, bool | int | str):
        return str(value)
    if isinstance(value, float | np.floating):
        return format(float(value), FLOAT_FORMAT)
    if isinstance(value, np.ndarray):
        return f"array{value.shape}"
    if isinstance(value, tuple | list):
        inner = ", ".join(format_value(v) for v in value)
        return f"({inner})" if isinstance(value, tuple) else f"[{inner}]"
    return str(value)


def format_context(context: dict[str, object]) -> str:
    """``k=v`` pairs joined by commas, values through ``format_value``."""
    return ", ".join(f"{k}={format_value(v)}" for k, v in context.items())


def log_operation_start(logger: logging.Logger, operation: str, **context: object) -> None:
    """Log the start of an operation with context.

    Args:
        logger: Logger instance to use
        operation: Name of the operation (e.g., "generation", "training")
        **context: Additional context as keyword arguments
    """
    context_str = format_context(context)
    logger.info(f"Starting {operation}: {context_str}")


def log_operation_complete(
    logger: logging.Logger,
    operation: str,
    success: bool,
    duration: float | None = None,
    **context: object,
) -> None:
    """Log the completion of an operation with context.

    Args:
        logger: Logger instance to use
        operation: Name of the operation
        success: Whether the operation succeeded
        duration: Optional duration in seconds
        **context: Additional context as keyword arguments
    """
    context_str = format_context(context)
    status = "completed successfully" if success else "failed"

    if duration is not None:
        message = f"{operation.capitalize()} {status} in {duration:.2f}s: {context_str}"
    else:
        message = f"{operation.capitalize()} {status}: {context_str}"

    if success:
        logger.info(message)
    else:
        logger.error(message)


def log_operation_error(
    logger: logging.Logger, operation: str, error: Exception, **context: object
) -> None:
    """Log an operation error with context; the stack trace goes to DEBUG.

    Args:
        logger: Logger instance to use
        operation: Name of the operation that failed
        error: The exception that occurred
        **context: Additional context as keyword arguments
    """
    context_str = format_context(context)
    logger.error(f"Error during {operation}: {type(error).__name__}: {error} - {context_str}")

    if logger.isEnabledFor(logging.DEBUG):
        logger.debug(f"Stack trace for {operation} error:", exc_info=error)


def log_epoch(
    logger: logging.Logger,
    record: EpochRecord,
    best_fidelity: float,
    since_best: int,
    patience: int,
) -> None:
    """One INFO line per finished epoch with its losses and early-stopping state."""
    logger.info(
        f"Epoch {record.epoch}: recon={record.recon_loss:.5f} metric={record.metric_loss:.5f} "
        f"total={record.total_loss:.5f} val_F={record.val_fidelity:.5f} "
        f"best={best_fidelity:.5f} patience={since_best}/{patience}"
    )
