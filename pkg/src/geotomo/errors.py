"""Error definitions and the CLI error handler."""

from __future__ import annotations

import logging
import traceback
from enum import Enum
from typing import Any

from .logging_config import get_logger
from .models import CommandResult, CommandStatus

EXIT_USAGE = 1
EXIT_NUMERICAL = 2


class GeotomoError(Exception):
    """Base exception for geotomo."""


class PreconditionError(GeotomoError, ValueError):
    """Raised when an input violates an operation's precondition."""


class NumericalError(GeotomoError, ArithmeticError):
    """Raised when a numerical routine fails."""


class DegenerateInputError(NumericalError):
    """Raised when an input has no usable structure (zero matrix, zero variance)."""


class PurityTargetError(NumericalError):
    """Raised when the purity search cannot reach its target."""


class TrainingDivergedError(NumericalError):
    """Raised when a training loss becomes NaN or infinite."""


class DatasetFormatError(GeotomoError):
    """Raised when a dataset or checkpoint file is malformed or incompatible."""


class SecurityError(GeotomoError):
    """Raised when a path fails security validation."""


class ErrorCategory(Enum):
    """Categories of errors for classification."""

    INPUT_VALIDATION = "input_validation"
    SECURITY = "security"
    NUMERICAL = "numerical"
    CONFIGURATION = "configuration"
    UNKNOWN = "unknown"


class ErrorHandler:
    """Turn exceptions into logged, user-facing command results.

    The handler classifies the error, picks an exit code (1 for input and
    configuration problems, 2 for numerical failures) and never raises.
    """

    def __init__(self, logger: logging.Logger | None = None) -> None:
        """Initialize the error handler.

        Args:
            logger: Optional logger instance. If None, creates a default logger.
        """
        self.logger = logger or get_logger(__name__)

    def handle_error(self, error: Exception, context: dict[str, Any]) -> CommandResult:
        """Log an error and build a FAILED command result.

        Args:
            error: The exception that occurred
            context: Context information (e.g., command, path)

        Returns:
            CommandResult with FAILED status, message and exit code
        """
        category = self._classify_error(error)
        user_message = self._generate_user_message(error, category, context)
        self._log_error(error, category, context)

        return CommandResult(
            command=str(context.get("command", "unknown")),
            status=CommandStatus.FAILED,
            exit_code=self.exit_code_for(category),
            message=user_message,
            elapsed=float(context.get("elapsed", 0.0)),
        )

    @staticmethod
    def exit_code_for(category: ErrorCategory) -> int:
        """Exit code of a failed command in the given category."""
        if category in {ErrorCategory.NUMERICAL, ErrorCategory.UNKNOWN}:
            return EXIT_NUMERICAL
        return EXIT_USAGE

    def _classify_error(self, error: Exception) -> ErrorCategory:
        """Classify error into category for appropriate handling.

        Args:
            error: The exception to classify

        Returns:
            ErrorCategory indicating the type of error
        """
        if isinstance(error, SecurityError):
            return ErrorCategory.SECURITY
        if isinstance(error, (DatasetFormatError, FileNotFoundError, PermissionError)):
            return ErrorCategory.INPUT_VALIDATION
        if isinstance(error, (NumericalError, FloatingPointError)):
            return ErrorCategory.NUMERICAL
        if isinstance(error, PreconditionError):
            return ErrorCategory.INPUT_VALIDATION
        if isinstance(error, (ValueError, TypeError)):
            return ErrorCategory.CONFIGURATION
        if isinstance(error, OSError):
            return ErrorCategory.INPUT_VALIDATION
        return ErrorCategory.UNKNOWN

    def _generate_user_message(
        self, error: Exception, category: ErrorCategory, context: dict[str, Any]
    ) -> str:
        """Generate a clear, actionable error message.

        Args:
            error: The exception that occurred
            category: The error category
            context: Context information

        Returns:
            User-friendly error message
        """
        command = context.get("command", "command")
        path = context.get("path")
        where = f" ({path})" if path else ""
        base_message = str(error)

        if category == ErrorCategory.INPUT_VALIDATION:
            if isinstance(error, FileNotFoundError):
                return f"File not found{where}. Please check the path and try again."
            return f"Invalid input for {command}{where}: {base_message}"
        if category == ErrorCategory.SECURITY:
            return f"Security error{where}: {base_message}. This path is not allowed."
        if category == ErrorCategory.NUMERICAL:
            return f"Numerical failure during {command}: {base_message}"
        if category == ErrorCategory.CONFIGURATION:
            return f"Configuration error: {base_message}. Please check your settings."
        return (
            f"Unexpected error during {command}: {base_message}. "
            "Please report this issue if it persists."
        )

    def _log_error(
        self, error: Exception, category: ErrorCategory, context: dict[str, Any]
    ) -> None:
        """Log error with full context; the stack trace goes to DEBUG.

        Args:
            error: The exception that occurred
            category: The error category
            context: Context information
        """
        context_str = ", ".join(f"{k}={v}" for k, v in context.items())
        self.logger.error(
            f"Error [{category.value}]: {type(error).__name__}: {error}",
            extra={"context": context_str},
        )

        if self.logger.isEnabledFor(logging.DEBUG):
            self.logger.debug(
                f"Stack trace for error in {context.get('command', 'unknown')}:\n"
                f"{''.join(traceback.format_exception(type(error), error, error.__traceback__))}"
            )
