"""
Error Handling Utilities

Provides standardized error handling, custom exceptions and the exit-code
mapping used by the command line across the private speech pipeline.
"""

import functools
import logging
import time
import traceback
import uuid
from typing import Any, Callable, Dict, Optional

from settings.config import Config

logger = logging.getLogger(__name__)


class PrivateSpeechError(Exception):
    """Base exception for all private speech pipeline errors."""

    exit_code = Config.EXIT_UNKNOWN

    def __init__(self, message: str, error_code: str = None, details: Dict = None):
        super().__init__(message)
        self.message = message
        self.error_code = error_code or "UNKNOWN_ERROR"
        self.details = details or {}

    def to_dict(self) -> Dict[str, Any]:
        """Convert error to dictionary for logging/serialization."""
        return {
            "error_type": self.__class__.__name__,
            "error_code": self.error_code,
            "message": self.message,
            "details": self.details,
            "exit_code": self.exit_code,
        }


class ConfigurationError(PrivateSpeechError):
    """Errors related to configuration files, flags and settings."""

    exit_code = Config.EXIT_CONFIG


class DataError(PrivateSpeechError):
    """Errors related to raw recordings, labels and prepared caches."""

    exit_code = Config.EXIT_DATA


class LabeledDataError(DataError):
    """A recording has no usable label (filename or speaker metadata)."""
    pass


class WavParseError(DataError):
    """A WAV file could not be decoded."""
    pass


class PreparationError(DataError):
    """A clip cannot be (or was not) brought to the prepared rate/length."""
    pass


class SplitError(DataError):
    """Not enough speakers to build a gender-balanced split."""
    pass


class CacheFormatError(DataError):
    """A binary tensor cache or its sidecar is malformed."""
    pass


class EvaluationError(DataError):
    """Evaluation was asked to run on unusable input."""
    pass


class EvaluationValidityError(EvaluationError):
    """A fixed classifier is not good enough to make its metric meaningful."""
    pass


class CompatibilityError(PrivateSpeechError):
    """Checkpoints, statistics or configs that do not belong together."""

    exit_code = Config.EXIT_COMPATIBILITY


class CheckpointTypeError(CompatibilityError):
    """A checkpoint of the wrong kind was handed to a loader."""
    pass


class CheckpointFormatError(CompatibilityError):
    """A checkpoint file is truncated or not a checkpoint at all."""
    pass


class NumericError(PrivateSpeechError):
    """Numerical failures and out-of-domain numeric inputs."""

    exit_code = Config.EXIT_NUMERIC


class DimensionError(NumericError):
    """Array shapes do not satisfy an operation's contract."""
    pass


class DomainError(NumericError):
    """A value lies outside the mathematical domain of an operation."""
    pass


class DegenerateStatisticsError(NumericError):
    """Normalization statistics with a non-positive scale."""
    pass


class TrainingFaultError(NumericError):
    """A non-finite loss was produced during adversarial training."""
    pass


class VocoderDivergenceError(NumericError):
    """Vocoder losses exploded for a sustained window of steps."""
    pass


class ErrorHandler:
    """
    Centralized error handling and recovery system.

    Provides consistent error handling patterns, logging, and recovery
    strategies across all pipeline steps.
    """

    def __init__(self, module_name: str = "unknown"):
        self.module_name = module_name
        self.logger = logging.getLogger(f"error_handler.{module_name}")

    def handle_error(
        self,
        error: Exception,
        context: str = "",
        recovery_strategy: Optional[Callable] = None,
        reraise: bool = True,
        log_level: int = logging.ERROR
    ) -> Any:
        """
        Handle an error with standardized logging and optional recovery.

        Args:
            error: The exception that occurred
            context: Additional context about where the error occurred
            recovery_strategy: Optional function to attempt recovery
            reraise: Whether to reraise the exception after handling
            log_level: Logging level for the error

        Returns:
            Result of recovery strategy if successful, None otherwise
        """
        error_context = {
            "module": self.module_name,
            "context": context,
            "error_type": type(error).__name__,
            "error_message": str(error),
            "traceback": traceback.format_exc(),
        }
        if isinstance(error, PrivateSpeechError):
            error_context["error_code"] = error.error_code

        self.logger.log(
            log_level,
            f"Error in {self.module_name}: {context} - {type(error).__name__}: {error}",
            extra={"error_context": error_context}
        )

        if recovery_strategy:
            try:
                self.logger.info(f"Attempting recovery strategy for {context}")
                result = recovery_strategy()
                self.logger.info(f"Recovery successful for {context}")
                return result
            except Exception as recovery_error:
                self.logger.error(f"Recovery failed for {context}: {recovery_error}")

        if reraise:
            raise error

        return None


def error_handler(module_name: str = "unknown", reraise: bool = True, recovery_strategy: Optional[Callable] = None):
    """
    Decorator for standardized error handling on functions.

    Args:
        module_name: Name of the module for error context
        reraise: Whether to reraise exceptions after handling
        recovery_strategy: Optional recovery function
    """
    def decorator(func: Callable) -> Callable:
        @functools.wraps(func)
        def wrapper(*args, **kwargs):
            handler = ErrorHandler(module_name)
            try:
                return func(*args, **kwargs)
            except Exception as error:
                return handler.handle_error(
                    error=error,
                    context=f"{func.__name__}",
                    recovery_strategy=recovery_strategy,
                    reraise=reraise
                )
        return wrapper
    return decorator


def create_error_context(operation: str, **kwargs) -> Dict[str, Any]:
    """
    Create standardized error context dictionary.

    Args:
        operation: Description of the operation
        **kwargs: Additional context data

    Returns:
        Error context dictionary
    """
    return {
        "operation": operation,
        "timestamp": time.strftime("%Y-%m-%d %H:%M:%S"),
        "context_id": uuid.uuid4().hex[:12],
        **kwargs
    }


def log_error_with_context(logger: logging.Logger, error: Any, context: Dict[str, Any]):
    """
    Log error with structured context information.

    Args:
        logger: Logger instance to use
        error: Exception (or message) that occurred
        context: Context information dictionary
    """
    extras = " | ".join(f"{key}={value}" for key, value in context.items() if key != "operation")
    error_name = type(error).__name__ if isinstance(error, BaseException) else "Error"
    logger.error(
        f"Error in {context.get('operation', 'unknown operation')}: {error_name}: {error} | {extras}"
    )


def exit_code_for(error: BaseException) -> int:
    """Map an exception to the process exit code used by the command line."""
    if isinstance(error, PrivateSpeechError):
        return error.exit_code
    return Config.EXIT_UNKNOWN
