"""
Utility modules for the private speech pipeline.
"""

from .error_handler import (
    CompatibilityError,
    ConfigurationError,
    DataError,
    NumericError,
    PrivateSpeechError,
    error_handler,
    exit_code_for,
)
from .logging_config import get_logger, setup_logging
from .logging_utils import get_structured_logger, log_step, performance_logger

__all__ = [
    'PrivateSpeechError',
    'ConfigurationError',
    'DataError',
    'CompatibilityError',
    'NumericError',
    'error_handler',
    'exit_code_for',
    'setup_logging',
    'get_logger',
    'get_structured_logger',
    'log_step',
    'performance_logger',
]
