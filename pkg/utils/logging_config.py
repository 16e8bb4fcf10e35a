"""
Logging configuration for the private speech pipeline.
"""

import logging
import sys
from logging.handlers import RotatingFileHandler
from pathlib import Path
from typing import Optional, Union

from settings.config import Config

ROOT_LOGGER_NAME = "private_speech"


def setup_logging(
    log_level: Union[int, str] = Config.LOG_LEVEL,
    log_file: Optional[Union[str, Path]] = None,
    max_bytes: int = Config.LOG_MAX_BYTES,
    backup_count: int = Config.LOG_BACKUP_COUNT
) -> logging.Logger:
    """
    Configure logging system with file and console handlers.

    Args:
        log_level: Logging level (e.g., logging.DEBUG, "INFO")
        log_file: Path to log file. If None, uses Config.LOG_FILE
        max_bytes: Maximum size of log file before rotation
        backup_count: Number of backup log files to keep

    Returns:
        Configured logger instance
    """
    if isinstance(log_level, str):
        log_level = logging.getLevelName(log_level.upper())
        if not isinstance(log_level, int):
            log_level = logging.INFO

    log_file = Path(log_file or Config.LOG_FILE)
    log_file.parent.mkdir(parents=True, exist_ok=True)

    logger = logging.getLogger(ROOT_LOGGER_NAME)
    logger.setLevel(log_level)

    # Avoid duplicate handlers if logger is already configured
    if logger.handlers:
        for handler in logger.handlers:
            handler.setLevel(log_level)
        return logger

    file_formatter = logging.Formatter(
        '%(asctime)s - %(name)s - %(levelname)s - %(funcName)s:%(lineno)d - %(message)s'
    )
    console_formatter = logging.Formatter(
        '%(levelname)s - %(message)s'
    )

    file_handler = RotatingFileHandler(
        log_file,
        maxBytes=max_bytes,
        backupCount=backup_count,
        encoding='utf-8'
    )
    file_handler.setLevel(log_level)
    file_handler.setFormatter(file_formatter)

    console_handler = logging.StreamHandler(sys.stdout)
    console_handler.setLevel(log_level)
    console_handler.setFormatter(console_formatter)

    logger.addHandler(file_handler)
    logger.addHandler(console_handler)

    logger.info(f"Logging configured - Level: {logging.getLevelName(log_level)}, File: {log_file}")

    return logger


def get_logger(name: str = ROOT_LOGGER_NAME) -> logging.Logger:
    """
    Get a logger instance.

    Args:
        name: Logger name (becomes a child of private_speech)

    Returns:
        Logger instance
    """
    if name == ROOT_LOGGER_NAME or name.startswith(f"{ROOT_LOGGER_NAME}."):
        return logging.getLogger(name)
    return logging.getLogger(f"{ROOT_LOGGER_NAME}.{name}")
