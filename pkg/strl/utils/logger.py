"""Logging configuration for the STRL anomaly detector."""

import logging
import sys
from pathlib import Path

from strl.config import DEBUG_MODE, LOG_DIR


def setup_logger(name="strl"):
    """
    Setup and configure logger with console and file output.

    Calling it again for the same name replaces the handlers, so modules can
    grab a logger at import time and the CLI can re-run it after changing
    the environment.

    Args:
        name: Logger name

    Returns:
        Configured logger instance
    """
    logger = logging.getLogger(name)

    log_level = logging.DEBUG if DEBUG_MODE else logging.INFO
    logger.setLevel(log_level)
    logger.propagate = False

    # Remove existing handlers if any
    for handler in logger.handlers:
        handler.close()
    logger.handlers = []

    console_handler = logging.StreamHandler(sys.stdout)
    console_handler.setLevel(log_level)
    console_formatter = logging.Formatter(
        '%(asctime)s - %(name)s - %(levelname)s - %(message)s',
        datefmt='%Y-%m-%d %H:%M:%S'
    )
    console_handler.setFormatter(console_formatter)
    logger.addHandler(console_handler)

    log_dir = Path(LOG_DIR)
    try:
        log_dir.mkdir(parents=True, exist_ok=True)
        file_handler = logging.FileHandler(log_dir / "strl.log", delay=True)
    except OSError:
        # Read-only checkout: console only
        return logger

    file_handler.setLevel(log_level)
    file_formatter = logging.Formatter(
        '%(asctime)s - %(name)s - %(levelname)s - %(funcName)s:%(lineno)d - %(message)s',
        datefmt='%Y-%m-%d %H:%M:%S'
    )
    file_handler.setFormatter(file_formatter)
    logger.addHandler(file_handler)

    return logger
