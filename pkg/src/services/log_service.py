# Logging Service - Centralized logging configuration for the cutoff toolkit.
import logging
import os
import sys
from typing import Final, Optional, Union

from resources.resource_config import LOG_LEVEL_ENV_VAR

# Define a constant for the log format to ensure consistency
LOG_FORMAT: Final[str] = '%(asctime)s - %(levelname)s - [%(name)s] - %(message)s'
DATE_FORMAT: Final[str] = '%Y-%m-%d %H:%M:%S'
DEFAULT_LEVEL: Final[int] = logging.WARNING


def resolve_level(level: Optional[Union[int, str]] = None) -> int:
    # Explicit level first, then the environment, then the default.
    candidate = level if level is not None else os.environ.get(LOG_LEVEL_ENV_VAR)
    if candidate is None or candidate == '':
        return DEFAULT_LEVEL
    if isinstance(candidate, int):
        return candidate
    resolved = logging.getLevelName(str(candidate).upper())
    return resolved if isinstance(resolved, int) else DEFAULT_LEVEL


def setup_logging(level: Optional[Union[int, str]] = None) -> None:
    # Configures the root logger; records go to stderr so stdout carries only data.
    logging.basicConfig(
        level=resolve_level(level),
        format=LOG_FORMAT,
        datefmt=DATE_FORMAT,
        stream=sys.stderr,
        force=True
    )


def get_logger(name: str) -> logging.Logger:
    # Retrieves a logger instance for a given module name.
    return logging.getLogger(name)
