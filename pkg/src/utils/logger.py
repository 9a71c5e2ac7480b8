"""
Logger Configuration
Console and file logging for the gradient camera toolkit
"""

import logging
import sys
from pathlib import Path
from typing import Optional, Union

APP_LOGGER = 'gradcam'
LOG_FORMAT = '%(asctime)s - %(name)s - %(levelname)s - %(message)s'
DATE_FORMAT = '%Y-%m-%d %H:%M:%S'


def _resolve_level(level: Union[int, str]) -> int:
    if isinstance(level, int):
        return level
    resolved = logging.getLevelName(str(level).upper())
    if not isinstance(resolved, int):
        raise ValueError(f"Unknown log level: {level}")
    return resolved


def _handler(handler: logging.Handler, level: int) -> logging.Handler:
    handler.setLevel(level)
    handler.setFormatter(logging.Formatter(LOG_FORMAT, datefmt=DATE_FORMAT))
    return handler


def setup_logger(name: str = APP_LOGGER,
                 level: Union[int, str] = logging.INFO,
                 log_file: Optional[str] = None) -> logging.Logger:
    """
    Configure the application logger.

    Calling it again only adjusts levels; handlers are attached once.
    Module loggers from ``get_logger`` propagate here.
    """
    level = _resolve_level(level)
    logger = logging.getLogger(name)
    logger.setLevel(level)

    if logger.handlers:
        for existing in logger.handlers:
            existing.setLevel(level)
        return logger

    logger.addHandler(_handler(logging.StreamHandler(sys.stdout), level))

    if log_file:
        path = Path(log_file)
        path.parent.mkdir(parents=True, exist_ok=True)
        logger.addHandler(_handler(logging.FileHandler(path, encoding='utf-8'), level))

    return logger


def get_logger(module: str) -> logging.Logger:
    """Child logger of the application logger, e.g. ``gradcam.raster``"""
    return logging.getLogger(f"{APP_LOGGER}.{module.rsplit('.', 1)[-1]}")
