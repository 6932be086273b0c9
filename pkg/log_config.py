"""
Logging setup shared by every module
"""
import logging

from rich.logging import RichHandler

LOGGER_NAME = "lindstedt"

logger = logging.getLogger(LOGGER_NAME)

if not logger.handlers:
    _handler = RichHandler(rich_tracebacks=True, show_path=False)
    _handler.setFormatter(logging.Formatter("%(message)s", datefmt="[%X]"))
    logger.addHandler(_handler)
    logger.setLevel(logging.WARNING)
    logger.propagate = False


def set_level(level: str):
    """Set the engine log level by name (DEBUG, INFO, ...)"""
    numeric = logging.getLevelName(level.upper())
    if not isinstance(numeric, int):
        raise ValueError(f"Unknown log level: {level}")
    logger.setLevel(numeric)
