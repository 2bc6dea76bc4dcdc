"""
The ``rappca`` logger. Records go to stderr so command output on stdout stays
machine-readable; lines are colored per level only when stderr is a terminal.

Environment:
    LOG_LEVEL   level name (DEBUG, INFO, ...), default INFO
    DEBUG       1/true/yes forces DEBUG
"""

import logging
import os
import sys
import time
from contextlib import contextmanager
from typing import Iterator, Optional, Union

__all__ = ["LOGGER_NAME", "logger", "resolve_level", "setup_logger", "progress", "timed_stage"]

LOGGER_NAME = "rappca"

LEVEL_COLORS = {
    logging.DEBUG: '\033[0;36m',
    logging.INFO: '\033[0;32m',
    logging.WARNING: '\033[0;33m',
    logging.ERROR: '\033[0;31m',
    logging.CRITICAL: '\033[0;35m',
}
RESET = '\033[0m'

LINE_FORMAT = '[%(asctime)s] %(levelname)-8s %(module)s:%(lineno)d - %(message)s'
TIME_FORMAT = '%H:%M:%S'


class LevelColorFormatter(logging.Formatter):
    """Wraps each formatted record in the color of its level."""

    def __init__(self, use_color: bool):
        super().__init__(fmt=LINE_FORMAT, datefmt=TIME_FORMAT)
        self.use_color = use_color

    def format(self, record):
        line = super().format(record)
        color = LEVEL_COLORS.get(record.levelno)
        return f"{color}{line}{RESET}" if self.use_color and color else line


def resolve_level(level: Union[int, str, None] = None) -> int:
    """An explicit level wins, then DEBUG=1, then LOG_LEVEL, then INFO."""
    if isinstance(level, int):
        return level
    if level is None:
        if os.getenv('DEBUG', '').lower() in ('1', 'true', 'yes'):
            return logging.DEBUG
        level = os.getenv('LOG_LEVEL', 'INFO')
    resolved = logging.getLevelName(str(level).upper())
    return resolved if isinstance(resolved, int) else logging.INFO


def setup_logger(level: Union[int, str, None] = None, log_file: Optional[str] = None) -> logging.Logger:
    """
    (Re)configure the package logger.

    Args:
        level: level number or name; None reads the environment
        log_file: also append uncolored lines to this file

    Returns:
        the ``rappca`` logger
    """
    log = logging.getLogger(LOGGER_NAME)
    log.setLevel(resolve_level(level))
    for handler in list(log.handlers):
        log.removeHandler(handler)
        handler.close()
    log.propagate = False

    console = logging.StreamHandler(sys.stderr)
    console.setFormatter(LevelColorFormatter(use_color=sys.stderr.isatty()))
    log.addHandler(console)

    if log_file:
        file_handler = logging.FileHandler(log_file, encoding="utf-8")
        file_handler.setFormatter(LevelColorFormatter(use_color=False))
        log.addHandler(file_handler)
    return log


logger = setup_logger()


def progress(stage: str, message: str, *, done: Optional[bool] = None) -> None:
    """One ``[stage] message`` line; done=True/False appends ok/FAILED."""
    suffix = {True: " ok", False: " FAILED"}.get(done, "")
    logger.info(f"[{stage}] {message}{suffix}")


@contextmanager
def timed_stage(stage: str) -> Iterator[None]:
    """Log the wall time of a block under its stage name, also when it raises."""
    start = time.perf_counter()
    failed = False
    try:
        yield
    except BaseException:
        failed = True
        raise
    finally:
        progress(stage, f"finished in {time.perf_counter() - start:.2f}s", done=not failed)
