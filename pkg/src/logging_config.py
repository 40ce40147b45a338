"""Logging for the lab: coloured level tags on a terminal, plain ones elsewhere"""
import logging
import sys
import time
from contextlib import contextmanager
from typing import Iterator, Optional

ROOT_LOGGER = "qilab"

PLAIN_FORMAT = "%(levelname)s %(message)s"
VERBOSE_FORMAT = "%(levelname)s %(name)s: %(message)s"


class LogColors:
    """ANSI escapes used for level tags"""
    RESET = '\033[0m'
    RED = '\033[91m'
    YELLOW = '\033[93m'
    GREEN = '\033[92m'
    GRAY = '\033[90m'


class SimpleFormatter(logging.Formatter):
    """[LEVEL] tag without colour, for pipes and log files"""

    def _tag(self, record: logging.LogRecord) -> str:
        return f"[{record.levelname}]"

    def format(self, record):
        # copy so other handlers still see the bare level name
        record = logging.makeLogRecord(record.__dict__)
        record.levelname = self._tag(record)
        return super().format(record)


class ColoredFormatter(SimpleFormatter):
    COLORS = {
        logging.DEBUG: LogColors.GRAY,
        logging.INFO: LogColors.GREEN,
        logging.WARNING: LogColors.YELLOW,
        logging.ERROR: LogColors.RED,
        logging.CRITICAL: LogColors.RED,
    }

    def _tag(self, record: logging.LogRecord) -> str:
        color = self.COLORS.get(record.levelno, LogColors.RESET)
        return f"{color}[{record.levelname}]{LogColors.RESET}"


def setup_logging(verbose: bool = False, use_colors: bool = True,
                  log_file: Optional[str] = None) -> logging.Logger:
    """
    Configure the package logger.

    Args:
        verbose: DEBUG level and module names in every line
        use_colors: colour the level tag when stderr is a terminal
        log_file: also append plain lines to this file

    Returns:
        The "qilab" logger
    """
    logger = logging.getLogger(ROOT_LOGGER)
    logger.handlers.clear()
    logger.propagate = False

    level = logging.DEBUG if verbose else logging.INFO
    logger.setLevel(logging.DEBUG if log_file else level)
    fmt = VERBOSE_FORMAT if verbose else PLAIN_FORMAT

    # stdout carries CSV and JSON output
    console = logging.StreamHandler(sys.stderr)
    console.setLevel(level)
    colored = use_colors and sys.stderr.isatty()
    console.setFormatter(ColoredFormatter(fmt) if colored else SimpleFormatter(fmt))
    logger.addHandler(console)

    if log_file:
        to_file = logging.FileHandler(log_file, encoding="utf-8")
        to_file.setLevel(logging.DEBUG)
        to_file.setFormatter(SimpleFormatter("%(asctime)s " + VERBOSE_FORMAT))
        logger.addHandler(to_file)

    return logger


def get_logger(name: Optional[str] = None) -> logging.Logger:
    """Child of the package logger; "src.spaces" becomes "qilab.spaces"."""
    if name:
        return logging.getLogger(f"{ROOT_LOGGER}.{name.split('.')[-1]}")
    return logging.getLogger(ROOT_LOGGER)


@contextmanager
def log_timing(logger: logging.Logger, label: str, level: int = logging.INFO) -> Iterator[None]:
    """Log "<label> done in N.Ns" when the block exits normally."""
    start = time.perf_counter()
    yield
    logger.log(level, f"{label} done in {time.perf_counter() - start:.1f}s")
