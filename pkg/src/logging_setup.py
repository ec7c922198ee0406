"""Logging configuration helper."""

from __future__ import annotations

import logging
import sys
from logging.handlers import RotatingFileHandler
from pathlib import Path
from typing import Optional

LOG_DIR = Path(__file__).resolve().parent.parent / "logs"
LOG_NAME = "nmgle.log"
LOG_FILE = LOG_DIR / LOG_NAME
LOG_FORMAT = "%(asctime)s | %(levelname)s | %(name)s | %(message)s"

# Marks handlers installed here so repeated calls replace instead of stacking.
_HANDLER_TAG = "_nmgle_handler"


def _tagged(handler: logging.Handler) -> logging.Handler:
    setattr(handler, _HANDLER_TAG, True)
    return handler


def configure_logging(
    level: int = logging.INFO,
    log_dir: Optional[Path] = None,
    max_bytes: int = 1_000_000,
    backups: int = 5,
    *,
    console: bool = True,
) -> Path:
    """Configure a rotating file handler (and a stderr warning handler) on the root logger.

    Returns the log file path.
    """

    directory = Path(log_dir) if log_dir is not None else LOG_DIR
    directory.mkdir(parents=True, exist_ok=True)
    log_file = directory / LOG_NAME

    root = logging.getLogger()
    for handler in list(root.handlers):
        if getattr(handler, _HANDLER_TAG, False):
            root.removeHandler(handler)
            handler.close()

    formatter = logging.Formatter(LOG_FORMAT, datefmt="%Y-%m-%d %H:%M:%S")
    handler = _tagged(RotatingFileHandler(log_file, maxBytes=max_bytes, backupCount=backups, encoding="utf-8"))
    handler.setFormatter(formatter)
    root.addHandler(handler)

    if console:
        stream = _tagged(logging.StreamHandler(sys.stderr))
        stream.setLevel(logging.WARNING)
        stream.setFormatter(logging.Formatter("%(levelname)s: %(message)s"))
        root.addHandler(stream)

    root.setLevel(level)
    return log_file


__all__ = ["configure_logging", "LOG_DIR", "LOG_FILE", "LOG_NAME"]
