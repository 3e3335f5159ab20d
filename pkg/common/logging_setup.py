"""Per-stage file loggers and the stage audit context manager."""
from __future__ import annotations

import logging
from contextlib import contextmanager
from pathlib import Path
from time import perf_counter
from typing import Iterator

from .config import get_settings

_FORMAT = "%(asctime)s | %(levelname)s | %(message)s"
_DATEFMT = "%Y-%m-%d %H:%M:%S"


def get_stage_logger(stage: str) -> logging.Logger:
    """Return the ``pathocl.<stage>`` logger, attaching its file handler once."""

    logger = logging.getLogger(f"pathocl.{stage}")
    if logger.handlers:
        return logger

    logger.setLevel(logging.INFO)
    log_dir = Path(get_settings().log_dir)
    try:
        log_dir.mkdir(parents=True, exist_ok=True)
        handler: logging.Handler = logging.FileHandler(log_dir / f"{stage}.log", encoding="utf-8")
    except OSError:
        handler = logging.StreamHandler()
    handler.setFormatter(logging.Formatter(_FORMAT, datefmt=_DATEFMT))
    logger.addHandler(handler)
    return logger


@contextmanager
def audit_stage(logger: logging.Logger, stage: str, **fields: object) -> Iterator[None]:
    """Log one line per stage run with outcome and duration."""

    start = perf_counter()
    detail = " ".join(f"{key}={value}" for key, value in fields.items())
    try:
        yield
    except Exception as exc:
        logger.error(
            "%s | status=failed | %s | error=%s | duration=%.2fms",
            stage,
            detail or "-",
            exc,
            (perf_counter() - start) * 1000,
        )
        raise
    logger.info("%s | status=ok | %s | duration=%.2fms", stage, detail or "-", (perf_counter() - start) * 1000)
