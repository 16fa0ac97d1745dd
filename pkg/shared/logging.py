"""Logging configuration using Loguru.

- Console sink: ``stderr`` so that JSON printed by the CLI on ``stdout`` stays
  machine-readable; level from ``HMIL_LOG_LEVEL`` (default ``INFO``)
- File sink: captures ALL logs (DEBUG+) to ``<HMIL_LOG_DIR>/YYYY-MM-DD.log``;
  disabled when ``HMIL_LOG_DIR`` is set to an empty string
"""

import sys
from datetime import datetime
from pathlib import Path
from typing import Optional, Union

from loguru import logger as _loguru_logger

from .settings import get_settings


_CONFIGURED: bool = False

_FORMAT = "{time:YYYY-MM-DD HH:mm:ss} - {name} - {level} - {message}"


def _configure_loguru(console_level: Optional[Union[int, str]] = None) -> None:
    """Configure Loguru sinks once per process.

    :param console_level: Console log level override (e.g. ``"DEBUG"``). When
                          omitted, the level comes from :mod:`shared.settings`.
    :returns: ``None``.
    """
    global _CONFIGURED
    if _CONFIGURED:
        return

    settings = get_settings()
    level = console_level if console_level is not None else settings.log_level

    # Remove default sink to avoid duplicate outputs
    try:
        _loguru_logger.remove()
    except Exception:
        pass

    _loguru_logger.add(
        sys.stderr,
        level=level,
        format=_FORMAT,
        enqueue=False,
        diagnose=False,
        backtrace=False,
    )

    if settings.log_dir:
        logs_dir = Path(settings.log_dir)
        logs_dir.mkdir(parents=True, exist_ok=True)
        log_filepath = logs_dir / f"{datetime.now().strftime('%Y-%m-%d')}.log"
        _loguru_logger.add(
            str(log_filepath),
            level="DEBUG",
            format=_FORMAT,
            rotation="00:00",
            encoding="utf-8",
            enqueue=False,
            diagnose=False,
            backtrace=False,
        )

    _CONFIGURED = True


def set_console_level(level: Union[int, str]) -> None:
    """Reconfigure sinks with a new console level (used by ``--verbose``).

    :param level: Loguru level name or number.
    :returns: ``None``.
    """
    global _CONFIGURED
    _CONFIGURED = False
    _configure_loguru(console_level=level)


def get_logger(name: str):
    """Get configured Loguru logger.

    :param name: Logger name (unused by Loguru, which reads ``{name}`` from the
                 call site; kept so every module reads the same way).
    :returns: Configured Loguru logger.
    """
    _configure_loguru()
    return _loguru_logger
