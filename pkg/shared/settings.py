"""Process-level runtime settings.

Values are read from environment variables, optionally loaded from a ``.env``
file in the working directory.

Environment variables:
- ``HMIL_LOG_LEVEL``: console log level (default ``INFO``)
- ``HMIL_LOG_DIR``: directory of the DEBUG file sink (default ``logs``; empty
  string disables the file sink)
- ``HMIL_WORKERS``: default process count for ``compare`` (default ``1``)
"""

import os
from dataclasses import dataclass
from functools import lru_cache

from dotenv import load_dotenv


@dataclass(frozen=True)
class Settings:
    """In-memory runtime settings.

    :ivar log_level: Console log level name.
    :ivar log_dir: Directory for the file sink, or ``""`` to disable it.
    :ivar workers: Default number of worker processes for ablation sweeps.
    """

    log_level: str = "INFO"
    log_dir: str = "logs"
    workers: int = 1


def _read_settings() -> Settings:
    """Load settings from environment variables.

    :returns: A populated :class:`Settings` instance.
    """
    load_dotenv(override=False)
    level = os.getenv("HMIL_LOG_LEVEL", "INFO").strip().upper() or "INFO"
    log_dir = os.getenv("HMIL_LOG_DIR", "logs").strip()
    workers = 1
    raw_workers = os.getenv("HMIL_WORKERS", "").strip()
    if raw_workers:
        try:
            workers = max(1, int(raw_workers))
        except ValueError:
            workers = 1
    return Settings(log_level=level, log_dir=log_dir, workers=workers)


@lru_cache(maxsize=1)
def get_settings() -> Settings:
    """Return the cached process settings."""
    return _read_settings()
