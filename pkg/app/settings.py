from __future__ import annotations

import logging
import os
from typing import Optional


logger = logging.getLogger(__name__)

DEFAULT_APP_VERSION = "v0.3.0-0-g5d41a9c"


def _get_env(name: str) -> Optional[str]:
    value = os.getenv(name)
    return value.strip() if value else None


def app_version() -> str:
    return _get_env("APP_VERSION") or DEFAULT_APP_VERSION


def roll_workers() -> int:
    raw = _get_env("ROLL_WORKERS")
    if not raw:
        return 1
    try:
        workers = int(raw)
    except ValueError:
        logger.warning("Invalid ROLL_WORKERS value: %s", raw)
        return 1
    if workers < 1:
        logger.warning("ROLL_WORKERS must be >= 1, got %s", raw)
        return 1
    return workers


def log_level(default: int = logging.INFO) -> int:
    raw = _get_env("ROLL_LOG_LEVEL")
    if not raw:
        return default
    level = logging.getLevelName(raw.upper())
    if not isinstance(level, int):
        logger.warning("Invalid ROLL_LOG_LEVEL value: %s", raw)
        return default
    return level
