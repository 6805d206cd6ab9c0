from __future__ import annotations

import os
import sys

from loguru import logger

_LEVELS = ('WARNING', 'INFO', 'DEBUG')


def configure_logging(verbosity: int = 0) -> None:
    """Enable resin logging on stderr.

    Args:
        verbosity: 0 for warnings only, 1 for progress, 2 or more for solver detail.
            `RESIN_LOG_LEVEL` overrides it when set.
    """
    level = os.getenv('RESIN_LOG_LEVEL') or _LEVELS[min(max(verbosity, 0), len(_LEVELS) - 1)]
    logger.remove()
    logger.add(
        sys.stderr,
        level=level.upper(),
        format='<green>{time:HH:mm:ss}</green> | <level>{level: <7}</level> | {name}:{function} - {message}',
    )
    logger.enable('resin')
