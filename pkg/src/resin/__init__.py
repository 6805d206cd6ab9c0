from __future__ import annotations

from loguru import logger

logger.disable('resin')
