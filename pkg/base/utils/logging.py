import sys
import warnings
from typing import Optional, Type

from loguru import logger

EVENTS_ROTATION = "10 MB"
DEFAULT_LOG_BACKUP_COUNT = 10


def setup_logging(
    level: str = "INFO",
    *,
    json_logs: bool = False,
    events_path: Optional[str] = None,
) -> None:
    """Reset loguru sinks: stderr at ``level`` plus an optional rotating event file."""
    logger.remove()
    # ANSI codes would end up inside serialized records
    ColoredLogger.plain = json_logs
    logger.add(
        sys.stderr,
        level=level,
        serialize=json_logs,
        format="<green>{time:HH:mm:ss}</green> | <level>{level: <8}</level> | {message}",
    )
    if events_path:
        logger.add(
            events_path,
            level="INFO",
            rotation=EVENTS_ROTATION,
            retention=DEFAULT_LOG_BACKUP_COUNT,
            format="{time:YYYY-MM-DD HH:mm:ss} | {level} | {message}",
        )


class ColoredLogger:
    """A simple logger that uses ANSI colors when calling loguru methods."""

    plain: bool = False

    _COLORS = {
        "blue": "\033[94m",
        "yellow": "\033[93m",
        "red": "\033[91m",
        "green": "\033[92m",
        "gray": "\033[90m",
        "reset": "\033[0m",
    }

    @staticmethod
    def _colored_msg(message: str, color: str) -> str:
        if ColoredLogger.plain or color not in ColoredLogger._COLORS:
            return message
        return f"{ColoredLogger._COLORS[color]}{message}{ColoredLogger._COLORS['reset']}"

    @staticmethod
    def debug(message: str, color: str = "gray") -> None:
        logger.opt(depth=1).debug(ColoredLogger._colored_msg(message, color))

    @staticmethod
    def info(message: str, color: str = "blue") -> None:
        logger.opt(depth=1).info(ColoredLogger._colored_msg(message, color))

    @staticmethod
    def warning(message: str, color: str = "yellow") -> None:
        logger.opt(depth=1).warning(ColoredLogger._colored_msg(message, color))

    @staticmethod
    def error(message: str, color: str = "red") -> None:
        logger.opt(depth=1).error(ColoredLogger._colored_msg(message, color))

    @staticmethod
    def success(message: str, color: str = "green") -> None:
        logger.opt(depth=1).success(ColoredLogger._colored_msg(message, color))

    @staticmethod
    def warn_condition(message: str, category: Type[Warning] = UserWarning) -> None:
        """Log a guard violation and emit it through ``warnings`` so tests can catch it."""
        ColoredLogger.warning(message)
        warnings.warn(message, category, stacklevel=3)
