"""
Command-line arguments shared by every experiment.

Flags use dotted names the way the rest of the tree nests its settings
(``--out``, ``--log.level``, ...); ``check_config`` fills what the command
line leaves unset for logging from ``config.settings`` (``SKETCHFL_*`` variables).
"""
from __future__ import annotations

import argparse
from pathlib import Path
from typing import Optional, Sequence

from api.schemas import SketchKind
from base.utils.logging import setup_logging
from config import U64_MASK, settings


def _u64(text: str) -> int:
    value = int(text, 0)
    if not 0 <= value <= U64_MASK:
        raise argparse.ArgumentTypeError(f"seed must fit in 64 bits, got {text}")
    return value


def check_config(cls, config: argparse.Namespace) -> argparse.Namespace:
    r"""Set up logging for the run; seed and output fallbacks are resolved with the file."""
    if config.out is not None:
        config.out = str(Path(config.out).expanduser())
    level = getattr(config, "log.level") or ("WARNING" if config.quiet else settings.LOG_LEVEL)
    setup_logging(level.upper(), json_logs=getattr(config, "log.json") or settings.JSON_LOGS,
                  events_path=settings.EVENTS_LOG)
    return config


def add_args(cls, parser: argparse.ArgumentParser) -> None:
    """
    Adds the arguments every subcommand accepts.
    """
    parser.add_argument("--config", type=str, help="TOML or JSON experiment file.", default=None)

    parser.add_argument(
        "--seed",
        type=_u64,
        help="Global seed (overrides SKETCHFL_SEED and the file).",
        default=None,
    )

    parser.add_argument(
        "--out",
        type=str,
        help="Output directory (overrides SKETCHFL_OUT_DIR and the file).",
        default=None,
    )

    parser.add_argument(
        "--assert",
        dest="assertions",
        action="store_true",
        help="Fail (exit code 1) when an enabled assertion does not hold.",
        default=None,
    )

    parser.add_argument(
        "--no-assert",
        dest="assertions",
        action="store_false",
        help="Report assertions without failing on them.",
    )

    parser.add_argument(
        "--quiet",
        action="store_true",
        help="No summary table; log warnings and errors only.",
        default=False,
    )

    parser.add_argument(
        "--log.level",
        type=str,
        choices=["TRACE", "DEBUG", "INFO", "WARNING", "ERROR", "CRITICAL"],
        help="Log level (overrides SKETCHFL_LOG_LEVEL).",
        default=None,
    )

    parser.add_argument(
        "--log.json",
        action="store_true",
        help="Serialize log records as JSON.",
        default=False,
    )


def add_verify_args(cls, parser: argparse.ArgumentParser) -> None:
    """verify-sketch only."""
    parser.add_argument(
        "--kinds",
        type=lambda s: [SketchKind(k.strip()) for k in s.split(",") if k.strip()],
        help="Comma-separated sketch kinds to certify (default: the file's or all).",
        default=None,
    )


def config(cls, argv: Optional[Sequence[str]] = None) -> argparse.Namespace:
    """
    Parse ``argv`` for a single experiment class.
    """
    parser = argparse.ArgumentParser(prog=f"sketchfl {cls.command}")
    cls.add_args(parser)
    return parser.parse_args(argv)
