from __future__ import annotations

import time
import traceback
from abc import ABC, abstractmethod
from pathlib import Path
from typing import List, Optional

from api.schemas import ExperimentConfig
from base.errors import ConfigError
from base.utils.config import add_args, check_config, config
from base.utils.logging import ColoredLogger
from storage.models import RunSummary
from storage.writers import write_json


class BaseExperiment(ABC):
    """
    Base class for the subcommands. A subclass declares its ``command`` name,
    the config sections it ``requires`` and implements ``run``; ``execute``
    wraps it with output-directory handling, timing and the summary file.
    """

    command: str = "experiment"
    requires: tuple = ()

    @classmethod
    def check_config(cls, config):
        return check_config(cls, config)

    @classmethod
    def add_args(cls, parser):
        add_args(cls, parser)

    @classmethod
    def config(cls, argv=None):
        return config(cls, argv)

    def __init__(self, cfg: ExperimentConfig) -> None:
        missing = [s for s in self.requires if getattr(cfg, s) is None]
        if missing:
            raise ConfigError(missing[0], f"section required by {self.command}")
        self.cfg = cfg
        self.out_dir = Path(cfg.out_dir or ".") / self.command
        self.summary = RunSummary(command=self.command)

    # ------------------------------------------------------------------ #
    @property
    def assertions_enabled(self) -> bool:
        return self.cfg.assertions

    def check(self, name: str, ok: bool) -> bool:
        """Record one assertion outcome."""
        self.summary.assertions[name] = bool(ok)
        if not ok:
            ColoredLogger.warning(f"[Harness] assertion {name!r} does not hold")
        return bool(ok)

    def warn(self, messages: List[str]) -> None:
        for m in messages:
            if m not in self.summary.warnings:
                self.summary.warnings.append(m)

    def artifact(self, path: Path) -> Path:
        self.summary.artifacts.append(str(path))
        return path

    @abstractmethod
    def run(self) -> None: ...

    def execute(self) -> RunSummary:
        ColoredLogger.info(f"[Harness] {self.command} → {self.out_dir}")
        self.out_dir.mkdir(parents=True, exist_ok=True)
        start = time.perf_counter()
        try:
            self.run()
        except Exception:
            ColoredLogger.debug(traceback.format_exc())
            raise
        elapsed = time.perf_counter() - start
        ColoredLogger.info(f"[Harness] {self.command} finished in {elapsed:.2f}s")
        self.save_state()
        return self.summary

    def save_state(self) -> Optional[Path]:
        path = self.out_dir / "summary.json"
        self.summary.artifacts.append(str(path))
        write_json(path, {
            "command": self.summary.command,
            "passed": self.summary.passed,
            "assertions": self.summary.assertions,
            "metrics": self.summary.metrics,
            "warnings": self.summary.warnings,
            "artifacts": self.summary.artifacts,
        })
        return path
