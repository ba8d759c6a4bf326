"""
Loading experiment files and resolving run-wide overrides.

Precedence for the seed and the output directory:
command-line flag  >  ``SKETCHFL_SEED`` / ``SKETCHFL_OUT_DIR``  >  file  >  defaults.
"""
from __future__ import annotations

import json
import os
import sys

if sys.version_info >= (3, 11):
    import tomllib
else:  # pragma: no cover - Python 3.10 backport with the same API
    import tomli as tomllib
from pathlib import Path
from typing import Any, Dict, Optional, Union

from pydantic import ValidationError

from api.schemas import ExperimentConfig
from base.errors import ConfigError, InvalidSpec
from base.utils.logging import ColoredLogger
from config import settings

PathLike = Union[str, Path]


def _dotted(loc) -> str:
    return ".".join(str(part) for part in loc)


def parse_config(data: Dict[str, Any]) -> ExperimentConfig:
    """Validate a mapping; unknown or invalid keys raise ``ConfigError`` naming the key."""
    try:
        cfg = ExperimentConfig.model_validate(data)
    except ValidationError as exc:
        first = exc.errors()[0]
        raise ConfigError(_dotted(first["loc"]) or "<root>", first["msg"]) from exc
    try:
        return cfg.check()
    except InvalidSpec as exc:
        raise ConfigError(exc.field or "<root>", str(exc)) from exc


def load_config(path: PathLike) -> ExperimentConfig:
    path = Path(path)
    try:
        text = path.read_text()
    except OSError as exc:
        raise ConfigError("--config", f"cannot read {path}: {exc.strerror}") from exc
    try:
        if path.suffix.lower() == ".json":
            data = json.loads(text)
        else:
            data = tomllib.loads(text)
    except (json.JSONDecodeError, tomllib.TOMLDecodeError) as exc:
        raise ConfigError("--config", f"{path} does not parse: {exc}") from exc
    ColoredLogger.debug(f"[Harness] loaded {path}")
    return parse_config(data)


def dump_config(cfg: ExperimentConfig) -> str:
    """JSON form that ``parse_config(json.loads(...))`` reads back to an equal config."""
    return json.dumps(cfg.model_dump(mode="json", exclude_none=True), indent=2, sort_keys=True)


def _reseed(cfg: ExperimentConfig, seed: int) -> ExperimentConfig:
    """The global seed drives every operator draw; fixtures keep their own seeds."""
    update: Dict[str, Any] = {"seed": seed}
    if cfg.run is not None:
        update["run"] = cfg.run.model_copy(
            update={"sketch": cfg.run.sketch.model_copy(update={"master_seed": seed})})
    if cfg.verify is not None:
        update["verify"] = cfg.verify.model_copy(update={"master_seed": seed})
    if cfg.attack is not None and cfg.attack.sketch is not None:
        update["attack"] = cfg.attack.model_copy(
            update={"sketch": cfg.attack.sketch.model_copy(update={"master_seed": seed})})
    return cfg.model_copy(update=update)


def resolve(
    cfg: ExperimentConfig,
    *,
    seed: Optional[int] = None,
    out: Optional[str] = None,
    assertions: Optional[bool] = None,
) -> ExperimentConfig:
    if seed is None and "SKETCHFL_SEED" in os.environ:
        seed = settings.SEED
    if seed is None:
        seed = cfg.seed
    if seed is not None:
        cfg = _reseed(cfg, seed)

    if out is None:
        out = settings.OUT_DIR if "SKETCHFL_OUT_DIR" in os.environ else (cfg.out_dir or settings.OUT_DIR)
    update: Dict[str, Any] = {"out_dir": out}
    if assertions is not None:
        update["assertions"] = assertions
    return cfg.model_copy(update=update)
