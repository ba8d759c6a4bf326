"""
Global configuration entry‑point.

▪ Loads environment variables from `.env` (if present)
▪ Exposes a single singleton `settings` object
▪ Every knob is overridable with a ``SKETCHFL_`` prefixed environment variable
"""

from __future__ import annotations

from functools import lru_cache
from typing import Optional

from dotenv import load_dotenv
from pydantic import Field, field_validator
from pydantic_settings import BaseSettings, SettingsConfigDict

# ──────────────────────────────────────────────────────────────
# 0. Load .env early so that pydantic can pick up the variables
# ──────────────────────────────────────────────────────────────
load_dotenv()

DEFAULT_SEED = 20_240_601
BITS_PER_FLOAT = 64
U64_MASK = (1 << 64) - 1


# ──────────────────────────────────────────────────────────────
# 1. Settings object (use everywhere instead of os.getenv)
# ──────────────────────────────────────────────────────────────
class _Settings(BaseSettings):
    model_config = SettingsConfigDict(
        env_prefix="SKETCHFL_",
        env_file=".env",
        case_sensitive=False,
        extra="ignore",
    )

    # --- General process switches ------------------------------------------------
    LOG_LEVEL: str = Field("INFO")  # TRACE / DEBUG / INFO / WARNING / ERROR
    JSON_LOGS: bool = Field(False)
    EVENTS_LOG: Optional[str] = Field(None)  # rotating event log, off when unset
    PROGRESS: bool = Field(False)  # tqdm bars over seed loops

    # --- Experiment defaults -----------------------------------------------------
    SEED: int = Field(DEFAULT_SEED, ge=0, le=U64_MASK)
    OUT_DIR: str = Field("runs")
    MAX_CONCURRENCY: int = Field(4, ge=1)  # seeds / sweep points in parallel

    # --- Statistical tolerances --------------------------------------------------
    Z_SCORE: float = Field(5.0, gt=0)
    BOUND_SLACK: float = Field(1.2, ge=1.0)
    N_SEEDS: int = Field(20, ge=1)

    @field_validator("LOG_LEVEL")
    @classmethod
    def _validate_log_level(cls, v: str) -> str:
        allowed = {"CRITICAL", "ERROR", "WARNING", "INFO", "DEBUG", "TRACE"}
        v_up = v.upper()
        if v_up not in allowed:
            raise ValueError(f"LOG_LEVEL must be one of {allowed}")
        return v_up


@lru_cache(maxsize=1)
def get_settings() -> _Settings:
    """Singleton accessor – import this everywhere."""
    return _Settings()


settings = get_settings()
