"""
Pydantic schemas for every configuration section of an experiment.

Sections validate their own field ranges on construction. Cross-field
rules (``b_sketch <= d``, ``s | b_sketch``, ...) are checked by ``check()``
so the library can raise the domain errors of ``base.errors`` and the
config loader can name the offending key.
"""
from __future__ import annotations

from enum import Enum
from typing import List, Literal, Optional, Tuple

from pydantic import BaseModel, ConfigDict, Field, field_validator

from base.errors import InvalidSpec
from config import DEFAULT_SEED, U64_MASK


class SketchKind(str, Enum):
    GAUSSIAN = "gaussian"
    SRHT = "srht"
    AMS = "ams"
    COUNT_SKETCH = "countsketch"
    SPARSE_EMBEDDING = "sparse"
    UNIFORM_SAMPLING = "uniform"
    IDENTITY = "identity"


class _Section(BaseModel):
    model_config = ConfigDict(extra="forbid", frozen=True)


# ──────────────────────────────────────────────────────────────────
# Sketch operators
# ──────────────────────────────────────────────────────────────────
class SketchSpec(_Section):
    """
    Family, shape and master seed of a per-round sketch operator.

    • ``s`` is the column sparsity of ``SketchKind.SPARSE_EMBEDDING`` and is
      ignored by every other kind.
    • ``sparse_layout="blocked"`` places one nonzero in each of ``s`` blocks
      of ``b_sketch / s`` rows (requires ``s | b_sketch``); ``"random"`` picks
      the ``s`` rows of each column uniformly without replacement.
    """

    kind: SketchKind = SketchKind.GAUSSIAN
    d: int = Field(..., ge=1)
    b_sketch: int = Field(..., ge=1)
    master_seed: int = Field(DEFAULT_SEED, ge=0, le=U64_MASK)
    s: int = Field(1, ge=1)
    sparse_layout: Literal["blocked", "random"] = "blocked"

    def check(self) -> "SketchSpec":
        if self.b_sketch > self.d:
            raise InvalidSpec(
                f"b_sketch={self.b_sketch} exceeds d={self.d}", field="b_sketch"
            )
        if self.kind is SketchKind.IDENTITY and self.b_sketch != self.d:
            raise InvalidSpec(
                f"identity sketch needs b_sketch == d, got {self.b_sketch} != {self.d}",
                field="b_sketch",
            )
        if self.kind is SketchKind.SPARSE_EMBEDDING:
            if self.s > self.b_sketch:
                raise InvalidSpec(f"s={self.s} exceeds b_sketch={self.b_sketch}", field="s")
            if self.sparse_layout == "blocked" and self.b_sketch % self.s:
                raise InvalidSpec(
                    f"s={self.s} does not divide b_sketch={self.b_sketch}", field="s"
                )
        return self


# ──────────────────────────────────────────────────────────────────
# Differential privacy
# ──────────────────────────────────────────────────────────────────
class DPSpec(_Section):
    """Per-step privacy target and the quantities needed to compose it."""

    eps_hat: float = Field(..., gt=0, lt=1)
    delta_hat: float = Field(..., gt=0, lt=1)
    K: int = Field(1, ge=1)
    T: int = Field(1, ge=1)
    batch_size: Optional[int] = Field(None, ge=1)  # None = full local dataset
    lipschitz: Optional[List[float]] = None
    dataset_sizes: Optional[List[int]] = None
    n_clients: Optional[int] = Field(None, ge=1)
    delta_prime: Optional[float] = Field(None, gt=0, le=1)
    sigma_override: Optional[float] = Field(None, ge=0)

    @field_validator("lipschitz")
    @classmethod
    def _positive_lipschitz(cls, v: Optional[List[float]]) -> Optional[List[float]]:
        if v is not None and any(x <= 0 for x in v):
            raise ValueError("lipschitz bounds must be positive")
        return v


# ──────────────────────────────────────────────────────────────────
# Federated objective and run
# ──────────────────────────────────────────────────────────────────
class ObjectiveSpec(_Section):
    kind: Literal["quadratic", "logcosh"] = "quadratic"
    N: int = Field(8, ge=1)
    d: int = Field(64, ge=1)
    n_per_client: int = Field(64, ge=1)
    heterogeneity: float = Field(0.0, ge=0)
    seed: int = Field(DEFAULT_SEED, ge=0, le=U64_MASK)
    spectrum: Optional[Tuple[float, float]] = None  # (mu, L) of the shared Hessian
    rank: Optional[int] = Field(None, ge=1)
    ball_radius: Optional[float] = Field(None, gt=0)

    @field_validator("spectrum")
    @classmethod
    def _ordered_spectrum(cls, v: Optional[Tuple[float, float]]):
        if v is not None and not (0 <= v[0] <= v[1] and v[1] > 0):
            raise ValueError("spectrum must satisfy 0 <= mu <= L, L > 0")
        return v


class RunConfig(_Section):
    T: int = Field(..., ge=1)
    K: int = Field(1, ge=1)
    eta_local: float = Field(..., ge=0)
    eta_global: float = Field(1.0, gt=0)
    sketch: SketchSpec
    dp: Optional[DPSpec] = None
    n_seeds: int = Field(1, ge=1)
    record_average_iterate: bool = True
    regime: Optional[Literal["strongly_convex", "convex", "nonconvex"]] = None
    w0: Optional[List[float]] = None


# ──────────────────────────────────────────────────────────────────
# Harness sections
# ──────────────────────────────────────────────────────────────────
class VerifySpec(_Section):
    kinds: List[SketchKind] = Field(
        default_factory=lambda: [
            SketchKind.GAUSSIAN,
            SketchKind.SRHT,
            SketchKind.AMS,
            SketchKind.COUNT_SKETCH,
            SketchKind.SPARSE_EMBEDDING,
            SketchKind.UNIFORM_SAMPLING,
        ]
    )
    d: int = Field(256, ge=1)
    b_sketch: int = Field(64, ge=1)
    s: int = Field(2, ge=1)
    trials: int = Field(20_000, ge=1_000)
    delta: float = Field(0.01, gt=0, lt=1)
    master_seed: int = Field(DEFAULT_SEED, ge=0, le=U64_MASK)


class AttackSpec(_Section):
    model: Literal["linreg", "logistic"] = "linreg"
    d: int = Field(4, ge=1)
    m: int = Field(4, ge=1)
    feature_map: Literal["identity", "random", "rank_deficient"] = "identity"
    seed: int = Field(DEFAULT_SEED, ge=0, le=U64_MASK)
    sketch: Optional[SketchSpec] = None
    noise_sigma: float = Field(0.0, ge=0)
    dp: Optional[DPSpec] = None  # when set, noise_sigma is derived from it
    T_attack: int = Field(5_000, ge=1)
    n_seeds: int = Field(20, ge=1)
    multi_start: int = Field(8, ge=1)
    ball_radius: float = Field(0.1, gt=0)
    gradient_csv: Optional[str] = None


class SweepSpec(_Section):
    b_divisors: List[int] = Field(default_factory=lambda: [1, 2, 4, 8])
    kind: SketchKind = SketchKind.SRHT
    target_eps: float = Field(1e-6, gt=0)
    T_max: int = Field(20_000, ge=1)
    n_seeds: int = Field(5, ge=1)

    @field_validator("b_divisors")
    @classmethod
    def _non_empty(cls, v: List[int]) -> List[int]:
        if not v or any(x < 1 for x in v):
            raise ValueError("b_divisors must be a non-empty list of positive integers")
        return v


class ExperimentConfig(_Section):
    """One configuration file; each subcommand reads the sections it needs."""

    seed: Optional[int] = Field(None, ge=0, le=U64_MASK)
    out_dir: Optional[str] = None
    assertions: bool = True
    objective: Optional[ObjectiveSpec] = None
    run: Optional[RunConfig] = None
    privacy: Optional[DPSpec] = None
    verify: Optional[VerifySpec] = None
    attack: Optional[AttackSpec] = None
    sweep: Optional[SweepSpec] = None

    def check(self) -> "ExperimentConfig":
        """Cross-field checks of nested sketch specs; raises ``InvalidSpec`` with a dotted key."""
        for path, spec in (("run.sketch", self.run and self.run.sketch),
                           ("attack.sketch", self.attack and self.attack.sketch)):
            if spec is None:
                continue
            try:
                spec.check()
            except InvalidSpec as exc:
                raise InvalidSpec(str(exc), field=f"{path}.{exc.field}") from exc
        if self.run is not None and self.objective is not None:
            if self.run.sketch.d != self.objective.d:
                raise InvalidSpec(
                    f"sketch dimension {self.run.sketch.d} != objective dimension {self.objective.d}",
                    field="run.sketch.d",
                )
        if self.attack is not None and self.attack.sketch is not None:
            if self.attack.sketch.d != self.attack.d:
                raise InvalidSpec(
                    f"sketch dimension {self.attack.sketch.d} != model dimension {self.attack.d}",
                    field="attack.sketch.d",
                )
        return self
