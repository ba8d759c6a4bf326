"""
In-memory result types.

Plain dataclasses: every report, trace and estimate produced by the
library is one of these. Writers in ``storage.writers`` turn them into CSV
rows / JSON documents; nothing here touches the filesystem.
"""
from __future__ import annotations

import dataclasses
import math
from dataclasses import dataclass, field
from typing import Any, Dict, Iterator, List, Optional

import numpy as np

__all__ = [
    "MomentReport",
    "TailReport",
    "CoordinateReport",
    "NormReport",
    "EmbeddingReport",
    "TraceRow",
    "RoundTrace",
    "PrivacyBudget",
    "ConditionEstimates",
    "AttackTrajectory",
    "Violation",
    "UniqueMinimumReport",
    "ReconstructionStudy",
    "SweepPoint",
    "SweepResult",
    "CommunicationPlan",
    "RunSummary",
]


# ──────────────────────────────────────────────────────────────
# Coordinate-wise embedding certification
# ──────────────────────────────────────────────────────────────
@dataclass
class MomentReport:
    """First and second moment of gᵀRᵀRh for one vector pair."""

    kind: str
    d: int
    b: int
    n_samples: int
    empirical_mean: float
    target: float
    stderr: float
    empirical_second_moment: float
    second_moment_bound: float
    stderr_second: float
    passed: bool
    label: str = ""


@dataclass
class TailReport:
    kind: str
    threshold: float
    empirical_exceed_prob: float
    claimed_delta: float
    n_samples: int
    label: str = ""

    @property
    def passed(self) -> bool:
        # Θ(δ) in the lemmas; 10δ is the falsifiable proxy
        if math.isnan(self.claimed_delta):
            return True
        return self.empirical_exceed_prob <= 10.0 * self.claimed_delta


@dataclass
class CoordinateReport:
    """Componentwise unbiasedness E[RᵀRh] = h for one battery vector."""

    label: str
    max_abs_z: float
    passed: bool


@dataclass
class NormReport:
    """E‖RᵀRh‖² against (1 + α)‖h‖²."""

    label: str
    mean_norm_sq: float
    bound: float
    stderr: float
    passed: bool


@dataclass
class EmbeddingReport:
    kind: str
    d: int
    b: int
    trials: int
    lemma_constant: float
    alpha: float
    certified: bool
    moments: List[MomentReport] = field(default_factory=list)
    coordinates: List[CoordinateReport] = field(default_factory=list)
    norms: List[NormReport] = field(default_factory=list)
    tails: List[TailReport] = field(default_factory=list)

    @property
    def passed(self) -> bool:
        return (
            all(m.passed for m in self.moments)
            and all(c.passed for c in self.coordinates)
            and all(n.passed for n in self.norms)
            and all(t.passed for t in self.tails)
        )


# ──────────────────────────────────────────────────────────────
# Federated simulation
# ──────────────────────────────────────────────────────────────
@dataclass
class TraceRow:
    seed: int
    t: int
    k: int
    f_gap: float
    dist_sq: float
    V: float
    bits: int
    bound_value: float = float("nan")
    grad_sq: float = float("nan")


@dataclass
class RoundTrace:
    """
    Per-round record of one simulated run.

    Arrays indexed by ``t`` have ``T + 1`` entries (``t = 0`` is ``w⁰``);
    arrays indexed by ``(t, k)`` have shape ``(T, K)``. ``avg_gap[t]`` is the
    gap of the running average of ``ū^{s,k}`` over rounds ``s < t``
    (``nan`` at ``t = 0``).
    """

    seed: int
    T: int
    K: int
    iterates: np.ndarray
    f_gap: np.ndarray
    dist_sq: np.ndarray
    grad_sq: np.ndarray
    bits: np.ndarray
    V: np.ndarray
    ubar_gap: np.ndarray
    avg_gap: np.ndarray
    avg_iterate: Optional[np.ndarray] = None
    warnings: List[str] = field(default_factory=list)
    aborted: bool = False

    @property
    def rounds_completed(self) -> int:
        return int(np.count_nonzero(np.isfinite(self.f_gap))) - 1

    def rows(self, bound: Optional[np.ndarray] = None) -> Iterator[TraceRow]:
        """Flatten to CSV rows: one row per (t, k); ``k = K`` rows carry w^{t+1}."""
        for t in range(self.T + 1):
            bound_t = float(bound[t]) if bound is not None else float("nan")
            if t < self.T:
                for k in range(self.K):
                    yield TraceRow(
                        seed=self.seed,
                        t=t,
                        k=k,
                        f_gap=float(self.ubar_gap[t, k]),
                        dist_sq=float("nan") if k else float(self.dist_sq[t]),
                        V=float(self.V[t, k]),
                        bits=int(self.bits[t]),
                        bound_value=bound_t if k == 0 else float("nan"),
                        grad_sq=float(self.grad_sq[t]) if k == 0 else float("nan"),
                    )
            else:
                yield TraceRow(
                    seed=self.seed,
                    t=t,
                    k=0,
                    f_gap=float(self.f_gap[t]),
                    dist_sq=float(self.dist_sq[t]),
                    V=0.0,
                    bits=int(self.bits[t]),
                    bound_value=bound_t,
                    grad_sq=float(self.grad_sq[t]),
                )


@dataclass
class CommunicationPlan:
    regime: str
    case: str
    eta_local: float
    K: int
    T: int
    b_sketch: int
    alpha: float
    per_round_bits: int
    total_bits: int


# ──────────────────────────────────────────────────────────────
# Privacy
# ──────────────────────────────────────────────────────────────
@dataclass
class PrivacyBudget:
    """Composed guarantee: the simplified form plus the exact advanced-composition path."""

    eps_dp: float
    delta_dp: float
    eps_exact: float = float("nan")
    delta_exact: float = float("nan")
    sigma: List[float] = field(default_factory=list)


# ──────────────────────────────────────────────────────────────
# Gradient-leakage attack
# ──────────────────────────────────────────────────────────────
@dataclass
class ConditionEstimates:
    """
    Measured regularity constants of an attack objective.

    ``theta1`` / ``theta2`` bound the singular values of the pseudo-Hessian
    (pseudo-kernel eigenvalues ``theta**2``); ``a``, ``b``, ``p`` are the
    semi-smoothness triple of the objective itself; ``tau``, ``gamma1``,
    ``gamma2`` are the sketch constants (all 1 for an unsketched problem).
    """

    beta: float
    theta1: float
    theta2: float
    a: float
    b: float
    p: float = 0.5
    tau: float = 1.0
    gamma1: float = 1.0
    gamma2: float = 1.0
    c: float = 0.0
    d_sc: float = 0.0
    alpha_sl: float = 0.0
    beta_sl: float = 0.0

    def objective_view(self) -> "ConditionEstimates":
        """
        Non-critical-point constants of the attack objective itself.

        ∇L = 2Jᵀ desk(sk(∇F) − sk(g)), so ‖∇L‖² / L lies in
        [(2θ₁γ₁)², (2θ₂γ₂)²].
        """
        return dataclasses.replace(
            self,
            theta1=2.0 * self.theta1 * self.gamma1,
            theta2=2.0 * self.theta2 * self.gamma2,
        )


@dataclass
class AttackTrajectory:
    xs: np.ndarray
    losses: np.ndarray
    steps: int
    stopped_early: bool = False

    @property
    def final_x(self) -> np.ndarray:
        return self.xs[-1]

    @property
    def final_loss(self) -> float:
        return float(self.losses[-1])

    def ratios(self) -> np.ndarray:
        """Per-step ratios L(x_{t+1}) / L(x_t)."""
        prev = self.losses[:-1]
        with np.errstate(divide="ignore", invalid="ignore"):
            return np.where(prev > 0, self.losses[1:] / prev, 0.0)


@dataclass
class Violation:
    prop: str
    index: int
    residual: float
    lhs: float
    rhs: float


@dataclass
class UniqueMinimumReport:
    endpoints: np.ndarray
    spread: float
    unique: bool
    hypotheses_hold: bool
    final_losses: List[float] = field(default_factory=list)


@dataclass
class ReconstructionStudy:
    sigma: float
    noiseless_errors: List[float]
    noised_errors: List[float]
    diverged: int = 0

    @property
    def median_noiseless(self) -> float:
        return float(np.median(self.noiseless_errors))

    @property
    def median_noised(self) -> float:
        return float(np.median(self.noised_errors))

    @property
    def ratio(self) -> float:
        base = self.median_noiseless
        if base == 0.0:
            return math.inf
        return self.median_noised / base


# ──────────────────────────────────────────────────────────────
# Harness
# ──────────────────────────────────────────────────────────────
@dataclass
class SweepPoint:
    b_sketch: int
    alpha: float
    eta_local: float
    per_round_bits: int
    T_to_target: Optional[int]
    final_gap: float

    @property
    def reached(self) -> bool:
        return self.T_to_target is not None

    @property
    def total_bits(self) -> Optional[int]:
        if self.T_to_target is None:
            return None
        return self.per_round_bits * self.T_to_target


@dataclass
class SweepResult:
    target_eps: float
    points: List[SweepPoint] = field(default_factory=list)
    unreachable: List[int] = field(default_factory=list)

    def bits_band(self) -> float:
        """max / min total bits over points that reached the target."""
        bits = [p.total_bits for p in self.points if p.total_bits]
        if len(bits) < 1:
            return math.inf
        return max(bits) / min(bits)


@dataclass
class RunSummary:
    """What a subcommand reports: assertion outcomes plus free-form numbers."""

    command: str
    assertions: Dict[str, bool] = field(default_factory=dict)
    metrics: Dict[str, Any] = field(default_factory=dict)
    warnings: List[str] = field(default_factory=list)
    artifacts: List[str] = field(default_factory=list)

    @property
    def passed(self) -> bool:
        return all(self.assertions.values())
