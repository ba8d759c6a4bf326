"""
Communication accounting.

Every round moves N sketched uploads plus one sketched broadcast, each of
``b_sketch`` 64-bit floats. ``communication_budget`` evaluates the optimal
(K·η_local, T, b_sketch) split that reaches an ε-optimal point.
"""
from __future__ import annotations

import math
from typing import Literal, Optional, Tuple

from api.schemas import RunConfig, SketchKind
from base.errors import InvalidParam
from base.utils.logging import ColoredLogger
from config import BITS_PER_FLOAT
from sketching.operators import alpha_param, lemma_constant
from storage.models import CommunicationPlan


def per_round_bits(b_sketch: int, n_clients: int) -> int:
    return BITS_PER_FLOAT * int(b_sketch) * (int(n_clients) + 1)


def communication_bits(config: RunConfig, n_clients: int) -> Tuple[int, int]:
    """(per_round, total) bits for ``config.T`` rounds."""
    per_round = per_round_bits(config.sketch.b_sketch, n_clients)
    return per_round, per_round * config.T


def _sketch_size(kind: SketchKind, d: int, alpha: float) -> int:
    b = math.ceil(lemma_constant(kind, d) * d / alpha)
    return int(min(max(b, 1), d))


def communication_budget(
    regime: Literal["strongly_convex", "convex"],
    *,
    eps: float,
    L: float,
    N: int,
    d: int,
    D0: float,
    sigma_sq: float = 0.0,
    mu: float = 0.0,
    kind: SketchKind = SketchKind.SRHT,
    b_sketch: Optional[int] = None,
    alpha: Optional[float] = None,
    K: int = 1,
) -> CommunicationPlan:
    """
    Plan for an ε-optimal solution.

    Pass either ``b_sketch`` (α from ``alpha_param``) or ``alpha`` (b_sketch
    = ⌈a·d/α⌉ clamped to [1, d]).

    strongly convex (K = 1):
      ε ≥ σ²/(16(1+α)²μ):  η = 1/(8(1+α)L),        T = 8(1+α)(L/μ)·log(L·D₀/ε)
      otherwise:            η = √(με/2)/(2Lσ),      T = (2Lσ/μ^{3/2})·√(2/ε)·log(L·D₀/ε)
    convex:
      ε ≥ σ²/((1+α)²L):     Kη = 1/(8(1+α)L),       T = 64·D₀(1+α)L/ε
      otherwise:            Kη = √(ε/L)/(8σ),        T = 64·D₀σ√L/ε^{3/2}
    """
    if eps <= 0 or L <= 0 or N < 1 or d < 1:
        raise InvalidParam("communication budget needs eps > 0, L > 0, N >= 1, d >= 1")
    kind = SketchKind(kind)
    if b_sketch is not None:
        alpha = alpha_param(kind, d, b_sketch)
    elif alpha is not None and alpha > 0:
        b_sketch = _sketch_size(kind, d, alpha)
    else:
        raise InvalidParam("pass b_sketch or a positive alpha")

    sigma = math.sqrt(sigma_sq)
    if regime == "strongly_convex":
        if mu <= 0:
            raise InvalidParam("strongly convex budget needs mu > 0")
        K = 1
        log_term = max(math.log(L * D0 / eps), 0.0)
        if eps >= sigma_sq / (16.0 * (1.0 + alpha) ** 2 * mu):
            case = "step-limited"
            eta = 1.0 / (8.0 * (1.0 + alpha) * L)
            T = 8.0 * (1.0 + alpha) * (L / mu) * log_term
        else:
            case = "noise-limited"
            eta = math.sqrt(mu * eps / 2.0) / (2.0 * L * sigma)
            T = (2.0 * L * sigma / mu**1.5) * math.sqrt(2.0 / eps) * log_term
    elif regime == "convex":
        if eps >= sigma_sq / ((1.0 + alpha) ** 2 * L):
            case = "step-limited"
            k_eta = 1.0 / (8.0 * (1.0 + alpha) * L)
            T = 64.0 * D0 * (1.0 + alpha) * L / eps
        else:
            case = "noise-limited"
            k_eta = math.sqrt(eps / L) / (8.0 * sigma)
            T = 64.0 * D0 * sigma * math.sqrt(L) / eps**1.5
        eta = k_eta / K
    else:
        raise InvalidParam(f"no communication budget for regime {regime!r}")

    rounds = max(int(math.ceil(T)), 1)
    per_round = per_round_bits(b_sketch, N)
    plan = CommunicationPlan(
        regime=regime,
        case=case,
        eta_local=eta,
        K=K,
        T=rounds,
        b_sketch=b_sketch,
        alpha=float(alpha),
        per_round_bits=per_round,
        total_bits=per_round * rounds,
    )
    ColoredLogger.debug(
        f"[Comm] {regime}/{case}: alpha={alpha:g} b={b_sketch} T={rounds} bits={plan.total_bits}"
    )
    return plan
