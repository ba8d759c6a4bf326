"""
Communication sweep: rounds and bits to reach a target gap as b_sketch shrinks.

Every point uses the largest admissible local step 1/(8(1+α)LK), so a
smaller sketch pays with proportionally more rounds of proportionally
cheaper traffic.
"""
from __future__ import annotations

import asyncio
import math
from typing import List, Optional, Sequence

import numpy as np

from api.schemas import RunConfig, SketchKind
from base.errors import InvalidParam, TargetUnreachable
from base.utils.logging import ColoredLogger
from config import settings
from federated.communication import per_round_bits
from federated.objectives import FederatedObjective
from federated.simulation import FederatedSimulator
from sketching.operators import alpha_param
from storage.models import SweepPoint, SweepResult


def sweep_b_values(d: int, divisors: Sequence[int]) -> List[int]:
    """b = d / k for each divisor, at least 1."""
    return [max(d // k, 1) for k in divisors]


def _first_hit(f_gap: np.ndarray, target: float) -> Optional[int]:
    hits = np.nonzero(f_gap <= target)[0]
    return int(hits[0]) if hits.size else None


def _noise_floor(obj: FederatedObjective, eta: float, K: int) -> float:
    if obj.mu <= 0:
        return 0.0
    return 4.0 * eta**2 * obj.L**2 * K**3 * obj.sigma_sq / obj.mu


def sweep_point(
    obj: FederatedObjective,
    base: RunConfig,
    b: int,
    *,
    target_eps: float,
    T_max: int,
    n_seeds: int,
) -> SweepPoint:
    """Run one sketch size; raises ``TargetUnreachable`` when the floor or T_max is in the way."""
    kind = SketchKind(base.sketch.kind)
    alpha = 0.0 if kind is SketchKind.IDENTITY else alpha_param(kind, obj.d, b)
    eta = 1.0 / (8.0 * (1.0 + alpha) * obj.L * base.K)
    point = SweepPoint(b_sketch=b, alpha=alpha, eta_local=eta,
                       per_round_bits=per_round_bits(b, obj.N), T_to_target=None,
                       final_gap=math.nan)

    floor = _noise_floor(obj, eta, base.K)
    if floor > target_eps:
        raise TargetUnreachable(
            f"b={b}: noise floor {floor:.3g} exceeds target {target_eps:.3g}"
        )

    config = base.model_copy(update={
        "T": T_max,
        "eta_local": eta,
        "eta_global": 1.0,
        "record_average_iterate": False,
        "sketch": base.sketch.model_copy(update={"b_sketch": b}),
    })
    hits, finals = [], []
    for i in range(n_seeds):
        trace = FederatedSimulator(obj, config, seed_index=i).run(stop_below=target_eps)
        hits.append(_first_hit(trace.f_gap, target_eps))
        finals.append(float(trace.f_gap[trace.rounds_completed]))
    point.final_gap = float(np.mean(finals))
    if any(h is None for h in hits):
        raise TargetUnreachable(f"b={b}: target {target_eps:.3g} not reached in {T_max} rounds")
    point.T_to_target = max(hits)
    return point


async def _sweep(obj, base, b_values, target_eps, T_max, n_seeds) -> SweepResult:
    obj.w_star, obj.f_star, obj.L, obj.mu, obj.sigma_sq  # warm the caches before threads share obj
    semaphore = asyncio.Semaphore(settings.MAX_CONCURRENCY)
    result = SweepResult(target_eps=target_eps)

    async def _one(b: int):
        async with semaphore:
            try:
                return await asyncio.to_thread(sweep_point, obj, base, b, target_eps=target_eps,
                                               T_max=T_max, n_seeds=n_seeds)
            except TargetUnreachable as exc:
                ColoredLogger.warning(f"[Sweep] {exc}")
                return b

    for b, outcome in zip(b_values, await asyncio.gather(*(_one(b) for b in b_values))):
        if isinstance(outcome, SweepPoint):
            result.points.append(outcome)
            ColoredLogger.info(
                f"[Sweep] b={b}: alpha={outcome.alpha:.3g} T={outcome.T_to_target} "
                f"bits={outcome.total_bits}"
            )
        else:
            result.unreachable.append(b)
    return result


def sweep_communication(
    obj: FederatedObjective,
    base: RunConfig,
    b_values: Sequence[int],
    *,
    target_eps: float,
    T_max: int = 20_000,
    n_seeds: int = 1,
) -> SweepResult:
    """Sweep points run concurrently; results keep the order of ``b_values``."""
    if not b_values:
        raise InvalidParam("b_values must not be empty")
    if any(b < 1 or b > obj.d for b in b_values):
        raise InvalidParam(f"every b must lie in [1, {obj.d}], got {list(b_values)}")
    return asyncio.run(_sweep(obj, base, list(b_values), target_eps, T_max, n_seeds))
