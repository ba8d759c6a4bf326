"""
Gradient descent on the data and the experiments built on it.
"""
from __future__ import annotations

import asyncio
import math
from typing import Callable, List, Optional, Sequence, TypeVar

import numpy as np

from api.schemas import AttackSpec
from attack.fixtures import build_attack
from attack.problem import THETA_FLOOR, AttackProblem, ball_samples, step_size_rule
from base.errors import HypothesisViolated, InvalidParam, NonFinite
from base.utils.logging import ColoredLogger
from base.utils.seeding import rng_for
from config import settings
from storage.models import (
    AttackTrajectory,
    ConditionEstimates,
    ReconstructionStudy,
    UniqueMinimumReport,
)

STOP_LOSS = 1e-16
UNIQUE_SPREAD = 1e-6
_START_STREAM = 0x57A7

T = TypeVar("T")


def attack_gd(problem: AttackProblem, x0: np.ndarray, eta: float, T_attack: int) -> AttackTrajectory:
    """
    x_{t+1} = x_t − η∇L(x_t), recording every iterate, until T_attack steps
    or L < 1e-16. Raises ``NonFinite`` (with the partial trajectory) on divergence.
    """
    if not eta > 0:
        raise InvalidParam(f"eta must be positive, got {eta}")
    if T_attack < 0:
        raise InvalidParam(f"T_attack must be >= 0, got {T_attack}")
    x = np.asarray(x0, dtype=np.float64).copy()
    xs = [x.copy()]
    losses = [problem.loss(x)]
    stopped = False
    for _ in range(T_attack):
        if losses[-1] < STOP_LOSS:
            stopped = True
            break
        x = x - eta * problem.grad(x)
        loss = problem.loss(x)
        xs.append(x.copy())
        losses.append(loss)
        if not (np.all(np.isfinite(x)) and math.isfinite(loss)):
            partial = AttackTrajectory(np.array(xs), np.array(losses), len(xs) - 1)
            raise NonFinite(f"attack diverged after {len(xs) - 1} steps", partial=partial)
    else:
        stopped = losses[-1] < STOP_LOSS
    return AttackTrajectory(np.array(xs), np.array(losses), len(xs) - 1, stopped)


async def _gather(jobs: Sequence[Callable[[], T]]) -> List[T]:
    semaphore = asyncio.Semaphore(settings.MAX_CONCURRENCY)

    async def _one(job: Callable[[], T]) -> T:
        async with semaphore:
            return await asyncio.to_thread(job)

    return list(await asyncio.gather(*(_one(j) for j in jobs)))


def run_parallel(jobs: Sequence[Callable[[], T]]) -> List[T]:
    """Run independent trajectories on worker threads; results keep job order."""
    return asyncio.run(_gather(jobs))


def hypotheses_hold(est: ConditionEstimates) -> bool:
    """Non-critical point with θ₁ > 0 and semi-strong convexity with d > 0, p ≠ 1."""
    return est.theta1 > THETA_FLOOR and est.d_sc > 0 and est.p != 1.0


def _fallback_eta(est: ConditionEstimates) -> float:
    try:
        return step_size_rule(est.objective_view())[0]
    except HypothesisViolated as exc:
        eta = 1.0 / (2.0 * est.b)
        ColoredLogger.warning(f"[Attack] {exc}; falling back to eta=1/(2b)={eta:.4g}")
        return eta


def unique_minimum_probe(
    problem: AttackProblem,
    est: ConditionEstimates,
    multi_start: int,
    *,
    center: Optional[np.ndarray] = None,
    radius: float = 0.1,
    eta: Optional[float] = None,
    T_attack: int = 5_000,
    seed: int = 0,
) -> UniqueMinimumReport:
    """
    Run ``attack_gd`` from ``multi_start`` random points of the ball and
    report how far apart the endpoints land.
    """
    if multi_start < 1:
        raise InvalidParam(f"multi_start must be >= 1, got {multi_start}")
    if center is None:
        if problem.x_true is None:
            raise InvalidParam("pass a center when the problem has no known data point")
        center = problem.x_true
    eta = eta if eta is not None else _fallback_eta(est)
    starts = ball_samples(np.asarray(center, dtype=np.float64), radius, multi_start + 1,
                          rng_for(seed, _START_STREAM))[1:]

    trajectories = run_parallel([lambda x0=x0: attack_gd(problem, x0, eta, T_attack)
                                 for x0 in starts])
    endpoints = np.stack([t.final_x for t in trajectories])
    diffs = endpoints[:, None, :] - endpoints[None, :, :]
    spread = float(np.sqrt((diffs**2).sum(axis=-1)).max())
    report = UniqueMinimumReport(
        endpoints=endpoints,
        spread=spread,
        unique=spread <= UNIQUE_SPREAD,
        hypotheses_hold=hypotheses_hold(est),
        final_losses=[t.final_loss for t in trajectories],
    )
    ColoredLogger.info(
        f"[Attack] {multi_start} start(s): spread={spread:.3g} unique={report.unique} "
        f"hypotheses_hold={report.hypotheses_hold}"
    )
    return report


def relative_error(x: np.ndarray, x_true: np.ndarray) -> float:
    return float(np.linalg.norm(x - x_true) / np.linalg.norm(x_true))


def last_finite_x(traj: AttackTrajectory) -> np.ndarray:
    """Latest iterate whose coordinates and loss are both finite (the start if none is)."""
    ok = np.isfinite(traj.xs).all(axis=1) & np.isfinite(traj.losses)
    idx = np.flatnonzero(ok)
    return traj.xs[idx[-1]] if idx.size else traj.xs[0]


def reconstruction_study(
    spec: AttackSpec,
    eta: float,
    *,
    radius: Optional[float] = None,
) -> ReconstructionStudy:
    """
    Paired attacks over ``spec.n_seeds`` seeds: the same start against the
    noiseless gradient and against the noised one. A diverging run is
    scored at its last finite iterate and counted in ``diverged``.
    """
    radius = radius if radius is not None else spec.ball_radius
    clean = build_attack(spec, noised=False)
    sigma = 0.0

    def _pair(i: int):
        x0 = ball_samples(clean.x_true, radius, 2, rng_for(spec.seed, _START_STREAM, i))[1]
        noisy = build_attack(spec, noise_seed=i)
        errors, diverged = [], 0
        for setup in (clean, noisy):
            try:
                x = attack_gd(setup.problem, x0, eta, spec.T_attack).final_x
            except NonFinite as exc:
                x = last_finite_x(exc.partial)
                diverged += 1
            errors.append(relative_error(x, setup.x_true))
        return errors[0], errors[1], noisy.noise_sigma, diverged

    results = run_parallel([lambda i=i: _pair(i) for i in range(spec.n_seeds)])
    if results:
        sigma = results[0][2]
    study = ReconstructionStudy(
        sigma=sigma,
        noiseless_errors=[r[0] for r in results],
        noised_errors=[r[1] for r in results],
        diverged=sum(r[3] for r in results),
    )
    ColoredLogger.info(
        f"[Attack] reconstruction over {spec.n_seeds} seed(s), sigma={sigma:.4g}: "
        f"median error {study.median_noiseless:.3g} → {study.median_noised:.3g}, "
        f"{study.diverged} diverged run(s)"
    )
    return study
