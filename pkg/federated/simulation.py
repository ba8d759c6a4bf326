"""
In-process simulation of the sketched federated algorithm.

Round t (0-based) with operator R_t:

  1. every client starts from its own copy of w^t and runs K local steps,
     Δw_c = u_c^{t,K} − w^t (optionally with mini-batches and Gaussian noise);
  2. clients upload sk_t(Δw_c); the server averages them, Δw̃ = η_g·mean;
  3. every client applies w^{t+1} = w^t + desk_t(Δw̃).

sk and desk of one round use the same R_t, so desk∘sk = R_tᵀR_t.
"""
from __future__ import annotations

import asyncio
from dataclasses import dataclass
from typing import Dict, List, Optional, Sequence, Tuple

import numpy as np
from tqdm import tqdm

from api.schemas import DPSpec, RunConfig, SketchKind
from base.errors import EmptyClientList, InvalidParam, NonFinite, StepSizeWarning
from base.utils.logging import ColoredLogger
from base.utils.seeding import derive_seed, rng_for
from config import BITS_PER_FLOAT, settings
from federated.bounds import BoundParams, step_size_warnings
from federated.objectives import FederatedObjective
from privacy.accountant import sigmas_for, total_budget
from sketching.operators import SketchOperator, alpha_param, build_sketch
from storage.models import PrivacyBudget, RoundTrace

DP_STREAM = 0xD1FF


# ──────────────────────────────────────────────────────────────────────
# Client and server steps
# ──────────────────────────────────────────────────────────────────────
@dataclass(frozen=True)
class NoiseModel:
    """Per-step stochastic gradient: batch of ``batch_size`` samples plus N(0, σ²I)."""

    sigma: float = 0.0
    batch_size: Optional[int] = None


def _local_path(
    obj: FederatedObjective,
    c: int,
    w_t: np.ndarray,
    K: int,
    eta_local: float,
    noise: Optional[NoiseModel] = None,
    round_rng: Optional[np.random.Generator] = None,
) -> Tuple[np.ndarray, np.ndarray]:
    """(Δw_c, iterates u_c^{t,k} for k = 0..K−1)."""
    if K < 1:
        raise InvalidParam(f"K must be >= 1, got {K}")
    client = obj.client(c)
    u = w_t.copy()
    delta = np.zeros_like(w_t)
    path = np.empty((K, w_t.shape[0]))
    for k in range(K):
        path[k] = u
        if noise is None:
            g = client.grad(u)
        else:
            if noise.batch_size is None or noise.batch_size >= client.n:
                g = client.grad(u)
            else:
                idx = round_rng.choice(client.n, size=noise.batch_size, replace=False)
                g = client.batch_grad(u, idx)
            if noise.sigma > 0.0:
                g = g + round_rng.normal(0.0, noise.sigma, size=g.shape)
        step = eta_local * g
        u = u - step
        delta -= step
    return delta, path


def local_steps(
    obj: FederatedObjective,
    c: int,
    w_t: np.ndarray,
    K: int,
    eta_local: float,
    dp: Optional[NoiseModel] = None,
    round_rng: Optional[np.random.Generator] = None,
) -> np.ndarray:
    """Δw_c = −η_local·Σ_k ∇f_c(u_c^{t,k}) (noisy gradients when ``dp`` is set)."""
    return _local_path(obj, c, w_t, K, eta_local, dp, round_rng)[0]


def client_drift(paths: np.ndarray) -> Tuple[np.ndarray, np.ndarray]:
    """
    (V^{t,k}, ū^{t,k}) from client paths of shape (N, K, d):
    V^{t,k} = (1/N)Σ_c ‖u_c^{t,k} − ū^{t,k}‖². V^{t,0} is zero only when
    every client started the round from the same model.
    """
    dev = paths - paths[0]
    mean_dev = dev.mean(axis=0)
    spread = dev - mean_dev
    return np.einsum("ckd,ckd->k", spread, spread) / paths.shape[0], paths[0] + mean_dev


def server_aggregate(sketched_deltas: Sequence[np.ndarray], eta_global: float) -> np.ndarray:
    """η_global times the mean, summed in client order."""
    if len(sketched_deltas) == 0:
        raise EmptyClientList("no client deltas to aggregate")
    lengths = {len(s) for s in sketched_deltas}
    if len(lengths) != 1:
        raise InvalidParam(f"sketched deltas have different lengths {sorted(lengths)}")
    stack = np.stack(sketched_deltas)
    return np.sum(stack, axis=0) / len(sketched_deltas) * eta_global


# ──────────────────────────────────────────────────────────────────────
# One run
# ──────────────────────────────────────────────────────────────────────
def sketch_alpha(config: RunConfig) -> float:
    if config.sketch.kind is SketchKind.IDENTITY:
        return 0.0
    return alpha_param(config.sketch.kind, config.sketch.d, config.sketch.b_sketch)


class FederatedSimulator:
    """
    Runs one seed of the algorithm and records a ``RoundTrace``.

    ``seed_index`` is mixed into the sketch master seed, so seed ``i`` of a
    multi-seed run uses an independent operator sequence.
    """

    def __init__(
        self,
        obj: FederatedObjective,
        config: RunConfig,
        *,
        seed_index: int = 0,
        sigmas: Optional[Sequence[float]] = None,
        batch_size: Optional[int] = None,
    ) -> None:
        if config.sketch.d != obj.d:
            raise InvalidParam(f"sketch dimension {config.sketch.d} != objective dimension {obj.d}")
        self.obj = obj
        self.config = config
        self.seed_index = seed_index
        self.master = derive_seed(config.sketch.master_seed, seed_index)
        self.sketch_spec = config.sketch.model_copy(update={"master_seed": self.master})
        self.sketch_spec.check()
        self.alpha = sketch_alpha(config)
        self.noise: Optional[List[NoiseModel]] = None
        if sigmas is not None:
            self.noise = [NoiseModel(float(s), batch_size) for s in sigmas]

    # ------------------------------------------------------------------ #
    def guard_message(self) -> Optional[str]:
        p = BoundParams(L=self.obj.L, K=self.config.K, eta_local=self.config.eta_local,
                        eta_global=self.config.eta_global, alpha=self.alpha)
        return step_size_warnings(p)

    def _round(self, t: int, op: SketchOperator, clients_w: List[np.ndarray]):
        N, K = self.obj.N, self.config.K
        deltas, paths = [], []
        for c in range(N):
            noise = rng = None
            if self.noise is not None:
                noise = self.noise[c]
                rng = rng_for(self.master, DP_STREAM, t, c)
            delta, path = _local_path(self.obj, c, clients_w[c], K, self.config.eta_local,
                                      noise, rng)
            deltas.append(delta)
            paths.append(path)
        agg = server_aggregate([op.sk(dw) for dw in deltas], self.config.eta_global)
        return op.desk(agg), np.stack(paths)

    def run(self, *, stop_below: Optional[float] = None) -> RoundTrace:
        """One seed; with ``stop_below`` the run ends at the first round whose gap is <= it."""
        obj, cfg = self.obj, self.config
        T, K, N, d = cfg.T, cfg.K, obj.N, obj.d
        w_star, f_star = obj.w_star, obj.f_star

        w0 = np.zeros(d) if cfg.w0 is None else np.asarray(cfg.w0, dtype=np.float64)
        if w0.shape != (d,):
            raise InvalidParam(f"w0 has shape {w0.shape}, expected ({d},)")

        nan = np.nan
        trace = RoundTrace(
            seed=self.seed_index,
            T=T,
            K=K,
            iterates=np.full((T + 1, d), nan),
            f_gap=np.full(T + 1, nan),
            dist_sq=np.full(T + 1, nan),
            grad_sq=np.full(T + 1, nan),
            bits=np.zeros(T + 1, dtype=np.int64),
            V=np.full((T, K), nan),
            ubar_gap=np.full((T, K), nan),
            avg_gap=np.full(T + 1, nan),
        )
        msg = self.guard_message()
        if msg:
            trace.warnings.append(msg)
            ColoredLogger.warn_condition(f"[FedSim] {msg}", StepSizeWarning)

        per_round = BITS_PER_FLOAT * cfg.sketch.b_sketch * (N + 1)
        clients_w = [w0.copy() for _ in range(N)]
        avg_sum = np.zeros(d)

        def record(t: int, w: np.ndarray) -> None:
            g = obj.grad(w)
            trace.iterates[t] = w
            trace.f_gap[t] = obj.value(w) - f_star
            trace.dist_sq[t] = float((w - w_star) @ (w - w_star))
            trace.grad_sq[t] = float(g @ g)

        record(0, clients_w[0])
        rounds = range(T)
        if settings.PROGRESS:
            rounds = tqdm(rounds, desc=f"seed {self.seed_index}", leave=False)

        for t in rounds:
            op = build_sketch(self.sketch_spec, t)
            update, paths = self._round(t, op, clients_w)

            # ------------------ client drift V^{t,k} --------------------
            trace.V[t], ubar = client_drift(paths)
            for k in range(K):
                trace.ubar_gap[t, k] = obj.value(ubar[k]) - f_star
            if cfg.record_average_iterate:
                avg_sum += ubar.sum(axis=0)
                w_avg = avg_sum / ((t + 1) * K)
                trace.avg_gap[t + 1] = obj.value(w_avg) - f_star
                trace.avg_iterate = w_avg

            # ------------------ synchronized update ---------------------
            for c in range(N):
                clients_w[c] = clients_w[c] + update
            trace.bits[t + 1] = trace.bits[t] + per_round

            if not np.all(np.isfinite(clients_w[0])):
                trace.aborted = True
                ColoredLogger.error(f"[FedSim] seed {self.seed_index}: non-finite iterate at round {t + 1}")
                raise NonFinite(f"iterate became non-finite at round {t + 1}", partial=trace)
            record(t + 1, clients_w[0])
            if stop_below is not None and trace.f_gap[t + 1] <= stop_below:
                break

        return trace


def run_fl(obj: FederatedObjective, config: RunConfig, *, seed_index: int = 0) -> RoundTrace:
    return FederatedSimulator(obj, config, seed_index=seed_index).run()


def dp_for_run(config: RunConfig, n_clients: int) -> DPSpec:
    if config.dp is None:
        raise InvalidParam("run_private_fl needs a dp section")
    return config.dp.model_copy(update={"T": config.T, "K": config.K,
                                        "n_clients": config.dp.n_clients or n_clients})


def run_private_fl(
    obj: FederatedObjective, config: RunConfig, *, seed_index: int = 0
) -> Tuple[RoundTrace, PrivacyBudget]:
    dp = dp_for_run(config, obj.N)
    sigmas = sigmas_for(obj.clients, dp)
    budget = total_budget(dp)
    budget.sigma = list(sigmas)
    ColoredLogger.info(f"[FedSim] private run: sigma per client = {[round(s, 6) for s in sigmas]}")
    sim = FederatedSimulator(obj, config, seed_index=seed_index, sigmas=sigmas,
                             batch_size=dp.batch_size)
    return sim.run(), budget


# ──────────────────────────────────────────────────────────────────────
# Multi-seed fan-out
# ──────────────────────────────────────────────────────────────────────
async def run_many(
    obj: FederatedObjective,
    config: RunConfig,
    *,
    private: bool = False,
    max_concurrency: Optional[int] = None,
) -> List[RoundTrace]:
    """
    ``config.n_seeds`` independent runs, fanned out over worker threads.
    Diverged runs are returned with ``aborted=True`` and their partial trace.
    """
    obj.w_star, obj.f_star, obj.L  # warm the caches before threads share obj
    semaphore = asyncio.Semaphore(max_concurrency or settings.MAX_CONCURRENCY)
    sigmas = None
    batch_size = None
    if private:
        dp = dp_for_run(config, obj.N)
        sigmas = sigmas_for(obj.clients, dp)
        batch_size = dp.batch_size

    def _one_sync(i: int) -> RoundTrace:
        sim = FederatedSimulator(obj, config, seed_index=i, sigmas=sigmas, batch_size=batch_size)
        try:
            return sim.run()
        except NonFinite as exc:
            ColoredLogger.warning(f"[FedSim] seed {i} diverged: {exc}")
            return exc.partial

    async def _one(i: int) -> RoundTrace:
        async with semaphore:
            return await asyncio.to_thread(_one_sync, i)

    traces = await asyncio.gather(*(_one(i) for i in range(config.n_seeds)))
    ColoredLogger.success(
        f"[FedSim] finished {len(traces)} seed(s), "
        f"{sum(t.aborted for t in traces)} diverged"
    )
    return list(traces)


def mean_curves(traces: Sequence[RoundTrace]) -> Dict[str, np.ndarray]:
    """Seed averages of the per-round curves (non-finite entries propagate)."""
    if not traces:
        raise EmptyClientList("no traces to average")
    keys = ("f_gap", "dist_sq", "grad_sq", "avg_gap", "ubar_gap", "V")
    return {k: np.mean(np.stack([getattr(t, k) for t in traces]), axis=0) for k in keys}
