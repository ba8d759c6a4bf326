"""
Privacy accounting for the noised federated algorithm.

Per-step noise follows the Gaussian mechanism; run-level guarantees are
composed per client over K local steps, in parallel across clients (disjoint
data, no inflation) and sequentially over T rounds:

    simplified:  (√(TK)·ε̂,  TK·δ̂)
    exact:       advanced composition over K, then over T, slack δ'

Both forms are returned.
"""
from __future__ import annotations

import math
from typing import List, Optional, Sequence, Tuple

from api.schemas import DPSpec
from base.errors import EmptyList, GuardViolated, InvalidParam, NoLipschitzBound
from base.utils.logging import ColoredLogger
from storage.models import PrivacyBudget

Budget = Tuple[float, float]


def gaussian_sigma(l2_sensitivity: float, eps: float, delta: float) -> float:
    """σ = √(2 ln(1.25/δ))·Δ₂/ε."""
    if not 0.0 < eps < 1.0:
        raise InvalidParam(f"eps must lie in (0, 1), got {eps}")
    if not 0.0 < delta < 1.0:
        raise InvalidParam(f"delta must lie in (0, 1), got {delta}")
    if not l2_sensitivity > 0.0:
        raise InvalidParam(f"sensitivity must be positive, got {l2_sensitivity}")
    return math.sqrt(2.0 * math.log(1.25 / delta)) * l2_sensitivity / eps


def l2_sensitivity(client) -> float:
    """ℓ_c of the batch-averaged stochastic gradient."""
    bound = client.lipschitz
    if bound is None:
        raise NoLipschitzBound(
            f"{type(client).__name__} has no Lipschitz bound; declare a ball_radius"
        )
    return float(bound)


def noise_for_client(client, dp: DPSpec, index: Optional[int] = None) -> float:
    """Per-step σ for one client; ``dp.sigma_override`` wins, then ``dp.lipschitz``."""
    if dp.sigma_override is not None:
        return float(dp.sigma_override)
    if dp.lipschitz is not None and index is not None:
        sensitivity = dp.lipschitz[index % len(dp.lipschitz)]
    else:
        sensitivity = l2_sensitivity(client)
    return gaussian_sigma(sensitivity, dp.eps_hat, dp.delta_hat)


def advanced_compose(eps: float, delta: float, k: int, delta_prime: float) -> Budget:
    """(√(2k ln(1/δ'))·ε + 2kε², δ' + kδ)."""
    if eps < 0.0 or not math.isfinite(eps):
        raise InvalidParam(f"eps must be finite and >= 0, got {eps}")
    if not 0.0 < delta_prime <= 1.0:
        raise InvalidParam(f"delta_prime must lie in (0, 1], got {delta_prime}")
    if delta < 0.0 or k < 1:
        raise InvalidParam(f"need delta >= 0 and k >= 1, got {delta=} {k=}")
    eps_total = math.sqrt(2.0 * k * math.log(1.0 / delta_prime)) * eps + 2.0 * k * eps * eps
    return eps_total, delta_prime + k * delta


def parallel_compose(budgets: Sequence[Budget]) -> Budget:
    if not budgets:
        raise EmptyList("parallel composition of an empty list")
    return max(e for e, _ in budgets), max(d for _, d in budgets)


def amplify_subsample(eps: float, delta: float, k: int, n: int) -> Budget:
    """(6εk/n, e^{6εk/n}·(4k/n)·δ) for a batch of k out of n."""
    if not 0.0 <= eps <= 1.0:
        raise InvalidParam(f"amplification needs eps in [0, 1], got {eps}")
    if n < 1 or k < 1 or 2 * k > n:
        raise InvalidParam(f"amplification needs 1 <= k <= n/2, got k={k} n={n}")
    ratio = k / n
    eps_amp = 6.0 * eps * ratio
    return eps_amp, math.exp(eps_amp) * 4.0 * ratio * delta


def total_budget(spec: DPSpec, *, strict: bool = True) -> PrivacyBudget:
    """Compose a per-step (ε̂, δ̂) over K local steps and T rounds."""
    eps, delta, K, T = spec.eps_hat, spec.delta_hat, spec.K, spec.T
    if eps >= 1.0 / math.sqrt(K):
        message = f"eps_hat={eps:g} violates eps_hat < 1/sqrt(K)={1.0 / math.sqrt(K):.4g}"
        if strict:
            raise GuardViolated(message, math.sqrt(T * K) * eps)
        ColoredLogger.warning(f"[Privacy] {message}")

    # ------------------ 0. Simplified form ------------------------------
    eps_dp = math.sqrt(T * K) * eps
    delta_dp = T * K * delta

    # ------------------ 1. Exact path -----------------------------------
    slack = spec.delta_prime if spec.delta_prime is not None else delta
    per_client = advanced_compose(eps, delta, K, slack)
    n_clients = spec.n_clients or 1
    per_round = parallel_compose([per_client] * n_clients)
    eps_exact, delta_exact = advanced_compose(per_round[0], per_round[1], T, slack)

    budget = PrivacyBudget(eps_dp=eps_dp, delta_dp=delta_dp,
                           eps_exact=eps_exact, delta_exact=delta_exact)
    ColoredLogger.info(
        f"[Privacy] T={T} K={K} eps_hat={eps:g} delta_hat={delta:g} → "
        f"({eps_dp:.6g}, {delta_dp:.3g}) simplified, ({eps_exact:.6g}, {delta_exact:.3g}) exact"
    )
    return budget


def sigmas_for(clients: Sequence, dp: DPSpec) -> List[float]:
    return [noise_for_client(c, dp, i) for i, c in enumerate(clients)]
