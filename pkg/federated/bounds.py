"""
Closed-form convergence bounds of the sketched federated algorithm.

K-step results assume η_global = 1 and η_local ≤ 1/(8(1+α)LK); single-step
results use η = η_global·η_local ≤ 1/((1+α)L) (1/(2(1+α)L) for the convex
case). When a hypothesis fails, the bound is still evaluated; it is logged
as a ``StepSizeWarning`` by default, or raised as ``GuardViolated`` carrying
the value when ``strict=True``.
"""
from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Literal, Optional

import numpy as np

from base.errors import GuardViolated, InvalidParam, StepSizeWarning
from base.utils.logging import ColoredLogger

Regime = Literal["strongly_convex", "convex", "nonconvex"]


@dataclass(frozen=True)
class BoundParams:
    L: float
    K: int = 1
    eta_local: float = 0.0
    eta_global: float = 1.0
    alpha: float = 0.0
    mu: float = 0.0
    sigma_sq: float = 0.0
    D0: float = 0.0  # E‖w⁰ − w*‖²
    gap0: float = 0.0  # f(w⁰) − f*
    G: float = 0.0

    @property
    def eta(self) -> float:
        return self.eta_global * self.eta_local

    def kstep_limit(self) -> float:
        return 1.0 / (8.0 * (1.0 + self.alpha) * self.L * self.K)


def _guard(ok: bool, message: str, value: float, strict: bool) -> float:
    if ok:
        return value
    if strict:
        raise GuardViolated(message, value)
    ColoredLogger.warn_condition(f"[Bounds] {message}", StepSizeWarning)
    return value


def _kstep_guard(p: BoundParams, value: float, strict: bool, what: str) -> float:
    limit = p.kstep_limit()
    return _guard(
        p.eta_local <= limit,
        f"{what}: eta_local={p.eta_local:.4g} exceeds 1/(8(1+alpha)LK)={limit:.4g}",
        value,
        strict,
    )


# ──────────────────────────────────────────────────────────────────────
# K local steps
# ──────────────────────────────────────────────────────────────────────
def bound_strongly_convex(p: BoundParams, t, *, strict: bool = False):
    """L/2·D₀·e^{−μ η_local t} + 4 η_local² L² K³ σ² / μ; ``t`` may be an array."""
    if p.mu <= 0:
        raise GuardViolated("strongly convex bound needs mu > 0", math.inf)
    t = np.asarray(t, dtype=np.float64)
    eta = p.eta_local
    floor = 4.0 * eta**2 * p.L**2 * p.K**3 * p.sigma_sq / p.mu
    value = 0.5 * p.L * p.D0 * np.exp(-p.mu * eta * t) + floor
    value = float(value) if value.ndim == 0 else value
    return _kstep_guard(p, value, strict, "strongly convex")


def noise_floor_strongly_convex(p: BoundParams) -> float:
    return 4.0 * p.eta_local**2 * p.L**2 * p.K**3 * p.sigma_sq / p.mu


def bound_convex(p: BoundParams, T, *, strict: bool = False):
    """4D₀/(η_local K T) + 32 η_local² L K² σ² for the average of ū^{t,k}."""
    T = np.asarray(T, dtype=np.float64)
    if np.any(T < 1) or p.eta_local <= 0:
        raise InvalidParam("convex bound needs T >= 1 and eta_local > 0")
    eta = p.eta_local
    value = 4.0 * p.D0 / (eta * p.K * T) + 32.0 * eta**2 * p.L * p.K**2 * p.sigma_sq
    value = float(value) if value.ndim == 0 else value
    return _kstep_guard(p, value, strict, "convex")


def bound_nonconvex(p: BoundParams, T, *, strict: bool = False):
    """
    gap₀/((T+1)·η_global) + η_local·L·K²·G²·(η_local + (η/2)(1+α)) on
    min_t ‖∇f(w^t)‖², with η = η_global·η_local.
    """
    T = np.asarray(T, dtype=np.float64)
    if np.any(T < 0) or p.eta_global <= 0:
        raise InvalidParam("non-convex bound needs T >= 0 and eta_global > 0")
    if not math.isfinite(p.G):
        raise InvalidParam("non-convex bound needs a finite gradient bound G")
    floor = p.eta_local * p.L * p.K**2 * p.G**2 * (p.eta_local + 0.5 * p.eta * (1.0 + p.alpha))
    value = p.gap0 / ((T + 1.0) * p.eta_global) + floor
    return float(value) if value.ndim == 0 else value


# ──────────────────────────────────────────────────────────────────────
# Single local step (K = 1)
# ──────────────────────────────────────────────────────────────────────
def bounds_single_step(regime: Regime, p: BoundParams, t, *, strict: bool = False):
    """
    • strongly_convex: (1 − μη)^t·gap₀ on f(w^t) − f*
    • convex:          D₀/(η(t+1)) on f(mean of w⁰..w^t) − f*
    • nonconvex:       2·gap₀/(η(t+1)) on min_{s≤t} ‖∇f(w^s)‖²
    """
    eta = p.eta
    if eta <= 0:
        raise InvalidParam(f"eta must be positive, got {eta}")
    t = np.asarray(t, dtype=np.float64)
    limit = 1.0 / ((1.0 + p.alpha) * p.L)
    if regime == "strongly_convex":
        if p.mu <= 0:
            raise GuardViolated("strongly convex bound needs mu > 0", math.inf)
        value = (1.0 - p.mu * eta) ** t * p.gap0
    elif regime == "convex":
        limit = 0.5 * limit
        value = p.D0 / (eta * (t + 1.0))
    elif regime == "nonconvex":
        value = 2.0 * p.gap0 / (eta * (t + 1.0))
    else:
        raise InvalidParam(f"unknown regime {regime!r}")
    value = float(value) if value.ndim == 0 else value
    return _guard(
        eta <= limit,
        f"single-step {regime}: eta={eta:.4g} exceeds {limit:.4g}",
        value,
        strict,
    )


def step_size_warnings(p: BoundParams) -> Optional[str]:
    """Message for the guard the run violates, or None."""
    if p.K > 1:
        limit = p.kstep_limit()
        if p.eta_local > limit:
            return (f"eta_local={p.eta_local:.4g} exceeds 1/(8(1+alpha)LK)={limit:.4g} "
                    f"(K={p.K}, alpha={p.alpha:g})")
        return None
    limit = 1.0 / ((1.0 + p.alpha) * p.L)
    if p.eta > limit:
        return f"eta_global*eta_local={p.eta:.4g} exceeds 1/((1+alpha)L)={limit:.4g}"
    return None
