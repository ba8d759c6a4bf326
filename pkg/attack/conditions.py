"""
Empirical checkers for the regularity conditions of an attack objective.

Each checker evaluates its inequality on the sampled points (or pairs) and
returns one ``Violation`` per sample where the left side exceeds the right
side by more than ``SLACK`` (relative to the magnitudes involved). Terms of
the form L(·)^p use max(L, 0)^p so objectives that go negative stay
defined. An oracle is anything with ``loss(x)`` and ``grad(x)``.

    semi-smooth (a, b, p):          L(y) ≤ L(x) + ⟨∇L(x), y−x⟩ + b‖y−x‖² + a‖y−x‖^{2−2p}L(x)^p
    non-critical (θ₁, θ₂):          θ₁²L(x) ≤ ‖∇L(x)‖² ≤ θ₂²L(x)
    semi-Lipschitz (α, β, p):       ‖∇L(x)−∇L(y)‖² ≤ β²‖x−y‖² + α²‖x−y‖^{2−2p}L(x)^p
    semi-strongly-convex (c, d, p): L(x) ≥ L(y) + ⟨∇L(y), x−y⟩ + d‖x−y‖² − c‖x−y‖^{2−2p}L(y)^p
"""
from __future__ import annotations

from typing import List, Protocol

import numpy as np

from storage.models import Violation

SLACK = 1e-9


class Oracle(Protocol):
    def loss(self, x: np.ndarray) -> float: ...

    def grad(self, x: np.ndarray) -> np.ndarray: ...


def _pow(L: float, p: float) -> float:
    return max(L, 0.0) ** p


def _record(out: List[Violation], prop: str, i: int, lhs: float, rhs: float) -> None:
    residual = lhs - rhs
    if residual > SLACK * (1.0 + abs(lhs) + abs(rhs)):
        out.append(Violation(prop=prop, index=i, residual=residual, lhs=lhs, rhs=rhs))


def check_semi_smooth(oracle: Oracle, a: float, b: float, p: float, pairs) -> List[Violation]:
    out: List[Violation] = []
    for i, (x, y) in enumerate(pairs):
        Lx = oracle.loss(x)
        step = y - x
        dist = float(np.linalg.norm(step))
        rhs = (Lx + float(oracle.grad(x) @ step) + b * dist**2
               + a * dist ** (2.0 - 2.0 * p) * _pow(Lx, p))
        _record(out, "semi_smooth", i, oracle.loss(y), rhs)
    return out


def check_non_critical(oracle: Oracle, theta1: float, theta2: float, samples) -> List[Violation]:
    out: List[Violation] = []
    for i, x in enumerate(samples):
        L = oracle.loss(x)
        g = oracle.grad(x)
        gsq = float(g @ g)
        _record(out, "non_critical_lower", i, theta1**2 * L, gsq)
        _record(out, "non_critical_upper", i, gsq, theta2**2 * L)
    return out


def check_semi_lipschitz(oracle: Oracle, alpha: float, beta: float, p: float,
                         pairs) -> List[Violation]:
    out: List[Violation] = []
    for i, (x, y) in enumerate(pairs):
        diff = oracle.grad(x) - oracle.grad(y)
        dist = float(np.linalg.norm(x - y))
        rhs = beta**2 * dist**2 + alpha**2 * dist ** (2.0 - 2.0 * p) * _pow(oracle.loss(x), p)
        _record(out, "semi_lipschitz", i, float(diff @ diff), rhs)
    return out


def check_semi_strong_convex(oracle: Oracle, c: float, d: float, p: float,
                             pairs) -> List[Violation]:
    out: List[Violation] = []
    for i, (x, y) in enumerate(pairs):
        Ly = oracle.loss(y)
        step = x - y
        dist = float(np.linalg.norm(step))
        lower = (Ly + float(oracle.grad(y) @ step) + d * dist**2
                 - c * dist ** (2.0 - 2.0 * p) * _pow(Ly, p))
        # L(x) >= lower, i.e. lower - L(x) <= 0
        _record(out, "semi_strong_convex", i, lower, oracle.loss(x))
    return out
