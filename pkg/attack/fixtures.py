"""
Fixtures for the attack experiments.

* Closed-form functions with known regularity (``squared_norm``,
  ``softplus_interval``, ``sigmoid_affine``, ``logcosh_linear``) and
  functions that break every condition (``relu_linear``, ``inverse_norm``,
  ``tanh_linear``), with point / pair samplers on their domains.
* ``build_attack``: the reconstruction problem described by an ``AttackSpec``.
"""
from __future__ import annotations

from dataclasses import dataclass, field
from typing import Callable, Dict, Optional, Tuple

import numpy as np
from scipy.special import expit

from api.schemas import AttackSpec
from attack.models import AttackModel, make_model, regression_label_for, true_point
from attack.problem import AttackProblem
from base.errors import InvalidParam
from base.utils.seeding import rng_for
from privacy.accountant import gaussian_sigma
from sketching.operators import build_sketch

_NOISE_STREAM = 0x5EED


@dataclass
class FunctionFixture:
    """
    A scalar function on a bounded domain.

    ``constants`` maps a property name to the parameters it holds with
    (``semi_smooth``: (a, b, p), ``non_critical``: (θ₁, θ₂),
    ``semi_lipschitz``: (α, β, p), ``semi_strong_convex``: (c, d, p)).
    Properties missing from it do not hold for any constants.
    """

    name: str
    m: int
    f: Callable[[np.ndarray], float]
    df: Callable[[np.ndarray], np.ndarray]
    project: Callable[[np.ndarray], np.ndarray]
    constants: Dict[str, Tuple[float, ...]] = field(default_factory=dict)
    min_radius: float = 0.0

    def loss(self, x: np.ndarray) -> float:
        return float(self.f(x))

    def grad(self, x: np.ndarray) -> np.ndarray:
        return np.asarray(self.df(x), dtype=np.float64)

    # ------------------------------------------------------------------ #
    def points(self, n: int, rng: np.random.Generator) -> np.ndarray:
        """Random directions with log-uniform radii in [max(min_radius, 1e-2), 1]."""
        dirs = rng.standard_normal((n, self.m))
        dirs /= np.linalg.norm(dirs, axis=1, keepdims=True)
        lo = max(self.min_radius, 1e-2)
        radii = np.exp(rng.uniform(np.log(lo), 0.0, size=n))
        return np.array([self.project(x) for x in dirs * radii[:, None]])

    def pairs(self, n: int, rng: np.random.Generator) -> np.ndarray:
        """(x, y) with y = x + step, step lengths log-uniform in [1e-3, 1]."""
        xs = self.points(n, rng)
        steps = rng.standard_normal((n, self.m))
        steps /= np.linalg.norm(steps, axis=1, keepdims=True)
        steps *= np.exp(rng.uniform(np.log(1e-3), 0.0, size=n))[:, None]
        ys = np.array([self.project(x + s) for x, s in zip(xs, steps)])
        return np.stack([xs, ys], axis=1)


def _unit_ball(min_radius: float = 0.0):
    def project(x: np.ndarray) -> np.ndarray:
        norm = np.linalg.norm(x)
        if norm > 1.0:
            return x / norm
        if norm < min_radius:
            return x * (min_radius / norm) if norm > 0 else np.full_like(x, min_radius / np.sqrt(len(x)))
        return x
    return project


def _box(lo: float, hi: float):
    return lambda x: np.clip(x, lo, hi)


def _direction(m: int, norm: float, seed: int) -> np.ndarray:
    w = np.random.default_rng(seed).standard_normal(m)
    return norm * w / np.linalg.norm(w)


# ──────────────────────────────────────────────────────────────────────
# Functions with known constants
# ──────────────────────────────────────────────────────────────────────
def squared_norm(m: int = 3) -> FunctionFixture:
    """‖x‖² on the unit ball: every condition holds with equality."""
    return FunctionFixture(
        "squared_norm", m,
        f=lambda x: float(x @ x),
        df=lambda x: 2.0 * x,
        project=_unit_ball(),
        constants={
            "semi_smooth": (0.0, 1.0, 0.5),
            "non_critical": (2.0, 2.0),
            "semi_lipschitz": (0.0, 2.0, 0.5),
            "semi_strong_convex": (0.0, 1.0, 0.5),
        },
    )


def softplus_interval() -> FunctionFixture:
    """
    ln(1 + eˣ) on [−1, 1]. L'' ≤ 1/4, and ‖∇L‖²/L = σ(x)²/ln(1+eˣ) stays in
    [0.23, 0.41] on the interval.
    """
    return FunctionFixture(
        "softplus_interval", 1,
        f=lambda x: float(np.logaddexp(0.0, x[0])),
        df=lambda x: np.array([expit(x[0])]),
        project=_box(-1.0, 1.0),
        constants={
            "semi_smooth": (0.0, 0.125, 0.5),
            "non_critical": (np.sqrt(0.2), np.sqrt(0.45)),
            "semi_lipschitz": (0.0, 0.25, 0.5),
        },
    )


def sigmoid_affine(m: int = 3, w_norm: float = 2.0, bias: float = 0.3,
                   seed: int = 7) -> FunctionFixture:
    """sigmoid(wᵀx + b): |sigmoid''| ≤ 1/(6√3) < 0.0963, so the Hessian is ≤ 0.0963‖w‖²."""
    w = _direction(m, w_norm, seed)
    return FunctionFixture(
        "sigmoid_affine", m,
        f=lambda x: float(expit(w @ x + bias)),
        df=lambda x: float(expit(w @ x + bias) * expit(-(w @ x + bias))) * w,
        project=_unit_ball(),
        constants={
            "semi_smooth": (0.0, 0.05 * w_norm**2, 0.5),
            "semi_lipschitz": (0.0, 0.1 * w_norm**2, 0.5),
        },
    )


def logcosh_linear(m: int = 3, w_norm: float = 1.5, seed: int = 11) -> FunctionFixture:
    """log cosh(wᵀx): gradient is ‖w‖²-Lipschitz."""
    w = _direction(m, w_norm, seed)
    return FunctionFixture(
        "logcosh_linear", m,
        f=lambda x: float(np.logaddexp(w @ x, -(w @ x)) - np.log(2.0)),
        df=lambda x: float(np.tanh(w @ x)) * w,
        project=_unit_ball(),
        constants={"semi_lipschitz": (0.5, w_norm**2, 0.5)},
    )


# ──────────────────────────────────────────────────────────────────────
# Functions that break every condition
# ──────────────────────────────────────────────────────────────────────
PROBE_CONSTANTS: Dict[str, Tuple[float, ...]] = {
    "semi_smooth": (1.0, 1.0, 0.5),
    "non_critical": (1.0, 2.0),
    "semi_lipschitz": (1.0, 1.0, 0.5),
    "semi_strong_convex": (1.0, 1.0, 0.5),
}


def relu_linear(m: int = 3, seed: int = 3) -> FunctionFixture:
    w = _direction(m, 1.0, seed)
    return FunctionFixture(
        "relu_linear", m,
        f=lambda x: max(float(w @ x), 0.0),
        df=lambda x: w.copy() if w @ x > 0 else np.zeros(m),
        project=_unit_ball(),
    )


def inverse_norm(m: int = 3) -> FunctionFixture:
    """1/‖x‖₂ on the punctured unit ball (‖x‖ ≥ 1e-2)."""
    return FunctionFixture(
        "inverse_norm", m,
        f=lambda x: float(1.0 / np.linalg.norm(x)),
        df=lambda x: -x / np.linalg.norm(x) ** 3,
        project=_unit_ball(1e-2),
        min_radius=1e-2,
    )


def tanh_linear(m: int = 3, w_norm: float = 3.0, seed: int = 5) -> FunctionFixture:
    w = _direction(m, w_norm, seed)
    return FunctionFixture(
        "tanh_linear", m,
        f=lambda x: float(np.tanh(w @ x)),
        df=lambda x: (1.0 - float(np.tanh(w @ x)) ** 2) * w,
        project=_unit_ball(),
    )


POSITIVE_FIXTURES = (squared_norm, softplus_interval, sigmoid_affine)
NEGATIVE_FIXTURES = (relu_linear, inverse_norm, tanh_linear)


# ──────────────────────────────────────────────────────────────────────
# Reconstruction problems
# ──────────────────────────────────────────────────────────────────────
@dataclass
class AttackSetup:
    model: AttackModel
    x_true: np.ndarray
    problem: AttackProblem
    noise_sigma: float


def observed_sigma(spec: AttackSpec, model: AttackModel, x_true: np.ndarray) -> float:
    """
    Noise level of the observed gradient: ``spec.noise_sigma``, or the
    Gaussian-mechanism σ of ``spec.dp`` with sensitivity ‖∇_w F(w, x̃)‖
    unless the dp section lists one.
    """
    if spec.dp is None:
        return spec.noise_sigma
    if spec.dp.sigma_override is not None:
        return float(spec.dp.sigma_override)
    if spec.dp.lipschitz:
        sensitivity = spec.dp.lipschitz[0]
    else:
        sensitivity = float(np.linalg.norm(model.grad_w(x_true)))
    return gaussian_sigma(sensitivity, spec.dp.eps_hat, spec.dp.delta_hat)


def build_attack(
    spec: AttackSpec,
    *,
    noise_seed: Optional[int] = None,
    gradient: Optional[np.ndarray] = None,
    noised: bool = True,
) -> AttackSetup:
    """
    Model, true point and problem for ``spec``.

    ``gradient`` replaces the simulated observation (e.g. read from a CSV);
    ``noise_seed`` selects the noise draw, ``noised=False`` drops it.
    """
    if spec.sketch is not None and spec.sketch.d != spec.d:
        raise InvalidParam(f"sketch dimension {spec.sketch.d} != model dimension {spec.d}")
    model = make_model(spec)
    x_true = true_point(model, spec.seed)
    if model.kind == "linreg":
        model = regression_label_for(model, x_true)
    sketch = build_sketch(spec.sketch, 0) if spec.sketch is not None else None
    sigma = observed_sigma(spec, model, x_true) if noised else 0.0
    if gradient is not None:
        problem = AttackProblem.from_gradient(model, gradient, sketch=sketch,
                                              noise_sigma=sigma, x_true=x_true)
    else:
        rng = rng_for(spec.seed, _NOISE_STREAM, noise_seed or 0)
        problem = AttackProblem.from_data(model, x_true, sketch=sketch,
                                          noise_sigma=sigma, rng=rng)
    return AttackSetup(model, x_true, problem, sigma)
