"""
Attack objective and its regularity constants.

    plain:     L(x)   = ‖G(x) − g‖²
    sketched:  L_R(x) = ‖R·G(x) − R·g‖²,    ∇L_R(x) = 2·J(x)ᵀ Rᵀ (R·G(x) − R·g)

With no operator the residual is taken in ℝ^d; with one it lives in ℝ^b and
is de-sketched before the Jacobian product. For the identity operator both
paths perform the same floating-point operations.
"""
from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Optional, Tuple

import numpy as np

from attack.models import AttackModel
from base.errors import (
    DimensionMismatch,
    HypothesisViolated,
    InvalidParam,
    RankDeficient,
    SingularKernel,
)
from base.utils.logging import ColoredLogger
from sketching.operators import SketchOperator, singular_values
from storage.models import ConditionEstimates

THETA_FLOOR = 1e-8
GAMMA_FLOOR = 1e-10
FD_STEP = 1e-5
# θ₁ is shrunk and θ₂, b are inflated by these factors so sampled extremes bound the unsampled ones
THETA_MARGIN = 0.9
CURVATURE_MARGIN = 1.5


@dataclass
class AttackProblem:
    model: AttackModel
    observed: np.ndarray
    sketch: Optional[SketchOperator] = None
    noise_sigma: float = 0.0
    x_true: Optional[np.ndarray] = None

    @classmethod
    def from_data(
        cls,
        model: AttackModel,
        x_true: np.ndarray,
        *,
        sketch: Optional[SketchOperator] = None,
        noise_sigma: float = 0.0,
        rng: Optional[np.random.Generator] = None,
    ) -> "AttackProblem":
        """Observe g = ∇_w F(w, x̃) (+ N(0, σ²I) when ``noise_sigma > 0``), sketched if requested."""
        g = model.grad_w(x_true)
        if noise_sigma > 0.0:
            if rng is None:
                raise InvalidParam("a noised observation needs an rng")
            g = g + rng.normal(0.0, noise_sigma, size=g.shape)
        return cls.from_gradient(model, g, sketch=sketch, noise_sigma=noise_sigma,
                                 x_true=np.asarray(x_true, dtype=np.float64))

    @classmethod
    def from_gradient(
        cls,
        model: AttackModel,
        g: np.ndarray,
        *,
        sketch: Optional[SketchOperator] = None,
        noise_sigma: float = 0.0,
        x_true: Optional[np.ndarray] = None,
    ) -> "AttackProblem":
        g = np.asarray(g, dtype=np.float64)
        if g.shape != (model.d,):
            raise DimensionMismatch(model.d, g.shape[0] if g.ndim else 0, "observed gradient")
        if sketch is not None and sketch.d != model.d:
            raise DimensionMismatch(model.d, sketch.d, "sketch input dimension")
        observed = g if sketch is None else sketch.sk(g)
        return cls(model, observed, sketch, noise_sigma, x_true)

    @property
    def m(self) -> int:
        return self.model.m

    # ------------------------------------------------------------------ #
    def _residual(self, x: np.ndarray) -> np.ndarray:
        G = self.model.grad_w(x)
        if self.sketch is None:
            return G - self.observed
        return self.sketch.sk(G) - self.observed

    def loss(self, x: np.ndarray) -> float:
        r = self._residual(x)
        return float(r @ r)

    def grad(self, x: np.ndarray) -> np.ndarray:
        r = self._residual(x)
        back = r if self.sketch is None else self.sketch.desk(r)
        return 2.0 * (self.model.jacobian(x).T @ back)


def loss_L(problem: AttackProblem, x: np.ndarray) -> float:
    return problem.loss(x)


def grad_L(problem: AttackProblem, x: np.ndarray) -> np.ndarray:
    return problem.grad(x)


# ──────────────────────────────────────────────────────────────────────
# Pseudo-kernel
# ──────────────────────────────────────────────────────────────────────
def pseudo_kernel(problem: AttackProblem, x: np.ndarray) -> np.ndarray:
    """K(x) = J(x)J(x)ᵀ, d × d, symmetrized."""
    J = problem.model.jacobian(x)
    K = J @ J.T
    return 0.5 * (K + K.T)


def ball_samples(center: np.ndarray, radius: float, count: int,
                 rng: np.random.Generator) -> np.ndarray:
    """``count`` points uniform in the ball; the first one is the center."""
    m = center.shape[0]
    dirs = rng.standard_normal((count, m))
    dirs /= np.linalg.norm(dirs, axis=1, keepdims=True)
    radii = radius * rng.random(count) ** (1.0 / m)
    pts = center + dirs * radii[:, None]
    pts[0] = center
    return pts


def _sample_region(problem: AttackProblem, sample_count: int, center, radius, rng):
    if sample_count < 1:
        raise InvalidParam(f"sample_count must be >= 1, got {sample_count}")
    if center is None:
        if problem.x_true is None:
            raise InvalidParam("pass a center when the problem has no known data point")
        center = problem.x_true
    if rng is None:
        rng = np.random.default_rng(0)
    return ball_samples(np.asarray(center, dtype=np.float64), radius, sample_count, rng)


def estimate_thetas(
    problem: AttackProblem,
    sample_count: int,
    *,
    center: Optional[np.ndarray] = None,
    radius: float = 0.1,
    rng: Optional[np.random.Generator] = None,
) -> Tuple[float, float]:
    """
    (θ₁, θ₂): min / max over sampled x of the square roots of the extreme
    pseudo-kernel eigenvalues. Logs ``SingularKernel`` when θ₁ < 1e-8.
    """
    pts = _sample_region(problem, sample_count, center, radius, rng)
    lo, hi = math.inf, 0.0
    for x in pts:
        eig = np.linalg.eigvalsh(pseudo_kernel(problem, x))
        lo = min(lo, math.sqrt(max(float(eig[0]), 0.0)))
        hi = max(hi, math.sqrt(max(float(eig[-1]), 0.0)))
    if lo < THETA_FLOOR:
        ColoredLogger.warn_condition(
            f"[Attack] pseudo-kernel is singular on the sampled region (theta1={lo:.3g})",
            SingularKernel,
        )
    return lo, hi


def fd_hessian(problem: AttackProblem, x: np.ndarray, h: float = FD_STEP) -> np.ndarray:
    """Central differences of ∇L, symmetrized."""
    m = x.shape[0]
    H = np.empty((m, m))
    for j in range(m):
        e = np.zeros(m)
        e[j] = h
        H[:, j] = (problem.grad(x + e) - problem.grad(x - e)) / (2.0 * h)
    return 0.5 * (H + H.T)


def sketch_stats(problem: AttackProblem) -> Tuple[float, float, float]:
    """(τ, γ₁, γ₂) of the drawn operator; all 1 without one."""
    if problem.sketch is None:
        return 1.0, 1.0, 1.0
    sv = singular_values(problem.sketch)
    return float(sv[0]), float(sv[-1]), float(sv[0])


def estimates(
    problem: AttackProblem,
    *,
    sample_count: int = 64,
    center: Optional[np.ndarray] = None,
    radius: float = 0.1,
    rng: Optional[np.random.Generator] = None,
    p: float = 0.5,
) -> ConditionEstimates:
    """
    Measured constants on a ball around ``center``.

    β is the largest ‖J‖ (Lipschitz constant of G on the ball). The
    semi-smoothness pair is taken with a = 0 and b = ½·max λ_max of the
    Hessian of L; the semi-strong-convexity and semi-Lipschitz constants come
    from the same Hessians with c = α = 0.
    """
    rng = rng if rng is not None else np.random.default_rng(0)
    theta1, theta2 = estimate_thetas(problem, sample_count, center=center, radius=radius, rng=rng)
    pts = _sample_region(problem, sample_count, center, radius, rng)

    lam_min, lam_max, lam_abs = math.inf, -math.inf, 0.0
    for x in pts:
        eig = np.linalg.eigvalsh(fd_hessian(problem, x))
        lam_min = min(lam_min, float(eig[0]))
        lam_max = max(lam_max, float(eig[-1]))
        lam_abs = max(lam_abs, float(np.abs(eig).max()))

    tau, gamma1, gamma2 = sketch_stats(problem)
    d_sc = 0.5 * lam_min
    d_sc = d_sc / CURVATURE_MARGIN if d_sc > 0 else d_sc
    est = ConditionEstimates(
        beta=theta2 / THETA_MARGIN,
        theta1=theta1 * THETA_MARGIN,
        theta2=theta2 / THETA_MARGIN,
        a=0.0,
        b=0.5 * max(lam_max, 0.0) * CURVATURE_MARGIN,
        p=p,
        tau=tau,
        gamma1=gamma1,
        gamma2=gamma2,
        c=0.0,
        d_sc=d_sc,
        alpha_sl=0.0,
        beta_sl=lam_abs * CURVATURE_MARGIN,
    )
    ColoredLogger.debug(
        f"[Attack] estimates: theta=({est.theta1:.4g}, {est.theta2:.4g}) b={est.b:.4g} "
        f"d_sc={est.d_sc:.4g} tau={tau:.4g} gamma=({gamma1:.4g}, {gamma2:.4g})"
    )
    return est


# ──────────────────────────────────────────────────────────────────────
# Step-size rules
# ──────────────────────────────────────────────────────────────────────
def step_size_rule(est: ConditionEstimates) -> Tuple[float, float]:
    """
    η = (θ₁² − a·θ₂^{2−2p}) / (2b·θ₂²),   γ = η·(θ₁² − a·θ₂^{2−2p}) / 2.

    The θ's are read as the non-critical-point constants of L itself; pass
    ``est.objective_view()`` for estimates measured on the pseudo-kernel.
    """
    if est.b <= 0:
        raise InvalidParam(f"semi-smoothness constant b must be positive, got {est.b}")
    gap = est.theta1**2 - est.a * est.theta2 ** (2.0 - 2.0 * est.p)
    if gap <= 0:
        raise HypothesisViolated(
            f"theta1^2={est.theta1**2:.4g} <= a*theta2^(2-2p)={est.a * est.theta2 ** (2 - 2 * est.p):.4g}"
        )
    eta = gap / (2.0 * est.b * est.theta2**2)
    return eta, eta * gap / 2.0


def solution_step_rule(est: ConditionEstimates) -> Tuple[float, float]:
    """
    Step for ‖x_{t+1} − x*‖² ≤ (1 − γ)‖x_t − x*‖²:

        ζ = θ₁/(θ₁ − α^{1/p})·(β² + (α/θ₁^p)^{1/(1−p)})
        ξ = 2(d − c^{1/(2p)}·ζ/θ₁² − c^{1/(2−2p)})
        η = ξ/(2ζ),  γ = ξη/2

    with (α, β) = (alpha_sl, beta_sl) and (c, d) = (c, d_sc).
    """
    p = est.p
    if not 0.0 < p < 1.0:
        raise InvalidParam(f"solution step rule needs p in (0, 1), got {p}")
    theta1, alpha, beta = est.theta1, est.alpha_sl, est.beta_sl
    if theta1 <= alpha ** (1.0 / p):
        raise HypothesisViolated(f"theta1={theta1:.4g} <= alpha^(1/p)={alpha ** (1.0 / p):.4g}")
    zeta = theta1 / (theta1 - alpha ** (1.0 / p)) * (
        beta**2 + (alpha / theta1**p) ** (1.0 / (1.0 - p))
    )
    xi = 2.0 * (est.d_sc - est.c ** (1.0 / (2.0 * p)) * zeta / theta1**2
                - est.c ** (1.0 / (2.0 - 2.0 * p)))
    if xi <= 0:
        raise HypothesisViolated(f"xi={xi:.4g} <= 0: semi-strong convexity too weak")
    eta = xi / (2.0 * zeta)
    return eta, xi * eta / 2.0


def sketched_constants(
    est: ConditionEstimates, sketch_stats: Tuple[float, float, float]
) -> Tuple[float, float, float, float]:
    """(A, B, θ₁_R, θ₂_R) = (2τβ + 2θ₂γ₂, τ²β, 2θ₁γ₁, 2θ₂γ₂)."""
    tau, gamma1, gamma2 = sketch_stats
    if gamma1 < GAMMA_FLOOR:
        raise RankDeficient(f"smallest singular value of the sketch is {gamma1:.3g}")
    A = 2.0 * tau * est.beta + 2.0 * est.theta2 * gamma2
    B = tau**2 * est.beta
    return A, B, 2.0 * est.theta1 * gamma1, 2.0 * est.theta2 * gamma2
