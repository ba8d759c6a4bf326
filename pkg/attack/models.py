"""
Models F(w, x) = ℓ(wᵀPx) attacked by gradient inversion.

The weights ``w`` (length d) and the feature map ``P`` (d × m) are fixed and
public; the attacker searches over the private input x ∈ ℝ^m. Every model
here is a generalized linear one, so

    G(x) := ∇_w F(w, x) = φ(z)·Px,            z = wᵀPx
    J(x) := ∂G/∂x       = φ(z)·P + φ'(z)·(Px)(wᵀP)

with φ = ℓ'. ``J`` is the pseudo-Hessian; its Gram matrix JJᵀ is the
pseudo-kernel.
"""
from __future__ import annotations

from dataclasses import dataclass
from typing import Literal, Optional

import numpy as np
from scipy.special import expit

from api.schemas import AttackSpec
from base.errors import DimensionMismatch, InvalidParam
from base.utils.seeding import rng_for

ModelKind = Literal["linreg", "logistic"]

_MODEL_STREAM = 0xA77AC


@dataclass(frozen=True)
class AttackModel:
    """
    ``kind="linreg"``: F = ½(z − y)².
    ``kind="logistic"``: F = ln(1 + e^{−yz}), y ∈ {−1, +1} known to the attacker.
    """

    kind: ModelKind
    w: np.ndarray
    P: np.ndarray
    label: float

    def __post_init__(self) -> None:
        if self.kind not in ("linreg", "logistic"):
            raise InvalidParam(f"unknown attack model {self.kind!r}")
        if self.P.ndim != 2 or self.P.shape[0] != self.w.shape[0]:
            raise DimensionMismatch(self.w.shape[0], self.P.shape[0], "feature map rows")
        if self.kind == "logistic" and self.label not in (-1.0, 1.0):
            raise InvalidParam(f"logistic label must be ±1, got {self.label}")

    @property
    def d(self) -> int:
        return self.w.shape[0]

    @property
    def m(self) -> int:
        return self.P.shape[1]

    # ------------------------------------------------------------------ #
    def _z(self, x: np.ndarray) -> float:
        return float(self.w @ (self.P @ x))

    def _phi(self, z: float) -> float:
        if self.kind == "linreg":
            return z - self.label
        return -self.label * float(expit(-self.label * z))

    def _dphi(self, z: float) -> float:
        if self.kind == "linreg":
            return 1.0
        return float(expit(z) * expit(-z))

    def _check(self, x: np.ndarray) -> np.ndarray:
        x = np.asarray(x, dtype=np.float64)
        if x.shape != (self.m,):
            raise DimensionMismatch(self.m, x.shape[0] if x.ndim else 0, "attack input")
        return x

    def value(self, x: np.ndarray) -> float:
        z = self._z(self._check(x))
        if self.kind == "linreg":
            return 0.5 * (z - self.label) ** 2
        return float(np.logaddexp(0.0, -self.label * z))

    def grad_w(self, x: np.ndarray) -> np.ndarray:
        """G(x) = ∇_w F(w, x)."""
        x = self._check(x)
        Px = self.P @ x
        return self._phi(float(self.w @ Px)) * Px

    def jacobian(self, x: np.ndarray) -> np.ndarray:
        """J(x) = ∂G/∂x, shape d × m."""
        x = self._check(x)
        Px = self.P @ x
        z = float(self.w @ Px)
        return self._phi(z) * self.P + self._dphi(z) * np.outer(Px, self.w @ self.P)

    def scaled(self, factor: float) -> "AttackModel":
        return AttackModel(self.kind, factor * self.w, self.P, self.label)


# ──────────────────────────────────────────────────────────────────────
# Construction from an AttackSpec
# ──────────────────────────────────────────────────────────────────────
def _feature_map(spec: AttackSpec, rng: np.random.Generator) -> np.ndarray:
    d, m = spec.d, spec.m
    if spec.feature_map == "identity":
        return np.eye(d, m)
    P = rng.standard_normal((d, m)) / np.sqrt(m)
    if spec.feature_map == "rank_deficient":
        U, s, Vt = np.linalg.svd(P, full_matrices=False)
        s[-1] = 0.0
        P = (U * s) @ Vt
    return P


def make_model(spec: AttackSpec, *, label: Optional[float] = None) -> AttackModel:
    """
    Unit-norm ``w`` and feature map from ``spec.seed``.

    The default label places the true point off the model's zero-gradient
    set: y = z̃ − 1 for regression (so φ(z̃) = 1) and y = −1 for logistic.
    """
    if spec.d > spec.m:
        raise InvalidParam(f"attack models need d <= m, got d={spec.d} m={spec.m}")
    rng = rng_for(spec.seed, _MODEL_STREAM)
    w = rng.standard_normal(spec.d)
    w /= np.linalg.norm(w)
    P = _feature_map(spec, rng)
    if label is None:
        label = -1.0 if spec.model == "logistic" else 0.0
    model = AttackModel(spec.model, w, P, float(label))
    return model


def true_point(model: AttackModel, seed: int) -> np.ndarray:
    """
    x̃ = ½·û + ½·e⊥ with û the unit direction of Pᵀw and e⊥ a random unit
    vector orthogonal to it (û alone when m = 1).
    """
    rng = rng_for(seed, _MODEL_STREAM, 1)
    u = model.P.T @ model.w
    norm = np.linalg.norm(u)
    if norm == 0.0:
        raise InvalidParam("Pᵀw vanishes; the model ignores every input")
    u = u / norm
    if model.m == 1:
        return 0.5 * u
    e = rng.standard_normal(model.m)
    e -= (e @ u) * u
    e /= np.linalg.norm(e)
    return 0.5 * u + 0.5 * e


def regression_label_for(model: AttackModel, x_true: np.ndarray) -> AttackModel:
    """Linear-regression model whose residual at ``x_true`` is exactly 1."""
    z = float(model.w @ (model.P @ x_true))
    return AttackModel("linreg", model.w, model.P, z - 1.0)
