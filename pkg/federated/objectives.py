"""
Synthetic federated objectives with exactly computable constants.

f(w) = (1/N) Σ_c f_c(w) over clients of one kind:

  • ``QuadraticClient``  f_c(w) = ½‖A_c w − b_c‖²
  • ``LogCoshClient``    f_c(w) = (1/n_c) Σ_i log cosh(a_iᵀw − y_i)

``FederatedObjective`` caches μ, L, σ², G, the per-client Lipschitz bounds ℓ_c
and the optimum w*, so every convergence bound can be evaluated exactly.
"""
from __future__ import annotations

import json
import math
from abc import ABC, abstractmethod
from dataclasses import dataclass, field
from functools import cached_property
from typing import List, Literal, Optional, Sequence, Tuple

import numpy as np
from scipy.optimize import minimize

from api.schemas import ObjectiveSpec
from base.errors import (
    IndexOutOfRange,
    InvalidParam,
    SingularSystem,
)
from base.utils.logging import ColoredLogger
from base.utils.seeding import rng_for
from storage.writers import dumps

LN2 = math.log(2.0)
OBJECTIVE_STREAM = 0x0B1EC7
DEGENERATE_TOL = 1e-10

ObjectiveKind = Literal["quadratic", "logcosh"]


# ──────────────────────────────────────────────────────────────────────
# Clients
# ──────────────────────────────────────────────────────────────────────
class Client(ABC):
    kind: str

    def __init__(self, A: np.ndarray, b: np.ndarray) -> None:
        A = np.array(A, dtype=np.float64)
        b = np.array(b, dtype=np.float64)
        if A.ndim != 2 or A.shape[0] < 1:
            raise InvalidParam(f"client matrix must be (n_c >= 1, d), got {A.shape}")
        if b.shape != (A.shape[0],):
            raise InvalidParam(f"targets have shape {b.shape}, expected ({A.shape[0]},)")
        if not (np.all(np.isfinite(A)) and np.all(np.isfinite(b))):
            raise InvalidParam("client data must be finite")
        A.setflags(write=False)
        b.setflags(write=False)
        self.A = A
        self.b = b

    @property
    def n(self) -> int:
        return self.A.shape[0]

    @property
    def d(self) -> int:
        return self.A.shape[1]

    def _check_sample(self, i: int) -> None:
        if not 0 <= i < self.n:
            raise IndexOutOfRange(f"sample {i} outside [0, {self.n})")

    @abstractmethod
    def value(self, w: np.ndarray) -> float: ...

    @abstractmethod
    def grad(self, w: np.ndarray) -> np.ndarray: ...

    @abstractmethod
    def per_sample_grad(self, w: np.ndarray, i: int) -> np.ndarray: ...

    @abstractmethod
    def hessian(self, w: np.ndarray) -> np.ndarray: ...

    @property
    @abstractmethod
    def lipschitz(self) -> Optional[float]:
        """ℓ_c bounding every per-sample gradient norm, or None when unbounded."""

    def batch_grad(self, w: np.ndarray, idx: np.ndarray) -> np.ndarray:
        return np.mean([self.per_sample_grad(w, int(i)) for i in idx], axis=0)


class QuadraticClient(Client):
    """½‖Aw − b‖²; Lipschitz only on a declared ball ‖w‖ ≤ r."""

    kind = "quadratic"

    def __init__(self, A, b, ball_radius: Optional[float] = None) -> None:
        super().__init__(A, b)
        if ball_radius is not None and ball_radius <= 0:
            raise InvalidParam(f"ball_radius must be positive, got {ball_radius}")
        self.ball_radius = ball_radius

    def residual(self, w: np.ndarray) -> np.ndarray:
        return self.A @ w - self.b

    def value(self, w):
        r = self.residual(w)
        return 0.5 * float(r @ r)

    def grad(self, w):
        return self.A.T @ self.residual(w)

    def per_sample_grad(self, w, i):
        self._check_sample(i)
        a = self.A[i]
        return self.n * (float(a @ w) - self.b[i]) * a

    def hessian(self, w=None):
        return self.A.T @ self.A

    @property
    def lipschitz(self) -> Optional[float]:
        if self.ball_radius is None:
            return None
        row = np.linalg.norm(self.A, axis=1)
        return float(np.max(self.n * row * (row * self.ball_radius + np.abs(self.b))))


class LogCoshClient(Client):
    """Mean log cosh of the residuals; ‖∇f_c‖ ≤ G_c = max_i ‖a_i‖."""

    kind = "logcosh"

    def residual(self, w: np.ndarray) -> np.ndarray:
        return self.A @ w - self.b

    def value(self, w):
        r = self.residual(w)
        return float(np.mean(np.logaddexp(r, -r) - LN2))

    def grad(self, w):
        return self.A.T @ np.tanh(self.residual(w)) / self.n

    def per_sample_grad(self, w, i):
        self._check_sample(i)
        a = self.A[i]
        return math.tanh(float(a @ w) - self.b[i]) * a

    def hessian(self, w):
        sech2 = 1.0 / np.cosh(self.residual(w)) ** 2
        return (self.A.T * sech2) @ self.A / self.n

    @cached_property
    def G(self) -> float:
        return float(np.max(np.linalg.norm(self.A, axis=1)))

    @property
    def lipschitz(self) -> float:
        return self.G

    @cached_property
    def L(self) -> float:
        return float(np.linalg.eigvalsh(self.A.T @ self.A / self.n)[-1])


# ──────────────────────────────────────────────────────────────────────
# Federated objective
# ──────────────────────────────────────────────────────────────────────
@dataclass(frozen=True)
class ObjectiveConstants:
    mu: float
    L: float
    sigma_sq: float
    G: float
    ell: List[Optional[float]] = field(default_factory=list)


class FederatedObjective:
    def __init__(self, clients: Sequence[Client], *, strict: bool = False) -> None:
        if not clients:
            raise InvalidParam("a federated objective needs at least one client")
        kinds = {c.kind for c in clients}
        dims = {c.d for c in clients}
        if len(kinds) != 1 or len(dims) != 1:
            raise InvalidParam(f"clients must share kind and dimension, got {kinds} / {dims}")
        self.clients: Tuple[Client, ...] = tuple(clients)
        self.kind: ObjectiveKind = kinds.pop()  # type: ignore[assignment]
        self.d = dims.pop()
        self.strict = strict
        self.degenerate = False

    @property
    def N(self) -> int:
        return len(self.clients)

    def client(self, c: int) -> Client:
        if not 0 <= c < self.N:
            raise IndexOutOfRange(f"client {c} outside [0, {self.N})")
        return self.clients[c]

    # ------------------------------------------------------------------ #
    # Evaluation
    # ------------------------------------------------------------------ #
    def value(self, w: np.ndarray) -> float:
        return float(np.mean([c.value(w) for c in self.clients]))

    def grad(self, w: np.ndarray) -> np.ndarray:
        return np.sum([c.grad(w) for c in self.clients], axis=0) / self.N

    def grad_client(self, c: int, w: np.ndarray) -> np.ndarray:
        return self.client(c).grad(w)

    def per_sample_grad(self, c: int, w: np.ndarray, i: int) -> np.ndarray:
        return self.client(c).per_sample_grad(w, i)

    def hessian(self, w: np.ndarray) -> np.ndarray:
        return np.sum([c.hessian(w) for c in self.clients], axis=0) / self.N

    # ------------------------------------------------------------------ #
    # Constants
    # ------------------------------------------------------------------ #
    @cached_property
    def _curvature(self) -> Tuple[float, float]:
        if self.kind == "quadratic":
            eigs = [np.linalg.eigvalsh(c.hessian()) for c in self.clients]
            mu = float(min(e[0] for e in eigs))
            L = float(max(e[-1] for e in eigs))
            return max(mu, 0.0), L
        return 0.0, float(max(c.L for c in self.clients))  # type: ignore[attr-defined]

    @property
    def mu(self) -> float:
        return self._curvature[0]

    @property
    def L(self) -> float:
        return self._curvature[1]

    @property
    def G(self) -> float:
        if self.kind == "logcosh":
            return float(max(c.G for c in self.clients))  # type: ignore[attr-defined]
        return math.inf

    @property
    def ell(self) -> List[Optional[float]]:
        return [c.lipschitz for c in self.clients]

    @cached_property
    def w_star(self) -> np.ndarray:
        w = self._solve()
        w.setflags(write=False)
        return w

    @cached_property
    def f_star(self) -> float:
        return self.value(self.w_star)

    @cached_property
    def sigma_sq(self) -> float:
        w = self.w_star
        return float(np.mean([float(g @ g) for g in (c.grad(w) for c in self.clients)]))

    def constants(self) -> ObjectiveConstants:
        return ObjectiveConstants(mu=self.mu, L=self.L, sigma_sq=self.sigma_sq,
                                  G=self.G, ell=self.ell)

    def optimum(self) -> np.ndarray:
        return self.w_star

    def _flag_degenerate(self, message: str) -> None:
        self.degenerate = True
        if self.strict:
            raise SingularSystem(message)
        ColoredLogger.warning(f"[Objective] {message}; using the minimum-norm solution")

    def _solve(self) -> np.ndarray:
        if self.kind == "quadratic":
            H = np.sum([c.A.T @ c.A for c in self.clients], axis=0)
            rhs = np.sum([c.A.T @ c.b for c in self.clients], axis=0)
            eigs = np.linalg.eigvalsh(H)
            if eigs[0] > DEGENERATE_TOL * max(eigs[-1], 1.0):
                return np.linalg.solve(H, rhs)
            self._flag_degenerate(
                f"stacked system is rank deficient (lambda_min={eigs[0]:.3e})"
            )
            A = np.vstack([c.A for c in self.clients])
            b = np.concatenate([c.b for c in self.clients])
            return np.linalg.lstsq(A, b, rcond=None)[0]

        res = minimize(
            self.value,
            np.zeros(self.d),
            jac=self.grad,
            hess=self.hessian,
            method="trust-exact",
            options={"gtol": 1e-13, "maxiter": 1000},
        )
        eigs = np.linalg.eigvalsh(self.hessian(res.x))
        if eigs[0] <= DEGENERATE_TOL * max(eigs[-1], 1.0):
            self._flag_degenerate("Hessian at the optimum is singular")
        ColoredLogger.debug(
            f"[Objective] trust-exact: {res.nit} iterations, |grad|={np.linalg.norm(res.jac):.2e}"
        )
        return np.asarray(res.x, dtype=np.float64)

    # ------------------------------------------------------------------ #
    # Serialization
    # ------------------------------------------------------------------ #
    def to_json(self) -> str:
        return dumps({
            "kind": self.kind,
            "strict": self.strict,
            "clients": [
                {
                    "A": c.A,
                    "b": c.b,
                    "ball_radius": getattr(c, "ball_radius", None),
                }
                for c in self.clients
            ],
        })

    @classmethod
    def from_json(cls, text: str) -> "FederatedObjective":
        data = json.loads(text)
        clients: List[Client] = []
        for entry in data["clients"]:
            if data["kind"] == "quadratic":
                clients.append(QuadraticClient(entry["A"], entry["b"], entry.get("ball_radius")))
            elif data["kind"] == "logcosh":
                clients.append(LogCoshClient(entry["A"], entry["b"]))
            else:
                raise InvalidParam(f"unknown objective kind {data['kind']!r}")
        return cls(clients, strict=bool(data.get("strict", False)))

    def __repr__(self) -> str:
        return f"FederatedObjective(kind={self.kind}, N={self.N}, d={self.d})"


# ──────────────────────────────────────────────────────────────────────
# Generation
# ──────────────────────────────────────────────────────────────────────
def _shared_matrix(
    rng: np.random.Generator,
    n: int,
    d: int,
    spectrum: Optional[Tuple[float, float]],
    rank: Optional[int],
) -> np.ndarray:
    if spectrum is None and rank is None:
        return rng.standard_normal((n, d)) / math.sqrt(n)
    r = min(rank or d, n, d)
    U, _ = np.linalg.qr(rng.standard_normal((n, r)))
    V, _ = np.linalg.qr(rng.standard_normal((d, d)))
    if spectrum is None:
        eig = np.ones(r)
    else:
        mu, L = spectrum
        eig = np.geomspace(mu, L, r) if mu > 0 else np.linspace(L / r, L, r)
    return (U * np.sqrt(eig)) @ V[:, :r].T


def gen_synthetic(
    kind: ObjectiveKind,
    N: int,
    d: int,
    n_per_client: int,
    heterogeneity: float,
    seed: int,
    *,
    spectrum: Optional[Tuple[float, float]] = None,
    rank: Optional[int] = None,
    ball_radius: Optional[float] = None,
) -> FederatedObjective:
    """
    Clients share one base matrix A; heterogeneity only perturbs the targets,
    b_c = A·x₀ + heterogeneity·ξ_c, so μ and L are common to all clients.

    ``spectrum=(μ, L)`` pins the eigenvalues of AᵀA (geometric spacing); with
    ``rank < d`` the remaining directions get eigenvalue 0.
    """
    if N < 1 or d < 1 or n_per_client < 1:
        raise InvalidParam(f"N, d, n_per_client must be >= 1, got {N}, {d}, {n_per_client}")
    if heterogeneity < 0:
        raise InvalidParam(f"heterogeneity must be >= 0, got {heterogeneity}")
    if kind not in ("quadratic", "logcosh"):
        raise InvalidParam(f"unknown objective kind {kind!r}")

    rng = rng_for(seed, OBJECTIVE_STREAM)
    A = _shared_matrix(rng, n_per_client, d, spectrum, rank)
    x_base = rng.standard_normal(d)
    base = A @ x_base
    clients: List[Client] = []
    for _ in range(N):
        target = base + heterogeneity * rng.standard_normal(n_per_client)
        if kind == "quadratic":
            clients.append(QuadraticClient(A, target, ball_radius))
        else:
            clients.append(LogCoshClient(A, target))

    obj = FederatedObjective(clients)
    ColoredLogger.info(
        f"[Objective] {kind} N={N} d={d} n={n_per_client} heterogeneity={heterogeneity:g} "
        f"(mu={obj.mu:.4g}, L={obj.L:.4g})"
    )
    return obj


def from_spec(spec: ObjectiveSpec) -> FederatedObjective:
    return gen_synthetic(
        spec.kind,
        spec.N,
        spec.d,
        spec.n_per_client,
        spec.heterogeneity,
        spec.seed,
        spectrum=spec.spectrum,
        rank=spec.rank,
        ball_radius=spec.ball_radius,
    )


# Flat API mirroring the methods
def grad_client(obj: FederatedObjective, c: int, w: np.ndarray) -> np.ndarray:
    return obj.grad_client(c, w)


def value(obj: FederatedObjective, w: np.ndarray) -> float:
    return obj.value(w)


def grad(obj: FederatedObjective, w: np.ndarray) -> np.ndarray:
    return obj.grad(w)


def per_sample_grad(obj: FederatedObjective, c: int, w: np.ndarray, i: int) -> np.ndarray:
    return obj.per_sample_grad(c, w, i)


def constants(obj: FederatedObjective) -> ObjectiveConstants:
    return obj.constants()


def optimum(obj: FederatedObjective) -> np.ndarray:
    return obj.optimum()
