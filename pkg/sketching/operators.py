"""
Seeded linear sketch operators R_t : ℝ^d → ℝ^b and their transposes.

Every kind is a subclass of ``SketchOperator`` implementing ``_forward``
(columns of a d × k block → b × k) and ``_adjoint`` (b × k → d × k). The base
class owns dimension checks and the 1-D/2-D plumbing, so ``sk`` / ``desk``
accept either a single vector or a stack of column vectors.

All clients rebuild the same operator from ``(spec, round)``: the operator
seed is ``derive_round_seed(spec.master_seed, round)`` and nothing else is
random.
"""
from __future__ import annotations

import csv
from abc import ABC, abstractmethod
from functools import cached_property
from pathlib import Path
from typing import ClassVar, Dict, Type, Union

import numpy as np
from numpy.random import PCG64, Generator

from api.schemas import SketchKind, SketchSpec
from base.errors import DimensionMismatch, Unsupported, UncertifiedSketch
from base.utils.logging import ColoredLogger
from base.utils.seeding import derive_round_seed
from sketching.hadamard import fwht, next_pow2
from sketching.hashing import PolynomialHashFamily

ArrayLike = Union[np.ndarray, list]


def ordered_matmul(M: np.ndarray, X: np.ndarray) -> np.ndarray:
    """M @ X accumulated over the columns of M in index order, whatever BLAS and its thread count."""
    out = np.zeros((M.shape[0], X.shape[1]))
    for j in range(M.shape[1]):
        out += M[:, j, None] * X[j]
    return out


class SketchOperator(ABC):
    """Immutable once built; safe to apply from several threads."""

    kind: ClassVar[SketchKind]

    def __init__(self, spec: SketchSpec, round: int) -> None:
        self._spec = spec
        self._round = int(round)
        self._seed = derive_round_seed(spec.master_seed, self._round)
        self._build(Generator(PCG64(self._seed)))

    # ------------------------------------------------------------------ #
    @property
    def spec(self) -> SketchSpec:
        return self._spec

    @property
    def round(self) -> int:
        return self._round

    @property
    def seed(self) -> int:
        return self._seed

    @property
    def d(self) -> int:
        return self._spec.d

    @property
    def b(self) -> int:
        return self._spec.b_sketch

    def __repr__(self) -> str:
        return f"{type(self).__name__}(d={self.d}, b={self.b}, round={self._round})"

    # ------------------------------------------------------------------ #
    @abstractmethod
    def _build(self, rng: Generator) -> None: ...

    @abstractmethod
    def _forward(self, V: np.ndarray) -> np.ndarray: ...

    @abstractmethod
    def _adjoint(self, U: np.ndarray) -> np.ndarray: ...

    # ------------------------------------------------------------------ #
    @staticmethod
    def _apply(fn, x: ArrayLike, expected: int, what: str) -> np.ndarray:
        arr = np.asarray(x, dtype=np.float64)
        if arr.ndim not in (1, 2) or arr.shape[0] != expected:
            raise DimensionMismatch(expected, arr.shape[0] if arr.ndim else 0, what)
        if arr.ndim == 1:
            return fn(arr[:, None])[:, 0]
        return fn(arr)

    def sk(self, v: ArrayLike) -> np.ndarray:
        """R v for a vector of length d (or R V for a d × k block)."""
        return self._apply(self._forward, v, self.d, "sketch input")

    def desk(self, u: ArrayLike) -> np.ndarray:
        """Rᵀ u for a vector of length b (or Rᵀ U for a b × k block)."""
        return self._apply(self._adjoint, u, self.b, "de-sketch input")

    def to_dense(self) -> np.ndarray:
        return self._forward(np.eye(self.d))


# ──────────────────────────────────────────────────────────────────────
# Dense kinds
# ──────────────────────────────────────────────────────────────────────
class GaussianSketch(SketchOperator):
    kind = SketchKind.GAUSSIAN

    def _build(self, rng: Generator) -> None:
        self._R = rng.standard_normal((self.b, self.d)) / np.sqrt(self.b)
        self._R.setflags(write=False)

    def _forward(self, V: np.ndarray) -> np.ndarray:
        return ordered_matmul(self._R, V)

    def _adjoint(self, U: np.ndarray) -> np.ndarray:
        return ordered_matmul(self._R.T, U)

    def to_dense(self) -> np.ndarray:
        return self._R.copy()


class AMSSketch(SketchOperator):
    """R[i, j] = h_i(j) with b independent 4-wise sign hashes scaled by 1/√b."""

    kind = SketchKind.AMS

    def _build(self, rng: Generator) -> None:
        self._hashes = PolynomialHashFamily.draw(rng, k=4, n_funcs=self.b)

    @cached_property
    def _R(self) -> np.ndarray:
        R = self._hashes.signs(np.arange(self.d)) / np.sqrt(self.b)
        R.setflags(write=False)
        return R

    def _forward(self, V: np.ndarray) -> np.ndarray:
        return ordered_matmul(self._R, V)

    def _adjoint(self, U: np.ndarray) -> np.ndarray:
        return ordered_matmul(self._R.T, U)

    def to_dense(self) -> np.ndarray:
        return self._R.copy()


class SRHTSketch(SketchOperator):
    """
    √(n/b)·S·H·D on the zero-padded space n = next_pow2(d).

    ``sk`` pads, flips signs, transforms and keeps ``rows``; ``desk``
    scatters back into the padded space and truncates to d.
    """

    kind = SketchKind.SRHT

    def _build(self, rng: Generator) -> None:
        self.n_pad = next_pow2(self.d)
        self.signs = rng.choice(np.array([-1.0, 1.0]), size=self.n_pad)
        self.rows = np.sort(rng.choice(self.n_pad, size=self.b, replace=False))
        self.scale = np.sqrt(self.n_pad / self.b)
        self.signs.setflags(write=False)
        self.rows.setflags(write=False)

    def _forward(self, V: np.ndarray) -> np.ndarray:
        X = np.zeros((self.n_pad, V.shape[1]))
        X[: self.d] = V
        X *= self.signs[:, None]
        return fwht(X)[self.rows] * self.scale

    def _adjoint(self, U: np.ndarray) -> np.ndarray:
        X = np.zeros((self.n_pad, U.shape[1]))
        X[self.rows] = U * self.scale
        Z = fwht(X) * self.signs[:, None]
        return Z[: self.d]


class UniformSamplingSketch(SketchOperator):
    """√(d/b)·S·D: b coordinates sampled without replacement, random signs."""

    kind = SketchKind.UNIFORM_SAMPLING

    def _build(self, rng: Generator) -> None:
        self.rows = np.sort(rng.choice(self.d, size=self.b, replace=False))
        self.signs = rng.choice(np.array([-1.0, 1.0]), size=self.d)
        self.scale = np.sqrt(self.d / self.b)
        self.rows.setflags(write=False)
        self.signs.setflags(write=False)

    def _forward(self, V: np.ndarray) -> np.ndarray:
        return (V[self.rows] * self.signs[self.rows, None]) * self.scale

    def _adjoint(self, U: np.ndarray) -> np.ndarray:
        out = np.zeros((self.d, U.shape[1]))
        out[self.rows] = (U * self.scale) * self.signs[self.rows, None]
        return out


class IdentitySketch(SketchOperator):
    kind = SketchKind.IDENTITY

    def _build(self, rng: Generator) -> None:
        pass

    def _forward(self, V: np.ndarray) -> np.ndarray:
        return V.copy()

    def _adjoint(self, U: np.ndarray) -> np.ndarray:
        return U.copy()


# ──────────────────────────────────────────────────────────────────────
# Hashed kinds: s nonzeros per column, stored as (rows, values) of shape (d, s)
# ──────────────────────────────────────────────────────────────────────
class _HashedColumns(SketchOperator):
    col_rows: np.ndarray
    col_vals: np.ndarray

    def _freeze(self) -> None:
        self.col_rows.setflags(write=False)
        self.col_vals.setflags(write=False)

    def _forward(self, V: np.ndarray) -> np.ndarray:
        out = np.zeros((self.b, V.shape[1]))
        for j in range(self.col_rows.shape[1]):
            np.add.at(out, self.col_rows[:, j], self.col_vals[:, j, None] * V)
        return out

    def _adjoint(self, U: np.ndarray) -> np.ndarray:
        out = np.zeros((self.d, U.shape[1]))
        for j in range(self.col_rows.shape[1]):
            out += self.col_vals[:, j, None] * U[self.col_rows[:, j]]
        return out


class CountSketch(_HashedColumns):
    """R[h(i), i] = σ(i); h 2-wise into [b], σ 4-wise into {±1}."""

    kind = SketchKind.COUNT_SKETCH

    def _build(self, rng: Generator) -> None:
        keys = np.arange(self.d)
        self.bucket_hash = PolynomialHashFamily.draw(rng, k=2)
        self.sign_hash = PolynomialHashFamily.draw(rng, k=4)
        self.col_rows = self.bucket_hash.buckets(keys, self.b).T
        self.col_vals = self.sign_hash.signs(keys).T
        self._freeze()


class SparseEmbedding(_HashedColumns):
    """
    Exactly ``s`` nonzeros ±1/√s per column.

    ``blocked``: column i has one entry in each block j of b/s rows, at row
    j·(b/s) + h_j(i) with sign σ_j(i). ``random``: the s rows of each column
    are a uniform draw without replacement, signs Rademacher.
    """

    kind = SketchKind.SPARSE_EMBEDDING

    def _build(self, rng: Generator) -> None:
        s = self._spec.s
        if self._spec.sparse_layout == "blocked":
            keys = np.arange(self.d)
            block = self.b // s
            self.bucket_hash = PolynomialHashFamily.draw(rng, k=2, n_funcs=s)
            self.sign_hash = PolynomialHashFamily.draw(rng, k=4, n_funcs=s)
            offsets = np.arange(s, dtype=np.int64)[:, None] * block
            self.col_rows = (offsets + self.bucket_hash.buckets(keys, block)).T
            signs = self.sign_hash.signs(keys).T
        else:
            self.col_rows = np.argsort(rng.random((self.d, self.b)), axis=1)[:, :s]
            signs = rng.choice(np.array([-1.0, 1.0]), size=(self.d, s))
        self.col_vals = signs / np.sqrt(s)
        self._freeze()


# ──────────────────────────────────────────────────────────────────────
# Registry and public helpers
# ──────────────────────────────────────────────────────────────────────
_REGISTRY: Dict[SketchKind, Type[SketchOperator]] = {
    cls.kind: cls
    for cls in (
        GaussianSketch,
        SRHTSketch,
        AMSSketch,
        CountSketch,
        SparseEmbedding,
        UniformSamplingSketch,
        IdentitySketch,
    )
}

# a in E[(gᵀRᵀRh)²] ≤ (gᵀh)² + (a/b)‖g‖²‖h‖²; UniformSampling's a is d.
_LEMMA_A: Dict[SketchKind, float] = {
    SketchKind.GAUSSIAN: 3.0,
    SketchKind.SRHT: 2.0,
    SketchKind.AMS: 2.0,
    SketchKind.COUNT_SKETCH: 3.0,
    SketchKind.SPARSE_EMBEDDING: 2.0,
    SketchKind.IDENTITY: 0.0,
}


def build_sketch(spec: SketchSpec, round: int) -> SketchOperator:
    """Operator for round ``round``; raises ``InvalidSpec`` on inconsistent specs."""
    if round < 0:
        raise ValueError(f"round must be non-negative, got {round}")
    spec.check()
    return _REGISTRY[spec.kind](spec, round)


def sk(op: SketchOperator, v: ArrayLike) -> np.ndarray:
    return op.sk(v)


def desk(op: SketchOperator, u: ArrayLike) -> np.ndarray:
    return op.desk(u)


def to_dense(op: SketchOperator) -> np.ndarray:
    return op.to_dense()


def lemma_constant(kind: SketchKind, d: int) -> float:
    kind = SketchKind(kind)
    if kind is SketchKind.UNIFORM_SAMPLING:
        return float(d)
    return _LEMMA_A[kind]


def alpha_param(kind: SketchKind, d: int, b: int) -> float:
    """α = a·d/b; UniformSampling returns d²/b and warns that it is uncertified."""
    kind = SketchKind(kind)
    if b < 1:
        raise ValueError(f"b must be >= 1, got {b}")
    if kind is SketchKind.IDENTITY:
        raise Unsupported("identity sketch has no embedding parameter (alpha = 0)")
    if kind is SketchKind.UNIFORM_SAMPLING:
        ColoredLogger.warn_condition(
            f"[SketchOps] uniform sampling carries alpha = d^2/b = {d * d / b:g}; "
            "it is excluded from communication-savings claims",
            UncertifiedSketch,
        )
    return lemma_constant(kind, d) * d / b


def is_certified(kind: SketchKind) -> bool:
    return SketchKind(kind) not in (SketchKind.UNIFORM_SAMPLING, SketchKind.IDENTITY)


def singular_values(op: SketchOperator) -> np.ndarray:
    """Singular values of the materialized R, descending."""
    return np.linalg.svd(op.to_dense(), compute_uv=False)


def export_csv(op: SketchOperator, path: Union[str, Path]) -> Path:
    """Write R row-major, one matrix row per CSV row, 17 significant digits."""
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    with path.open("w", newline="") as fh:
        writer = csv.writer(fh)
        for row in op.to_dense():
            writer.writerow([format(float(x), ".17g") for x in row])
    ColoredLogger.debug(f"[SketchOps] wrote {op!r} to {path}")
    return path
