"""
k-wise independent hash families.

A degree-(k-1) polynomial with coefficients drawn uniformly from the field
GF(p), p = 2^31 - 1, evaluated at distinct keys gives k-wise independent
values. All arithmetic runs in ``uint64``: every Horner intermediate stays
below p * p + p < 2^63.
"""
from __future__ import annotations

import numpy as np

MERSENNE_P = (1 << 31) - 1
_P = np.uint64(MERSENNE_P)


class PolynomialHashFamily:
    """
    ``n_funcs`` independent hash functions, each a random polynomial of
    degree ``k - 1`` over GF(p).

    Evaluation returns a ``(n_funcs, len(keys))`` array of field elements;
    ``buckets`` and ``signs`` reduce them to ``[0, b)`` and ``{-1, +1}``.
    """

    def __init__(self, coeffs: np.ndarray) -> None:
        coeffs = np.asarray(coeffs, dtype=np.uint64)
        if coeffs.ndim != 2 or coeffs.shape[1] < 1:
            raise ValueError(f"coeffs must be (n_funcs, k), got shape {coeffs.shape}")
        if np.any(coeffs >= _P):
            raise ValueError("hash coefficients must lie in [0, p)")
        self._coeffs = coeffs
        self._coeffs.setflags(write=False)

    @classmethod
    def draw(cls, rng: np.random.Generator, k: int, n_funcs: int = 1) -> "PolynomialHashFamily":
        if k < 1 or n_funcs < 1:
            raise ValueError(f"need k >= 1 and n_funcs >= 1, got {k=} {n_funcs=}")
        coeffs = rng.integers(0, MERSENNE_P, size=(n_funcs, k), dtype=np.uint64)
        return cls(coeffs)

    # ------------------------------------------------------------------ #
    @property
    def k(self) -> int:
        return int(self._coeffs.shape[1])

    @property
    def n_funcs(self) -> int:
        return int(self._coeffs.shape[0])

    @property
    def coeffs(self) -> np.ndarray:
        return self._coeffs

    def __call__(self, keys: np.ndarray) -> np.ndarray:
        x = np.asarray(keys, dtype=np.uint64)
        if np.any(x >= _P):
            raise ValueError("hash keys must lie in [0, p)")
        x = x[None, :]
        acc = np.repeat(self._coeffs[:, -1:], x.shape[1], axis=1)
        for i in range(self.k - 2, -1, -1):
            acc = (acc * x + self._coeffs[:, i : i + 1]) % _P
        return acc

    def buckets(self, keys: np.ndarray, b: int) -> np.ndarray:
        return (self(keys) % np.uint64(b)).astype(np.int64)

    def signs(self, keys: np.ndarray) -> np.ndarray:
        bits = (self(keys) & np.uint64(1)).astype(np.float64)
        return 2.0 * bits - 1.0
