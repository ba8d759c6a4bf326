"""
Walsh–Hadamard helpers for the SRHT sketch.

``fwht`` is the plain O(n log n) butterfly recursion on the leading axis,
normalized so that the transform is orthogonal and its own inverse.
"""
from __future__ import annotations

import numpy as np
from scipy.linalg import hadamard


def next_pow2(n: int) -> int:
    if n < 1:
        raise ValueError(f"dimension must be positive, got {n}")
    return 1 << (int(n) - 1).bit_length()


def _fwht_unnormalized(matrix: np.ndarray) -> np.ndarray:
    n = matrix.shape[0]
    if n == 1:
        return matrix
    top = _fwht_unnormalized(matrix[: n // 2] + matrix[n // 2 :])
    bottom = _fwht_unnormalized(matrix[: n // 2] - matrix[n // 2 :])
    return np.concatenate([top, bottom], axis=0)


def fwht(matrix: np.ndarray) -> np.ndarray:
    """Normalized Walsh–Hadamard transform of the rows of ``matrix`` (length must be 2^k)."""
    n = matrix.shape[0]
    if n & (n - 1):
        raise ValueError(f"Walsh–Hadamard transform needs a power-of-two length, got {n}")
    return _fwht_unnormalized(np.asarray(matrix, dtype=np.float64)) / np.sqrt(n)


def dense_hadamard(n: int) -> np.ndarray:
    """Normalized n x n Walsh–Hadamard matrix (Sylvester ordering, same as ``fwht``)."""
    return hadamard(n).astype(np.float64) / np.sqrt(n)
