"""Batched banded LU without pivoting (numpy fallback).

Loops run over matrix rows; each operation is vectorized over the batch and
right-hand-side axes. The arithmetic sequence is identical to the compiled
backend.
"""
import numpy as np


def band_factor(ab: np.ndarray, kl: int, ku: int, threads: int = 1) -> None:
    """Factor a batch of banded matrices in place (no pivoting)."""
    if ab.shape[1] != kl + ku + 1:
        raise ValueError("band storage height must be kl + ku + 1")
    n = ab.shape[2]
    for k in range(n):
        piv = ab[:, ku, k]
        for i in range(k + 1, min(n, k + kl + 1)):
            lcol = ab[:, ku + i - k, k] / piv
            ab[:, ku + i - k, k] = lcol
            for j in range(k + 1, min(n, k + ku + 1)):
                ab[:, ku + i - j, j] = ab[:, ku + i - j, j] - lcol * ab[:, ku + k - j, j]


def band_solve(lu: np.ndarray, kl: int, ku: int, rhs: np.ndarray, threads: int = 1) -> None:
    """Solve in place for a batch of right-hand sides of shape (batch, n, m)."""
    n = lu.shape[2]
    if rhs.shape[0] != lu.shape[0] or rhs.shape[1] != n:
        raise ValueError("rhs shape does not match the factored batch")
    for i in range(n):
        for k in range(max(0, i - kl), i):
            rhs[:, i, :] = rhs[:, i, :] - lu[:, ku + i - k, k, None] * rhs[:, k, :]
    for i in range(n - 1, -1, -1):
        for j in range(i + 1, min(n, i + ku + 1)):
            rhs[:, i, :] = rhs[:, i, :] - lu[:, ku + i - j, j, None] * rhs[:, j, :]
        rhs[:, i, :] = rhs[:, i, :] / lu[:, ku, i, None]
