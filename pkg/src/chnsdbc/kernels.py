"""Backend selection for the batched banded solver.

The compiled extension is used when importable. Setting the environment
variable ``CHNSDBC_PURE_PYTHON=1`` forces the numpy fallback.
"""
from __future__ import annotations

import os

import numpy as np

from . import _banded_py

try:
    from . import _banded as _compiled
except ImportError:  # pragma: no cover - depends on the build
    _compiled = None

_BACKENDS = {"python": _banded_py}
if _compiled is not None:
    _BACKENDS["cython"] = _compiled

if os.environ.get("CHNSDBC_PURE_PYTHON", "") not in ("", "0") or _compiled is None:
    BACKEND = "python"
else:
    BACKEND = "cython"

_threads = 1


def available_backends() -> list[str]:
    return sorted(_BACKENDS)


def set_threads(n: int) -> None:
    """Set the thread count for per-mode solves (wall-clock only)."""
    global _threads
    if n < 1:
        raise ValueError("threads must be >= 1")
    _threads = int(n)


def get_threads() -> int:
    return _threads


def _module(backend: str | None):
    name = BACKEND if backend is None else backend
    try:
        return _BACKENDS[name]
    except KeyError:
        raise ValueError(f"backend {name!r} not available; have {available_backends()}") from None


def band_factor(ab: np.ndarray, kl: int, ku: int, backend: str | None = None) -> None:
    _module(backend).band_factor(ab, kl, ku, _threads)


def band_solve(lu: np.ndarray, kl: int, ku: int, rhs: np.ndarray, backend: str | None = None) -> None:
    _module(backend).band_solve(lu, kl, ku, rhs, _threads)


def dense_to_band(A: np.ndarray, kl: int, ku: int) -> np.ndarray:
    """Pack a batch of dense matrices (batch, n, n) into band storage."""
    A = np.asarray(A, dtype=float)
    batch, n, _ = A.shape
    ab = np.zeros((batch, kl + ku + 1, n))
    for d in range(-kl, ku + 1):
        # d = j - i; row in band storage is ku - d
        idx = np.arange(max(0, -d), min(n, n - d))
        ab[:, ku - d, idx + d] = A[:, idx, idx + d]
    return ab


class BandedBatch:
    """A factored batch of real banded matrices, one per Fourier mode.

    Args:
        ab: band storage of shape ``(batch, kl + ku + 1, n)``; copied.
        kl: number of sub-diagonals.
        ku: number of super-diagonals.
    """

    def __init__(self, ab: np.ndarray, kl: int, ku: int, backend: str | None = None):
        self.kl, self.ku = int(kl), int(ku)
        self.backend = backend
        self.batch, _, self.n = ab.shape
        self.lu = np.ascontiguousarray(ab, dtype=float).copy()
        band_factor(self.lu, self.kl, self.ku, backend)
        pivots = self.lu[:, self.ku, :]
        if not np.all(np.isfinite(self.lu)) or np.any(pivots == 0.0):
            raise np.linalg.LinAlgError("banded factorization failed (zero or non-finite pivot)")

    def solve(self, rhs: np.ndarray) -> np.ndarray:
        """Solve for a real or complex right-hand side of shape (batch, n) or (batch, n, m)."""
        rhs = np.asarray(rhs)
        squeeze = rhs.ndim == 2
        if squeeze:
            rhs = rhs[:, :, None]
        if np.iscomplexobj(rhs):
            work = np.array(rhs, dtype=complex, order="C")
            real = work.view(np.float64).reshape(self.batch, self.n, -1)
            band_solve(self.lu, self.kl, self.ku, real, self.backend)
            out = real.view(complex).reshape(work.shape)
        else:
            out = np.ascontiguousarray(rhs, dtype=float).copy()
            band_solve(self.lu, self.kl, self.ku, out, self.backend)
        return out[:, :, 0] if squeeze else out
