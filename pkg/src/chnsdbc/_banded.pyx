# cython: boundscheck=False, wraparound=False, cdivision=True, initializedcheck=False
"""Batched banded LU without pivoting (compiled backend).

Band storage follows LAPACK: ``ab[b, ku + i - j, j] = A_b[i, j]``.
Every operation mirrors ``_banded_py`` term by term so both backends agree
bitwise when the C compiler does not contract multiply-adds.
"""
from cython.parallel cimport prange


cdef void _factor_one(double[:, ::1] ab, int kl, int ku, int n) noexcept nogil:
    cdef int k, i, j, iend, jend
    cdef double piv, l
    for k in range(n):
        piv = ab[ku, k]
        iend = k + kl + 1
        if iend > n:
            iend = n
        jend = k + ku + 1
        if jend > n:
            jend = n
        for i in range(k + 1, iend):
            l = ab[ku + i - k, k] / piv
            ab[ku + i - k, k] = l
            for j in range(k + 1, jend):
                ab[ku + i - j, j] = ab[ku + i - j, j] - l * ab[ku + k - j, j]


cdef void _solve_one(const double[:, ::1] lu, int kl, int ku, int n,
                     double[:, ::1] x) noexcept nogil:
    cdef int i, k, j, c, k0, jend
    cdef int m = x.shape[1]
    cdef double a
    for i in range(n):
        k0 = i - kl
        if k0 < 0:
            k0 = 0
        for k in range(k0, i):
            a = lu[ku + i - k, k]
            for c in range(m):
                x[i, c] = x[i, c] - a * x[k, c]
    for i in range(n - 1, -1, -1):
        jend = i + ku + 1
        if jend > n:
            jend = n
        for j in range(i + 1, jend):
            a = lu[ku + i - j, j]
            for c in range(m):
                x[i, c] = x[i, c] - a * x[j, c]
        a = lu[ku, i]
        for c in range(m):
            x[i, c] = x[i, c] / a


def band_factor(double[:, :, ::1] ab, int kl, int ku, int threads=1):
    """Factor a batch of banded matrices in place (no pivoting)."""
    cdef Py_ssize_t b
    cdef int n = ab.shape[2]
    if ab.shape[1] != kl + ku + 1:
        raise ValueError("band storage height must be kl + ku + 1")
    with nogil:
        for b in prange(ab.shape[0], num_threads=max(threads, 1), schedule="static"):
            _factor_one(ab[b], kl, ku, n)


def band_solve(const double[:, :, ::1] lu, int kl, int ku, double[:, :, ::1] rhs,
               int threads=1):
    """Solve in place for a batch of right-hand sides of shape (batch, n, m)."""
    cdef Py_ssize_t b
    cdef int n = lu.shape[2]
    if rhs.shape[0] != lu.shape[0] or rhs.shape[1] != n:
        raise ValueError("rhs shape does not match the factored batch")
    with nogil:
        for b in prange(lu.shape[0], num_threads=max(threads, 1), schedule="static"):
            _solve_one(lu[b], kl, ku, n, rhs[b])
