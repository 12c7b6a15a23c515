# cython: boundscheck=False, wraparound=False, cdivision=True, initializedcheck=False
"""Compiled hot loops: GL weights, triangular Toeplitz products, the
time-fractional history sum, and a tridiagonal solve.

Every reduction runs in a fixed order so results do not depend on the
thread layout of the caller.
"""
import numpy as np


def gl_weights(double alpha, Py_ssize_t m):
    out = np.empty(m + 1, dtype=np.float64)
    cdef double[::1] w = out
    cdef Py_ssize_t k
    w[0] = 1.0
    for k in range(1, m + 1):
        w[k] = w[k - 1] * (1.0 - (alpha + 1.0) / k)
    return out


def lower_toeplitz_apply(const double[::1] w, const double complex[::1] x):
    cdef Py_ssize_t n = x.shape[0]
    cdef Py_ssize_t j, k
    cdef double ar, ai
    re_np = np.ascontiguousarray(np.asarray(x).real)
    im_np = np.ascontiguousarray(np.asarray(x).imag)
    cdef const double[::1] xr = re_np
    cdef const double[::1] xi = im_np
    out = np.empty(n, dtype=np.complex128)
    cdef double complex[::1] y = out
    # real weights: accumulate the two parts separately in double
    for j in range(n):
        ar = 0.0
        ai = 0.0
        for k in range(j + 1):
            ar = ar + w[k] * xr[j - k]
            ai = ai + w[k] * xi[j - k]
        y[j] = ar + 1j * ai
    return out


def upper_toeplitz_apply(const double[::1] w, const double complex[::1] x):
    cdef Py_ssize_t n = x.shape[0]
    cdef Py_ssize_t j, k
    cdef double ar, ai
    re_np = np.ascontiguousarray(np.asarray(x).real)
    im_np = np.ascontiguousarray(np.asarray(x).imag)
    cdef const double[::1] xr = re_np
    cdef const double[::1] xi = im_np
    out = np.empty(n, dtype=np.complex128)
    cdef double complex[::1] y = out
    for j in range(n):
        ar = 0.0
        ai = 0.0
        for k in range(n - j):
            ar = ar + w[k] * xr[j + k]
            ai = ai + w[k] * xi[j + k]
        y[j] = ar + 1j * ai
    return out


def history_sum(const double[::1] w, const double[:, ::1] v, Py_ssize_t j):
    """Return sum_{k=1..j} w[k] * v[j - k, :]."""
    cdef Py_ssize_t nx = v.shape[1]
    cdef Py_ssize_t k, i
    cdef double wk
    out = np.zeros(nx, dtype=np.float64)
    cdef double[::1] acc = out
    for k in range(1, j + 1):
        wk = w[k]
        for i in range(nx):
            acc[i] += wk * v[j - k, i]
    return out


def thomas(const double[::1] sub, const double[::1] diag,
           const double[::1] sup, const double[::1] rhs):
    cdef Py_ssize_t n = diag.shape[0]
    cdef Py_ssize_t i
    cdef double m
    cp_arr = np.empty(n, dtype=np.float64)
    dp_arr = np.empty(n, dtype=np.float64)
    cdef double[::1] cp = cp_arr
    cdef double[::1] dp = dp_arr
    if diag[0] == 0.0:
        raise ZeroDivisionError("zero pivot in tridiagonal solve")
    cp[0] = sup[0] / diag[0] if n > 1 else 0.0
    dp[0] = rhs[0] / diag[0]
    for i in range(1, n):
        m = diag[i] - sub[i] * cp[i - 1]
        if m == 0.0:
            raise ZeroDivisionError("zero pivot in tridiagonal solve")
        cp[i] = sup[i] / m if i < n - 1 else 0.0
        dp[i] = (rhs[i] - sub[i] * dp[i - 1]) / m
    for i in range(n - 2, -1, -1):
        dp[i] = dp[i] - cp[i] * dp[i + 1]
    return dp_arr
