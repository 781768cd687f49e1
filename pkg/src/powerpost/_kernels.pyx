# cython: boundscheck=False, wraparound=False, cdivision=True, initializedcheck=False
"""Compiled hot kernels.  Semantics match ``_kernels_py`` exactly; summation is
sequential in index order, so results do not depend on thread count."""
import numpy as np

from cython.parallel cimport prange
from libc.math cimport exp, log, fabs, INFINITY


cdef inline double _sgn(double x) nogil:
    if x > 0.0:
        return 1.0
    if x < 0.0:
        return -1.0
    return 0.0


cdef void _signed_lse(const double[:] signs, const double[:] logmag,
                      double* out_sign, double* out_log) noexcept nogil:
    cdef Py_ssize_t i, n = signs.shape[0]
    cdef double shift = -INFINITY
    cdef double total = 0.0
    for i in range(n):
        if signs[i] != 0.0 and logmag[i] > shift:
            shift = logmag[i]
    if shift == -INFINITY:
        out_sign[0] = 0.0
        out_log[0] = -INFINITY
        return
    for i in range(n):
        if signs[i] != 0.0 and logmag[i] > -INFINITY:
            total += signs[i] * exp(logmag[i] - shift)
    if total == 0.0:
        out_sign[0] = 0.0
        out_log[0] = -INFINITY
        return
    out_sign[0] = _sgn(total)
    out_log[0] = shift + log(fabs(total))


def signed_lse(signs, logmag):
    cdef const double[::1] s = np.ascontiguousarray(signs, dtype=np.float64)
    cdef const double[::1] l = np.ascontiguousarray(logmag, dtype=np.float64)
    cdef double sg, lm
    _signed_lse(s, l, &sg, &lm)
    return sg, lm


cdef void _tilted_one(const double[::1] e, const double[::1] term_sign, const double[::1] log_abs,
                     double alpha, double* out_sign, double* out_log) noexcept nogil:
    cdef Py_ssize_t i, n = e.shape[0]
    cdef double shift = -INFINITY, total = 0.0, w
    for i in range(n):
        if term_sign[i] != 0.0:
            w = alpha * e[i] + log_abs[i]
            if w > shift:
                shift = w
    if shift == -INFINITY:
        out_sign[0] = 0.0
        out_log[0] = -INFINITY
        return
    for i in range(n):
        if term_sign[i] != 0.0:
            total += term_sign[i] * exp(alpha * e[i] + log_abs[i] - shift)
    if total == 0.0:
        out_sign[0] = 0.0
        out_log[0] = -INFINITY
        return
    out_sign[0] = _sgn(total)
    out_log[0] = shift + log(fabs(total))


def tilted_lse(ell, alphas, int power):
    cdef const double[::1] e = np.ascontiguousarray(ell, dtype=np.float64)
    cdef const double[::1] a = np.ascontiguousarray(np.atleast_1d(alphas), dtype=np.float64)
    cdef Py_ssize_t n = e.shape[0], k_count = a.shape[0], i, k
    cdef double[::1] term_sign = np.empty(n)
    cdef double[::1] log_abs = np.empty(n)
    signs_out = np.empty(k_count)
    logs_out = np.empty(k_count)
    cdef double[::1] so = signs_out
    cdef double[::1] lo = logs_out
    cdef double x
    with nogil:
        for i in range(n):
            x = e[i]
            if power == 0:
                term_sign[i] = 1.0
                log_abs[i] = 0.0
            else:
                term_sign[i] = _sgn(x) if power % 2 == 1 else (1.0 if x != 0.0 else 0.0)
                log_abs[i] = power * log(fabs(x)) if x != 0.0 else -INFINITY
        # alphas are independent; each sum stays sequential, so the result
        # is the same for any thread count
        for k in prange(k_count, schedule="static"):
            _tilted_one(e, term_sign, log_abs, a[k], &so[k], &lo[k])
    return signs_out, logs_out


cdef double _w2_row(const double[::1] tt, const double[:, ::1] P, const double[:, ::1] Q,
                   Py_ssize_t r) noexcept nogil:
    # two-pointer merge of the two cumulative mass sequences
    cdef Py_ssize_t T = tt.shape[0], i = 0, j = 0
    cdef double prev = 0.0, cur, total = 0.0, d
    while i < T and j < T:
        d = tt[i] - tt[j]
        if P[r, i] < Q[r, j]:
            cur = P[r, i]
            i += 1
        elif Q[r, j] < P[r, i]:
            cur = Q[r, j]
            j += 1
        else:
            cur = Q[r, j]
            i += 1
            j += 1
        total += (cur - prev) * d * d
        prev = cur
    return total


def w2_batch(t, cum_p, cum_q):
    cdef const double[::1] tt = np.ascontiguousarray(t, dtype=np.float64)
    cdef const double[:, ::1] P = np.ascontiguousarray(np.atleast_2d(cum_p), dtype=np.float64)
    cdef const double[:, ::1] Q = np.ascontiguousarray(np.atleast_2d(cum_q), dtype=np.float64)
    cdef Py_ssize_t rows = P.shape[0], r
    out = np.empty(rows)
    cdef double[::1] o = out
    with nogil:
        for r in prange(rows, schedule="static"):
            o[r] = _w2_row(tt, P, Q, r)
    return out


cdef double _mixture_one(const double[:, ::1] X, const double[:, ::1] Y, Py_ssize_t i,
                         double inv) noexcept nogil:
    cdef Py_ssize_t j, k = Y.shape[0]
    cdef double best = -INFINITY, total = 0.0, dx, dy, e
    for j in range(k):
        dx = X[i, 0] - Y[j, 0]
        dy = X[i, 1] - Y[j, 1]
        e = inv * (dx * dx + dy * dy)
        if e > best:
            best = e
    for j in range(k):
        dx = X[i, 0] - Y[j, 0]
        dy = X[i, 1] - Y[j, 1]
        total += exp(inv * (dx * dx + dy * dy) - best)
    return best + log(total)


def mixture_loglik(points, data, double sigma2):
    cdef const double[:, ::1] X = np.ascontiguousarray(np.atleast_2d(points), dtype=np.float64)
    cdef const double[:, ::1] Y = np.ascontiguousarray(np.atleast_2d(data), dtype=np.float64)
    cdef Py_ssize_t m = X.shape[0], k = Y.shape[0], i
    out = np.empty(m)
    cdef double[::1] o = out
    cdef double const = -log(<double>k) - log(2.0 * 3.141592653589793 * sigma2)
    cdef double inv = -0.5 / sigma2
    with nogil:
        for i in prange(m, schedule="static"):
            o[i] = _mixture_one(X, Y, i, inv) + const
    return out
