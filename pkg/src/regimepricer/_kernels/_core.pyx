# cython: boundscheck=False, wraparound=False, cdivision=True
"""Compiled kernel: simplex Laplace transforms and embedded-path sums.

Same API as ``_pure``; per-path C loops instead of vectorized numpy.
"""
from libc.math cimport exp, sqrt

import numpy as np

COMPILED = True

DEF MAXM = 64          # max jump count per path
DEF MAXP = 200         # max series order

cdef double _TAYLOR_TARGET = 1e-17
cdef double _SERIES_SAFE = 7.0


cdef int _taylor_order(int m, double xnorm) nogil:
    cdef double term, ratio
    cdef int i
    if xnorm == 0.0:
        return 0
    term = sqrt(m) * xnorm / (m + 1)
    i = 1
    while i < MAXP:
        ratio = sqrt(m) * xnorm / (m + i + 1)
        if term < _TAYLOR_TARGET and ratio < 0.5:
            return i
        term *= ratio
        i += 1
    return MAXP


cdef double _taylor_one(const double* x, int m, int p, double* hs) nogil:
    """Order-p series via the homogeneous-polynomial recurrence."""
    cdef int ell, col
    cdef double coef, acc, xj, sgn
    for ell in range(p + 1):
        hs[ell] = 0.0
    hs[0] = 1.0
    for col in range(m):
        xj = x[col]
        for ell in range(1, p + 1):
            hs[ell] += xj * hs[ell - 1]
    coef = 1.0
    acc = hs[0]
    sgn = 1.0
    for ell in range(1, p + 1):
        coef /= (m + ell)
        sgn = -sgn
        acc += sgn * coef * hs[ell]
    return acc


cdef double _dd_exp(double* nodes, int q) nogil:
    """Top divided difference of exp(-u) over q distinct nodes."""
    cdef double fv[MAXM + 1]
    cdef double shift = nodes[0]
    cdef int i, lvl
    for i in range(1, q):
        if nodes[i] < shift:
            shift = nodes[i]
    for i in range(q):
        fv[i] = exp(-(nodes[i] - shift))
    for lvl in range(1, q):
        for i in range(q - lvl):
            fv[i] = (fv[i + 1] - fv[i]) / (nodes[i + lvl] - nodes[i])
    return exp(-shift) * fv[0]


cdef double _min_gap(const double* nodes, int q, double* scratch) nogil:
    cdef int i, j
    cdef double tmp, g, best
    for i in range(q):
        scratch[i] = nodes[i]
    for i in range(1, q):          # insertion sort, q <= MAXM + 1
        tmp = scratch[i]
        j = i - 1
        while j >= 0 and scratch[j] > tmp:
            scratch[j + 1] = scratch[j]
            j -= 1
        scratch[j + 1] = tmp
    best = scratch[1] - scratch[0]
    for i in range(2, q):
        g = scratch[i] - scratch[i - 1]
        if g < best:
            best = g
    return best


cdef double _factorial(int m) nogil:
    cdef double f = 1.0
    cdef int i
    for i in range(2, m + 1):
        f *= i
    return f


cdef double _laplace_exact_one(const double* x, int m, double conf_tol,
                               double* scratch, double* hs) nogil:
    cdef double nodes[MAXM + 1]
    cdef double xnorm, sign
    cdef int i, p
    if m == 0:
        return 1.0
    xnorm = 0.0
    for i in range(m):
        xnorm += x[i] * x[i]
    xnorm = sqrt(xnorm)
    nodes[0] = 0.0
    for i in range(m):
        nodes[i + 1] = x[i]
    # small arguments: the adaptive series is exact to ~1e-13 and immune
    # to node clustering; otherwise run the divided-difference table on
    # the sorted nodes (left in scratch by _min_gap) unless they cluster
    if sqrt(m) * xnorm <= _SERIES_SAFE \
            or _min_gap(nodes, m + 1, scratch) < conf_tol:
        p = _taylor_order(m, xnorm)
        return _taylor_one(x, m, p, hs)
    sign = -1.0 if m % 2 else 1.0
    return _factorial(m) * sign * _dd_exp(scratch, m + 1)


def laplace_exact(x, double conf_tol=1e-6):
    cdef const double[::1] xv = np.ascontiguousarray(x, dtype=np.float64)
    cdef int m = xv.shape[0]
    if m > MAXM:
        raise ValueError(f"at most {MAXM} arguments supported")
    if m == 0:
        return 1.0
    cdef double scratch[MAXM + 1]
    cdef double hs[MAXP + 1]
    cdef double out
    with nogil:
        out = _laplace_exact_one(&xv[0], m, conf_tol, scratch, hs)
    return out


def laplace_taylor(x, int p):
    cdef const double[::1] xv = np.ascontiguousarray(x, dtype=np.float64)
    cdef int m = xv.shape[0]
    if p < 0:
        raise ValueError("taylor order must be nonnegative")
    if p > MAXP:
        raise ValueError(f"taylor order above {MAXP} not supported")
    if m > MAXM:
        raise ValueError(f"at most {MAXM} arguments supported")
    if m == 0:
        return 1.0
    cdef double hs[MAXP + 1]
    cdef double out
    with nogil:
        out = _taylor_one(&xv[0], m, p, hs)
    return out


def laplace_exact_rows(x, double conf_tol=1e-6):
    cdef const double[:, ::1] xv = np.ascontiguousarray(x, dtype=np.float64)
    cdef Py_ssize_t npaths = xv.shape[0]
    cdef int m = <int> xv.shape[1]
    if m > MAXM:
        raise ValueError(f"at most {MAXM} arguments supported")
    out_arr = np.empty(npaths)
    if m == 0:
        out_arr[:] = 1.0
        return out_arr
    cdef double[::1] out = out_arr
    cdef double scratch[MAXM + 1]
    cdef double hs[MAXP + 1]
    cdef Py_ssize_t r
    with nogil:
        for r in range(npaths):
            out[r] = _laplace_exact_one(&xv[r, 0], m, conf_tol, scratch, hs)
    return out_arr


def phi_weighted_sum(int start, paths, sum_k, rho, payoff, double zeta,
                     int taylor_p=-1, double conf_tol=1e-6):
    """Sum over embedded paths of payoff * exp-penalties * Laplace kernel.

    Same contract as the pure kernel: the 1/(N-1)^m weight is applied by
    the caller; taylor_p < 0 selects exact kernel evaluation.
    """
    cdef const long long[:, ::1] pv = np.ascontiguousarray(paths, dtype=np.int64)
    cdef const double[::1] skv = np.ascontiguousarray(sum_k, dtype=np.float64)
    cdef const double[::1] rv = np.ascontiguousarray(rho, dtype=np.float64)
    cdef const double[::1] xiv = np.ascontiguousarray(payoff, dtype=np.float64)
    cdef Py_ssize_t npaths = pv.shape[0]
    cdef int m = <int> pv.shape[1]
    if m > MAXM:
        raise ValueError(f"at most {MAXM} jumps supported")
    if taylor_p > MAXP:
        raise ValueError(f"taylor order above {MAXP} not supported")
    if m == 0 or npaths == 0:
        return 0.0
    cdef double x[MAXM]
    cdef double scratch[MAXM + 1]
    cdef double hs[MAXP + 1]
    cdef double acc = 0.0
    cdef double rho_fin, lap, w
    cdef Py_ssize_t r
    cdef int n, prev, fin
    with nogil:
        for r in range(npaths):
            fin = <int> pv[r, m - 1]
            rho_fin = rv[fin]
            prev = start
            for n in range(m):
                x[n] = zeta * (rv[prev] - rho_fin)
                prev = <int> pv[r, n]
            w = xiv[fin] * exp(-zeta * rho_fin - skv[r])
            if taylor_p >= 0:
                lap = _taylor_one(x, m, taylor_p, hs)
            else:
                lap = _laplace_exact_one(x, m, conf_tol, scratch, hs)
            acc += w * lap
    return acc
