"""Laplace transform of the flat Dirichlet distribution on the simplex.

For m ordered uniform jump times, the spacing vector is flat-Dirichlet
distributed and the transform

    L_m(x) = m! * int_{T_m} exp(-<x, lam>) dlam,
    T_m = {lam_i >= 0, sum lam_i <= 1}

is the pricing kernel for paths with m jumps. Exact evaluation goes
through the identity L_m(x) = m! (-1)^m [0, x_1, ..., x_m] f with
f(u) = exp(-u) (divided differences), falling back to a high-order
series when arguments cluster within ``conf_tol``; the public series
evaluation uses the closed simplex moments

    m! * int_{T_m} prod lam_i^{k_i} dlam = m! * prod(k_i!) / (m + sum k_i)!
"""
from __future__ import annotations

import math

import numpy as np

from . import _kernels

__all__ = [
    "laplace_exact",
    "laplace_taylor",
    "taylor_remainder_bound",
    "simplex_moment",
    "DEFAULT_CONF_TOL",
    "DEFAULT_MAX_ORDER",
]

DEFAULT_CONF_TOL = 1e-6
DEFAULT_MAX_ORDER = 8


def _validate(x) -> np.ndarray:
    xv = np.asarray(x, dtype=float)
    if xv.ndim != 1 or xv.shape[0] < 1:
        raise ValueError("argument vector must be one-dimensional and nonempty")
    if not np.all(np.isfinite(xv)):
        raise ValueError("argument entries must be finite")
    return xv


def laplace_exact(x, conf_tol: float = DEFAULT_CONF_TOL) -> float:
    """Evaluate L_m(x) to near machine precision, m = len(x)."""
    return _kernels.laplace_exact(_validate(x), conf_tol)


def laplace_taylor(x, p: int, max_order: int = DEFAULT_MAX_ORDER) -> float:
    """Order-p series of L_m around the origin.

    Rejects p above ``max_order`` (the cost of the underlying moment
    enumeration grows combinatorially with p).
    """
    if p < 0:
        raise ValueError("series order must be nonnegative")
    if p > max_order:
        raise ValueError(f"series order {p} above configured maximum {max_order}")
    return _kernels.laplace_taylor(_validate(x), p)


def taylor_remainder_bound(x, p: int) -> float:
    """Upper bound on |laplace_exact(x) - laplace_taylor(x, p)|.

    Sum of m^{i/2} ||x||^i m!/(m+i)! over i > p, truncated once terms
    fall below 1e-18.
    """
    if p < 0:
        raise ValueError("series order must be nonnegative")
    xv = _validate(x)
    m = xv.shape[0]
    xnorm = float(np.linalg.norm(xv))
    # term_i = m^{i/2} xnorm^i m!/(m+i)!, built by the ratio recurrence
    term = 1.0
    for i in range(1, p + 2):
        term *= math.sqrt(m) * xnorm / (m + i)
    total = 0.0
    i = p + 1
    while True:
        total += term
        if term < 1e-18 or i > 10_000:
            break
        i += 1
        term *= math.sqrt(m) * xnorm / (m + i)
    return total


def simplex_moment(m: int, powers) -> float:
    """Closed-form simplex moment m! * prod(k_i!) / (m + sum k_i)!.

    ``powers`` are the exponents k_i of the coordinates (any length up
    to m; omitted coordinates have exponent zero).
    """
    ks = [int(k) for k in powers]
    if m < 1 or any(k < 0 for k in ks) or len(ks) > m:
        raise ValueError("need m >= 1 and nonnegative exponents, at most m of them")
    num = math.factorial(m)
    for k in ks:
        num *= math.factorial(k)
    return num / math.factorial(m + sum(ks))
