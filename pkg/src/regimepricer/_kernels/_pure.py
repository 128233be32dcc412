"""Pure-numpy kernel: simplex Laplace transforms and embedded-path sums.

Mirrors the compiled extension in ``_core.pyx``; selected automatically
when the extension is unavailable (or forced via REGIMEPRICER_PURE=1).
"""
from __future__ import annotations

import math

import numpy as np

COMPILED = False

_TAYLOR_TARGET = 1e-17
_TAYLOR_MAX_ORDER = 200
# below this sqrt(m) * ||x|| the adaptive series is exact to ~1e-13 and
# immune to node clustering; the divided-difference table handles the
# large well-separated remainder
_SERIES_SAFE = 7.0


def _taylor_order(m: int, xnorm: float) -> int:
    """Smallest order whose tail bound drops below the evaluation target."""
    if xnorm == 0.0:
        return 0
    term = math.sqrt(m) * xnorm / (m + 1)
    i = 1
    while i < _TAYLOR_MAX_ORDER:
        ratio = math.sqrt(m) * xnorm / (m + i + 1)
        if term < _TAYLOR_TARGET and ratio < 0.5:
            return i
        term *= ratio
        i += 1
    return _TAYLOR_MAX_ORDER


def _taylor_rows(x: np.ndarray, p: int) -> np.ndarray:
    """Order-p series of the transform for each row of x (shape (P, m))."""
    npaths, m = x.shape
    hs = np.zeros((npaths, p + 1))
    hs[:, 0] = 1.0
    for col in range(m):
        xj = x[:, col]
        for ell in range(1, p + 1):
            hs[:, ell] += xj * hs[:, ell - 1]
    coef = np.empty(p + 1)
    c = 1.0
    coef[0] = 1.0
    for ell in range(1, p + 1):
        c /= (m + ell)
        coef[ell] = c
    coef[1::2] *= -1.0
    return hs @ coef


def _dd_rows(nodes: np.ndarray) -> np.ndarray:
    """Top divided difference of exp(-u) over each row of nodes (P, q)."""
    shift = nodes.min(axis=1, keepdims=True)
    fv = np.exp(-(nodes - shift))
    q = nodes.shape[1]
    for lvl in range(1, q):
        fv = (fv[:, 1:] - fv[:, :-1]) / (nodes[:, lvl:] - nodes[:, :-lvl])
    return np.exp(-shift[:, 0]) * fv[:, 0]


def laplace_exact_rows(x: np.ndarray, conf_tol: float = 1e-6) -> np.ndarray:
    """Transform values for each row of x, rows being argument vectors."""
    x = np.ascontiguousarray(x, dtype=float)
    npaths, m = x.shape
    if m == 0:
        return np.ones(npaths)
    norms = np.sqrt((x * x).sum(axis=1))
    nodes = np.concatenate([np.zeros((npaths, 1)), x], axis=1)
    # sorted nodes: canonical per argument multiset and well conditioned
    nodes.sort(axis=1)
    gaps = np.diff(nodes, axis=1).min(axis=1)
    series = (math.sqrt(m) * norms <= _SERIES_SAFE) | (gaps < conf_tol)
    out = np.empty(npaths)
    plain = ~series
    if plain.any():
        sign = -1.0 if m % 2 else 1.0
        out[plain] = math.factorial(m) * sign * _dd_rows(nodes[plain])
    if series.any():
        p = _taylor_order(m, float(norms[series].max()))
        out[series] = _taylor_rows(x[series], p)
    return out


def laplace_exact(x, conf_tol: float = 1e-6) -> float:
    return float(laplace_exact_rows(np.atleast_2d(np.asarray(x, dtype=float)),
                                    conf_tol)[0])


def laplace_taylor(x, p: int) -> float:
    x = np.atleast_2d(np.asarray(x, dtype=float))
    if p < 0:
        raise ValueError("taylor order must be nonnegative")
    return float(_taylor_rows(x, p)[0])


def phi_weighted_sum(
    start: int,
    paths: np.ndarray,
    sum_k: np.ndarray,
    rho: np.ndarray,
    payoff: np.ndarray,
    zeta: float,
    taylor_p: int = -1,
    conf_tol: float = 1e-6,
) -> float:
    """Sum over embedded paths of payoff * exp-penalties * Laplace kernel.

    ``paths`` is (P, m) with regime indices; ``sum_k`` the per-path jump
    penalties. The uniform embedded-chain weight 1/(N-1)^m is NOT applied
    here. taylor_p < 0 selects exact kernel evaluation.
    """
    paths = np.asarray(paths)
    npaths, m = paths.shape
    if npaths == 0:
        return 0.0
    prev = np.empty_like(paths)
    prev[:, 0] = start
    if m > 1:
        prev[:, 1:] = paths[:, :-1]
    fin = paths[:, -1]
    x = zeta * (rho[prev] - rho[fin][:, None])
    w = payoff[fin] * np.exp(-zeta * rho[fin] - sum_k)
    if taylor_p >= 0:
        lap = _taylor_rows(x, taylor_p)
    else:
        lap = laplace_exact_rows(x, conf_tol)
    return float(w @ lap)
