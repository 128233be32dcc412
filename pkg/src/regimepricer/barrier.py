"""Knock-out / knock-in claims on the running volatility state.

The survive indicator of a knock-out claim factors across time slices,
so the backward recursion of the series pricer applies verbatim once
every enumerated path is restricted to regimes whose volatility stays
strictly below the barrier (the slice's entry state included: a path
entering a slice knocked out stays worthless). Knock-ins follow from
parity against the barrier-free claim discounted at the short rate.
"""
from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .measure import TransformedParams, transform_rate_only
from .model import RegimeModel, as_payoff
from .series import PathCache, PricerConfig, PriceSurface, _series_vector, price_claim

__all__ = ["BarrierSpec", "survivor_mask", "phi_out", "price_barrier"]


@dataclass(frozen=True)
class BarrierSpec:
    """Barrier level on sigma'X, direction, and terminal payoff."""

    level: float
    values: np.ndarray
    direction: str = "out"

    def __post_init__(self):
        object.__setattr__(self, "values", np.asarray(self.values, dtype=float))
        if self.level <= 0:
            raise ValueError("barrier level must be positive")
        if self.direction not in ("out", "in"):
            raise ValueError("direction must be 'out' or 'in'")


def survivor_mask(spec: BarrierSpec, vols: np.ndarray) -> np.ndarray:
    """Regimes that survive: sigma strictly below the barrier."""
    return np.asarray(vols, dtype=float) < spec.level


class _MaskedPathCache:
    """PathCache view keeping only paths through surviving regimes."""

    def __init__(self, base: PathCache, alive: np.ndarray):
        self._base = base
        self._alive = alive
        self.n_regimes = base.n_regimes
        self._paths: dict[tuple[int, int], np.ndarray] = {}
        self._penalties: dict[tuple[int, int], tuple[int, np.ndarray]] = {}

    def paths(self, start: int, m: int) -> np.ndarray:
        key = (start, m)
        got = self._paths.get(key)
        if got is None:
            full = self._base.paths(start, m)
            if not self._alive[start]:
                got = full[:0]
            else:
                got = full[self._alive[full].all(axis=1)]
            self._paths[key] = got
        return got

    def jump_penalties(self, k_matrix: np.ndarray, start: int, m: int) -> np.ndarray:
        key = (start, m)
        got = self._penalties.get(key)
        if got is not None and got[0] == id(k_matrix):
            return got[1]
        p = self.paths(start, m)
        prev = np.empty_like(p)
        if p.shape[0]:
            prev[:, 0] = start
            if m > 1:
                prev[:, 1:] = p[:, :-1]
        sums = k_matrix[prev, p].sum(axis=1) if p.shape[0] else np.zeros(0)
        self._penalties[key] = (id(k_matrix), sums)
        return sums


def phi_out(
    i: int,
    m: int,
    zeta: float,
    spec: BarrierSpec,
    tp: TransformedParams,
    vols,
    cfg: PricerConfig | None = None,
    cache: PathCache | None = None,
    t_eval: float = 0.0,
) -> float:
    """m-jump knock-out term: the plain term with dead paths zeroed.

    ``tp`` must be the rate-only transform (barrier claims discount at
    the short rate, no credit spread).
    """
    cfg = cfg or PricerConfig(n_steps=1)
    alive = survivor_mask(spec, vols)
    if not alive[i]:
        return 0.0
    payoff = as_payoff(spec.values, tp.n_regimes) * alive
    mcache = _MaskedPathCache(cache if cache is not None else PathCache(tp.n_regimes),
                              alive)
    return _series_single_term(i, m, zeta, payoff, tp, cfg, mcache, t_eval)


def _series_single_term(i, m, zeta, payoff, tp, cfg, mcache, t_eval):
    from .series import _phi0, _phi1_closed, _phi_enumerated

    k_mat, rho = tp.at(t_eval)
    if m == 0:
        return _phi0(i, zeta, payoff, k_mat, rho)
    exact_eval = cfg.taylor_order == "exact" or m < cfg.exact_terms
    if m == 1 and exact_eval:
        return _phi1_closed(i, zeta, payoff, k_mat, rho)
    taylor_p = -1 if exact_eval else int(cfg.taylor_order)
    return _phi_enumerated(i, m, zeta, payoff, k_mat, rho, mcache,
                           taylor_p, cfg.conf_tol)


def price_barrier(
    maturity: float,
    spec: BarrierSpec,
    cfg: PricerConfig,
    model: RegimeModel,
    tp: TransformedParams | None = None,
) -> PriceSurface:
    """Backward surface of the barrier claim.

    Knock-outs run the masked recursion directly; knock-ins are the
    parity complement against the barrier-free claim priced with the
    same configuration (so parity holds to rounding by construction).
    """
    tp = tp if tp is not None else transform_rate_only(model)
    alive = survivor_mask(spec, model.vols)
    payoff = as_payoff(spec.values, tp.n_regimes) * alive
    k, head, delta = cfg.slices(maturity)
    base_cache = PathCache(tp.n_regimes)
    mcache = _MaskedPathCache(base_cache, alive)
    frozen = not tp.constant
    grid = np.empty(k)
    prices = np.empty((tp.n_regimes, k))
    current = payoff
    ttm = 0.0
    for j in range(k):
        slice_len = head if j == 0 else delta
        ttm += slice_len
        t_eval = maturity - ttm if frozen else 0.0
        current = _series_vector(slice_len, current * alive, tp, cfg, mcache, t_eval)
        current = current * alive
        grid[j] = ttm
        prices[:, j] = current
    out = PriceSurface(grid, prices)
    if spec.direction == "out":
        return out
    plain = price_claim(maturity, spec.values, cfg, model,
                        discounting="rate", tp=tp)
    return PriceSurface(out.grid, plain.prices - out.prices)
