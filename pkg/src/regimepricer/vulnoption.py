"""Vulnerable European options on the regime-switching stock.

Conditional on the chain path the stock is lognormal, so a claim with
one slice to run prices by the Black-Scholes formula with the slice's
regime parameters frozen at its end state. Longer maturities recurse:
spot values live on a log-price lattice, each backward slice mixes the
next-slice values with the per-regime Gaussian increment weights and
reprices the resulting per-regime payoff with the series pricer.
"""
from __future__ import annotations

import math
import warnings
from dataclasses import dataclass

import numpy as np
from scipy.signal import fftconvolve
from scipy.special import ndtr

from .measure import transform
from .model import RegimeModel
from .series import PathCache, PricerConfig, price_claim, step_operator

__all__ = [
    "OptionSpec",
    "LatticeConfig",
    "VulnSurface",
    "bs_kernel",
    "first_order_vuln_price",
    "vuln_option_price",
]


def bs_kernel(zeta: float, spot: float, variance: float, rate: float,
              strike: float, put: bool = False) -> float:
    """Black-Scholes value with total variance ``variance * zeta``.

    Zero maturity or variance degenerates to discounted intrinsic value
    (the continuous limit of the formula).
    """
    if spot <= 0 or strike <= 0:
        raise ValueError("spot and strike must be positive")
    if zeta < 0 or variance < 0:
        raise ValueError("maturity and variance must be nonnegative")
    df = math.exp(-rate * zeta)
    if zeta == 0.0 or variance == 0.0:
        fwd_intrinsic = spot - strike * df
        if put:
            fwd_intrinsic = -fwd_intrinsic
        return max(fwd_intrinsic, 0.0)
    sd = math.sqrt(variance * zeta)
    d1 = (math.log(spot / strike) + (rate + variance / 2.0) * zeta) / sd
    d2 = d1 - sd
    if put:
        return strike * df * ndtr(-d2) - spot * ndtr(-d1)
    return spot * ndtr(d1) - strike * df * ndtr(d2)


@dataclass(frozen=True)
class OptionSpec:
    strike: float
    spot: float
    maturity: float
    put: bool = False

    def __post_init__(self):
        if self.strike <= 0 or self.spot <= 0:
            raise ValueError("strike and spot must be positive")
        if self.maturity <= 0:
            raise ValueError("maturity must be positive")


@dataclass(frozen=True)
class LatticeConfig:
    """Log-price lattice and sub-pricer controls.

    step: backward slice length (outer recursion).
    spacing: log-price cell width; default sigma_max * sqrt(step) scaled
        by ``spacing_scale`` (finer lattices cut the quantization bias
        of the mixing step at the cost of width).
    half_width: lattice half-width in cells; default spans six total
        standard deviations at maturity. Tail mass beyond the grid is
        absorbed into the end cells (warned above ``tail_warn``).
    n_terms / inner_steps: series truncation and slice count for each
        embedded claim repricing.
    """

    step: float
    spacing: float | None = None
    half_width: int | None = None
    spacing_scale: float = 1.0
    n_terms: int = 2
    inner_steps: int = 1
    tail_warn: float = 0.01

    def __post_init__(self):
        if self.step <= 0:
            raise ValueError("step must be positive")
        if self.spacing is not None and self.spacing <= 0:
            raise ValueError("spacing must be positive")
        if self.half_width is not None and self.half_width < 1:
            raise ValueError("half_width must be >= 1")
        if self.spacing_scale <= 0:
            raise ValueError("spacing_scale must be positive")
        if self.inner_steps < 1 or self.n_terms < 1:
            raise ValueError("inner_steps and n_terms must be >= 1")

    def resolve(self, model: RegimeModel, maturity: float) -> tuple[float, int]:
        """Concrete (spacing, half_width) for this model and maturity.

        The default half-width spans six total standard deviations at
        maturity plus the largest drift displacement, so tail
        truncation stays negligible.
        """
        sig_max = float(model.vols.max())
        spacing = self.spacing
        if spacing is None:
            spacing = sig_max * math.sqrt(self.step) * self.spacing_scale
        half = self.half_width
        if half is None:
            drift = float(np.max(np.abs(model.short_rates - model.vols ** 2 / 2)))
            span = 6.0 * sig_max * math.sqrt(maturity) + drift * maturity
            half = max(1, math.ceil(span / spacing))
        return spacing, half

    def pricer(self) -> PricerConfig:
        return PricerConfig(n_terms=self.n_terms, n_steps=self.inner_steps)


@dataclass(frozen=True)
class VulnSurface:
    """Option values over (lattice spot, regime); row at the true spot."""

    spots: np.ndarray            # (2B+1,)
    prices: np.ndarray           # (2B+1, N)
    spot_index: int

    @property
    def at_spot(self) -> np.ndarray:
        return self.prices[self.spot_index]


def first_order_vuln_price(
    zeta: float,
    spot: float,
    strike: float,
    model: RegimeModel,
    cfg: PricerConfig,
    put: bool = False,
) -> np.ndarray:
    """Short-maturity value with regime parameters frozen past the slice.

    Exact when the chain does not move before ``zeta``; the payoff seen
    by the series pricer is the frozen Black-Scholes value per regime.
    """
    payoff = np.array([
        bs_kernel(zeta, spot * math.exp(zeta * r_j), v_j * v_j, 0.0, strike, put)
        for r_j, v_j in zip(model.short_rates, model.vols)
    ])
    return price_claim(zeta, payoff, cfg, model).terminal


def _mix_step(values, grid, spacing, delta, drift, sig):
    """One Gaussian mixing slice for a single regime's value column.

    values: (n,) next-slice values on the lattice; returns same shape.
    Displacements beyond the grid are absorbed into the end cells.
    """
    n = values.shape[0]
    half = (n - 1) // 2
    scale = sig * math.sqrt(delta)

    def edge(x):
        return (x * spacing - delta * drift) / scale

    d = np.arange(-(n - 1), n)
    cum = ndtr(edge(d + 0.5))
    cell = np.diff(cum, prepend=0.0)
    if n > 256:
        mixed = fftconvolve(values, cell[::-1])[n - 1:2 * n - 1]
    else:
        mixed = np.convolve(values, cell[::-1])[n - 1:2 * n - 1]
    extra_left = ndtr(edge(-half - grid - 0.5))
    extra_right = 1.0 - ndtr(edge(half - grid + 0.5))
    return mixed + extra_left * values[0] + extra_right * values[-1]


def _tail_mass(model: RegimeModel, maturity: float, span: float) -> float:
    """Worst per-regime Gaussian mass ending beyond +-span of the spot."""
    drift = np.abs(model.short_rates - model.vols ** 2 / 2) * maturity
    sd = model.vols * math.sqrt(maturity)
    return float(np.max(ndtr(-(span - drift) / sd) + ndtr(-(span + drift) / sd)))


def vuln_option_price(
    spec: OptionSpec,
    lat: LatticeConfig,
    model: RegimeModel,
) -> VulnSurface:
    """Backward lattice recursion for the vulnerable option value.

    Base slice: frozen Black-Scholes payoffs repriced by the series
    pricer at every lattice spot. Each further slice mixes the previous
    values with per-regime Gaussian weights (end cells absorb the
    tails) and reprices. Returns values over (lattice spot, regime).
    """
    if not model.generator.constant:
        raise ValueError("the lattice recursion requires a constant generator")
    nreg = model.n_regimes
    T = spec.maturity
    delta = lat.step
    n_slices = max(1, math.ceil(T / delta - 1e-12))
    base_len = T - (n_slices - 1) * delta
    spacing, half = lat.resolve(model, T)
    grid = np.arange(-half, half + 1)
    spots = spec.spot * np.exp(grid * spacing)
    npts = grid.shape[0]

    tp = transform(model)
    cache = PathCache(nreg)
    pcfg = lat.pricer()

    # operators applying one embedded repricing (constant generator)
    def claim_operator(horizon):
        inner = horizon / lat.inner_steps
        g = step_operator(inner, tp, pcfg, cache)
        return np.linalg.matrix_power(g, lat.inner_steps)

    payoff = np.empty((npts, nreg))
    for j in range(nreg):
        fwd = spots * math.exp(base_len * model.short_rates[j])
        var = model.vols[j] ** 2
        payoff[:, j] = [bs_kernel(base_len, f, var, 0.0, spec.strike, spec.put)
                        for f in fwd]
    values = payoff @ claim_operator(base_len).T

    leak = _tail_mass(model, T, half * spacing)
    if leak > lat.tail_warn:
        warnings.warn(
            f"lattice too narrow: {leak:.2%} of the terminal Gaussian mass "
            "falls beyond the grid and is absorbed into the end cells; "
            "increase half_width",
            RuntimeWarning,
        )
    if n_slices > 1:
        op_delta = claim_operator(delta).T
        drift = model.short_rates - model.vols ** 2 / 2.0
        for _ in range(n_slices - 1):
            mixed = np.empty_like(values)
            for j in range(nreg):
                mixed[:, j] = _mix_step(values[:, j], grid, spacing, delta,
                                        drift[j], model.vols[j])
            values = mixed @ op_delta
    return VulnSurface(spots, values, half)
