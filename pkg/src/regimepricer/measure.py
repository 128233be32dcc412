"""Change to the unit-rate jump measure.

Under the transformed measure the chain jumps at Poisson rate one with a
uniform embedded chain; the original dynamics survive as a per-jump
penalty matrix K and an adjusted discount-rate vector rho:

    K[i, j](t)  = -log((N - 1) a_ij(t))      (i != j, zero diagonal)
    rho[i](t)   = v_i - 1 - a_ii(t)

where v is the effective discount vector: r + h*L for credit-adjusted
(defaultable) claims, or r alone for claims that only discount at the
short rate (barrier contracts).
"""
from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .model import GeneratorSpec, RegimeModel

__all__ = ["TransformedParams", "transform", "transform_rate_only"]


def _transformed_at(a: np.ndarray, v: np.ndarray) -> tuple[np.ndarray, np.ndarray]:
    n = a.shape[0]
    off = ~np.eye(n, dtype=bool)
    if np.any(a[off] <= 0.0):
        i, j = next(zip(*np.nonzero(off & (a <= 0.0))))
        raise ValueError(
            f"off-diagonal rate a[{i + 1},{j + 1}] = {a[i, j]:g} is not strictly "
            "positive; the jump-measure transform is undefined (apply "
            "floor_zero_rates first if the zero is intentional)"
        )
    k = np.zeros_like(a)
    k[off] = -np.log((n - 1) * a[off])
    rho = v - 1.0 - np.diag(a)
    return k, rho


@dataclass(frozen=True)
class TransformedParams:
    """Jump-penalty matrix K(t) and adjusted rate vector rho(t).

    For constant generators both are cached arrays; otherwise they are
    evaluated on demand. Immutable and safe to share across threads.
    """

    n_regimes: int
    generator: GeneratorSpec
    discount_vector: np.ndarray
    _k_const: np.ndarray | None = None
    _rho_const: np.ndarray | None = None

    @property
    def constant(self) -> bool:
        return self._k_const is not None

    def k_at(self, t: float = 0.0) -> np.ndarray:
        if self._k_const is not None:
            return self._k_const
        k, _ = _transformed_at(self.generator(t), self.discount_vector)
        return k

    def rho_at(self, t: float = 0.0) -> np.ndarray:
        if self._rho_const is not None:
            return self._rho_const
        _, rho = _transformed_at(self.generator(t), self.discount_vector)
        return rho

    def at(self, t: float = 0.0) -> tuple[np.ndarray, np.ndarray]:
        return self.k_at(t), self.rho_at(t)


def transform(model: RegimeModel, discounting: str = "credit") -> TransformedParams:
    """Build the unit-rate-measure objects for ``model``.

    discounting: "credit" discounts at r + h*L (defaultable claims);
    "rate" discounts at r alone. Raises if any off-diagonal rate is
    nonpositive at evaluation; zeros must be repaired explicitly.
    """
    if discounting == "credit":
        v = model.short_rates + model.credit_spreads
    elif discounting == "rate":
        v = model.short_rates.astype(float)
    else:
        raise ValueError(f"unknown discounting {discounting!r}")
    v = v.copy()
    v.setflags(write=False)
    gen = model.generator
    if gen.constant:
        k, rho = _transformed_at(gen.matrix, v)
        k.setflags(write=False)
        rho.setflags(write=False)
        return TransformedParams(model.n_regimes, gen, v, k, rho)
    return TransformedParams(model.n_regimes, gen, v)


def transform_rate_only(model: RegimeModel) -> TransformedParams:
    """Shorthand for ``transform(model, discounting="rate")``."""
    return transform(model, "rate")
