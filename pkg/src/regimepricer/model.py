"""Market model: regime parameter vectors and chain generators.

Regimes are indexed 0..N-1 internally; every user-facing surface (CLI,
CSV output, config files) labels them 1..N.
"""
from __future__ import annotations

from dataclasses import dataclass, field, replace
from typing import Callable, Union

import numpy as np

__all__ = [
    "ConstantGenerator",
    "TimeVaryingGenerator",
    "GeneratorSpec",
    "RegimeModel",
    "GeneratorViolation",
    "ValidationReport",
    "floor_zero_rates",
    "validate_generator",
    "as_payoff",
]

ROW_SUM_TOL = 1e-12


def _as_matrix(m) -> np.ndarray:
    a = np.asarray(m, dtype=float)
    if a.ndim != 2 or a.shape[0] != a.shape[1]:
        raise ValueError(f"generator must be a square matrix, got shape {a.shape}")
    return a


def _check_row_sums(a: np.ndarray, where: str = "") -> None:
    sums = a.sum(axis=1)
    if np.max(np.abs(sums)) > ROW_SUM_TOL:
        bad = int(np.argmax(np.abs(sums)))
        raise ValueError(
            f"generator row {bad + 1} sums to {sums[bad]:.3e}{where}; "
            f"rows must sum to zero within {ROW_SUM_TOL:g}"
        )


@dataclass(frozen=True)
class ConstantGenerator:
    """Time-invariant transition-rate matrix (rows sum to zero)."""

    matrix: np.ndarray

    def __post_init__(self):
        a = _as_matrix(self.matrix)
        a.setflags(write=False)
        object.__setattr__(self, "matrix", a)
        _check_row_sums(a)
        if np.any(a[~np.eye(len(a), dtype=bool)] < 0):
            raise ValueError("off-diagonal transition rates must be nonnegative")

    @property
    def n_regimes(self) -> int:
        return self.matrix.shape[0]

    @property
    def constant(self) -> bool:
        return True

    def __call__(self, t: float) -> np.ndarray:
        return self.matrix

    def off_diagonal_bounds(self) -> tuple[np.ndarray, np.ndarray]:
        """(inf, sup) of each off-diagonal entry; equal for a constant matrix."""
        return self.matrix, self.matrix


@dataclass(frozen=True)
class TimeVaryingGenerator:
    """Generator given as an evaluable map t -> matrix.

    ``func`` must be a pure function of t. Because the entries are not
    differentiated automatically, the caller declares per-entry bounds
    over the horizon of interest plus a bound on |d a_ij/dt|; these feed
    the validation and the frozen-step error constants.
    """

    func: Callable[[float], np.ndarray]
    n_regimes: int
    lower: np.ndarray  # declared inf of each off-diagonal entry
    upper: np.ndarray  # declared sup of each off-diagonal entry
    deriv_sup: float   # sup over t, i != j of |d a_ij/dt|

    def __post_init__(self):
        lo = _as_matrix(self.lower)
        up = _as_matrix(self.upper)
        if lo.shape != (self.n_regimes, self.n_regimes) or up.shape != lo.shape:
            raise ValueError("bound matrices must be N x N")
        if self.deriv_sup < 0:
            raise ValueError("deriv_sup must be nonnegative")
        lo.setflags(write=False)
        up.setflags(write=False)
        object.__setattr__(self, "lower", lo)
        object.__setattr__(self, "upper", up)

    @property
    def constant(self) -> bool:
        return False

    def __call__(self, t: float) -> np.ndarray:
        return _as_matrix(self.func(t))

    def off_diagonal_bounds(self) -> tuple[np.ndarray, np.ndarray]:
        return self.lower, self.upper


GeneratorSpec = Union[ConstantGenerator, TimeVaryingGenerator]


def floor_zero_rates(gen: ConstantGenerator, eps: float = 1e-12) -> ConstantGenerator:
    """Replace zero off-diagonal rates with ``eps``, adjusting the diagonal.

    Zero rates break the strict-positivity requirement of the series
    transform; the floored chain is statistically indistinguishable for
    eps ~ 1e-12 while keeping every jump penalty finite.
    """
    a = gen.matrix.copy()
    n = a.shape[0]
    off = ~np.eye(n, dtype=bool)
    zero = off & (a == 0.0)
    if not zero.any():
        return gen
    a[zero] = eps
    np.fill_diagonal(a, 0.0)
    np.fill_diagonal(a, -a.sum(axis=1))
    return ConstantGenerator(a)


@dataclass(frozen=True)
class GeneratorViolation:
    i: int          # 1-based row
    j: int          # 1-based column
    t: float
    value: float
    reason: str

    def __str__(self):
        return f"a[{self.i},{self.j}](t={self.t:g}) = {self.value:.6g}: {self.reason}"


@dataclass(frozen=True)
class ValidationReport:
    violations: tuple[GeneratorViolation, ...]

    @property
    def ok(self) -> bool:
        return not self.violations

    def __str__(self):
        if self.ok:
            return "ok"
        return "\n".join(str(v) for v in self.violations)


def validate_generator(
    gen: GeneratorSpec,
    horizon: float,
    n_samples: int = 201,
) -> ValidationReport:
    """Check row sums, strict positivity and boundedness over [0, horizon].

    Constant generators are checked once; time-varying ones on a uniform
    grid of ``n_samples`` points plus their declared bounds. Returns a
    report listing every (i, j, t, value) breach (1-based indices).
    """
    if horizon <= 0:
        raise ValueError("horizon must be positive")
    bad: list[GeneratorViolation] = []

    def check_matrix(a: np.ndarray, t: float):
        n = a.shape[0]
        sums = a.sum(axis=1)
        for i in np.nonzero(np.abs(sums) > ROW_SUM_TOL)[0]:
            bad.append(GeneratorViolation(int(i) + 1, int(i) + 1, t, float(sums[i]),
                                          "row sum not zero"))
        off = ~np.eye(n, dtype=bool)
        for i, j in zip(*np.nonzero(off & (a <= 0.0))):
            bad.append(GeneratorViolation(int(i) + 1, int(j) + 1, t, float(a[i, j]),
                                          "off-diagonal rate not strictly positive"))
        for i, j in zip(*np.nonzero(off & ~np.isfinite(a))):
            bad.append(GeneratorViolation(int(i) + 1, int(j) + 1, t, float(a[i, j]),
                                          "off-diagonal rate not finite"))

    if gen.constant:
        check_matrix(gen(0.0), 0.0)
    else:
        lo, up = gen.off_diagonal_bounds()
        n = lo.shape[0]
        off = ~np.eye(n, dtype=bool)
        for i, j in zip(*np.nonzero(off & (lo <= 0.0))):
            bad.append(GeneratorViolation(int(i) + 1, int(j) + 1, float("nan"),
                                          float(lo[i, j]),
                                          "declared lower bound not strictly positive"))
        for i, j in zip(*np.nonzero(off & ~np.isfinite(up))):
            bad.append(GeneratorViolation(int(i) + 1, int(j) + 1, float("nan"),
                                          float(up[i, j]),
                                          "declared upper bound not finite"))
        for t in np.linspace(0.0, horizon, n_samples):
            check_matrix(gen(float(t)), float(t))
    return ValidationReport(tuple(bad))


def as_payoff(values, n_regimes: int) -> np.ndarray:
    """Validate a per-regime payoff vector (finite entries, length N)."""
    xi = np.asarray(values, dtype=float)
    if xi.shape != (n_regimes,):
        raise ValueError(f"payoff must have shape ({n_regimes},), got {xi.shape}")
    if not np.all(np.isfinite(xi)):
        raise ValueError("payoff entries must be finite")
    return xi


@dataclass(frozen=True)
class RegimeModel:
    """Per-regime market parameters plus the risk-neutral chain generator.

    Vectors: short_rates r (> 0), hazards h (> 0), losses L in [0, 1],
    vols sigma (> 0) and drifts mu (real-world drifts; not used by the
    pricing measure, kept for completeness). All immutable.
    """

    short_rates: np.ndarray
    hazards: np.ndarray
    losses: np.ndarray
    vols: np.ndarray
    generator: GeneratorSpec
    drifts: np.ndarray | None = None

    def __post_init__(self):
        r = np.asarray(self.short_rates, dtype=float)
        h = np.asarray(self.hazards, dtype=float)
        L = np.asarray(self.losses, dtype=float)
        s = np.asarray(self.vols, dtype=float)
        n = r.shape[0] if r.ndim == 1 else 0
        if n < 2:
            raise ValueError("need at least two regimes")
        for name, v in (("hazards", h), ("losses", L), ("vols", s)):
            if v.shape != (n,):
                raise ValueError(f"{name} must have shape ({n},)")
        if np.any(r <= 0):
            raise ValueError("short rates must be positive")
        if np.any(h <= 0):
            raise ValueError("hazard rates must be positive")
        if np.any((L < 0) | (L > 1)):
            raise ValueError("loss fractions must lie in [0, 1]")
        if np.any(s <= 0):
            raise ValueError("volatilities must be positive")
        mu = (np.zeros(n) if self.drifts is None
              else np.asarray(self.drifts, dtype=float))
        if mu.shape != (n,):
            raise ValueError(f"drifts must have shape ({n},)")
        gen_n = (self.generator.matrix.shape[0] if self.generator.constant
                 else self.generator.n_regimes)
        if gen_n != n:
            raise ValueError(f"generator is {gen_n}x{gen_n} but model has {n} regimes")
        for name, v in (("short_rates", r), ("hazards", h), ("losses", L),
                        ("vols", s), ("drifts", mu)):
            v.setflags(write=False)
            object.__setattr__(self, name, v)

    @property
    def n_regimes(self) -> int:
        return self.short_rates.shape[0]

    @property
    def credit_spreads(self) -> np.ndarray:
        """Per-regime reduced-form spread h * L."""
        return self.hazards * self.losses

    def with_rates(self, short_rates) -> "RegimeModel":
        return replace(self, short_rates=np.asarray(short_rates, dtype=float))

    def with_generator(self, generator: GeneratorSpec) -> "RegimeModel":
        return replace(self, generator=generator)

    def floor_repaired(self, eps: float = 1e-12) -> "RegimeModel":
        """Copy with zero off-diagonal rates floored to ``eps`` (constant only)."""
        if not self.generator.constant:
            raise ValueError("floor repair applies to constant generators only")
        return self.with_generator(floor_zero_rates(self.generator, eps))
