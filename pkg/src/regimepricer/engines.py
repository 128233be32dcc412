"""Independent reference engines: backward ODE, matrix exponential, Monte-Carlo.

All three price directly under the risk-neutral chain dynamics and share
no code with the series pricer, so they serve as cross-validation
oracles for it (and for each other).
"""
from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Callable, Union

import numpy as np
from scipy.integrate import solve_ivp
from scipy.linalg import expm
from scipy.special import ndtri

from .measure import TransformedParams
from .model import RegimeModel, as_payoff

__all__ = [
    "OdeConfig",
    "McConfig",
    "McResult",
    "TerminalClaim",
    "BarrierClaim",
    "VulnerableOption",
    "ode_price",
    "expm_price",
    "mc_price",
    "mc_phi_conditional",
    "discount_matrix",
]


def discount_matrix(model: RegimeModel, t: float = 0.0) -> np.ndarray:
    """F(t) with F_ii = r_i + h_i L_i - a_ii(t), F_ij = -a_ij(t)."""
    a = model.generator(t)
    return np.diag(model.short_rates + model.credit_spreads) - a


@dataclass(frozen=True)
class OdeConfig:
    """Adaptive Runge-Kutta step control for the backward system."""

    rtol: float = 1e-8
    atol: float = 1e-10
    method: str = "RK45"

    def __post_init__(self):
        if self.rtol <= 0 or self.atol <= 0:
            raise ValueError("tolerances must be positive")


def ode_price(
    maturity: float,
    payoff,
    model: RegimeModel,
    cfg: OdeConfig | None = None,
    dense: bool = False,
):
    """Integrate the coupled backward system to time zero.

    d psi_i/dt = (r_i + h_i L_i - a_ii(t)) psi_i - sum_{j != i} a_ij(t) psi_j,
    terminal condition psi(T) = payoff. Returns the price vector at time
    zero; with ``dense=True`` also a callable mapping time-to-maturity
    to the price vector.
    """
    cfg = cfg or OdeConfig()
    xi = as_payoff(payoff, model.n_regimes)
    T = float(maturity)
    if T < 0:
        raise ValueError("maturity must be nonnegative")
    if T == 0:
        if dense:
            return xi.copy(), lambda s: xi.copy()
        return xi.copy()

    if model.generator.constant:
        f_const = discount_matrix(model)

        def rhs(s, u):
            return -(f_const @ u)
    else:
        def rhs(s, u):
            return -(discount_matrix(model, T - s) @ u)

    sol = solve_ivp(rhs, (0.0, T), xi, method=cfg.method, rtol=cfg.rtol,
                    atol=cfg.atol, dense_output=dense)
    if not sol.success:
        raise RuntimeError(f"backward integration failed: {sol.message}")
    value = sol.y[:, -1]
    if dense:
        return value, (lambda ttm: sol.sol(np.clip(ttm, 0.0, T)))
    return value


def expm_price(maturity: float, payoff, model: RegimeModel) -> np.ndarray:
    """Closed-form price exp(-T F) @ payoff for a constant generator.

    The exponential uses the standard 13/13 Pade scaling-and-squaring
    scheme (scipy.linalg.expm).
    """
    if not model.generator.constant:
        raise ValueError("expm pricing requires a constant generator")
    xi = as_payoff(payoff, model.n_regimes)
    if maturity < 0:
        raise ValueError("maturity must be nonnegative")
    return expm(-float(maturity) * discount_matrix(model)) @ xi


# ---------------------------------------------------------------------------
# Monte-Carlo

@dataclass(frozen=True)
class TerminalClaim:
    """Defaultable claim paying values[X_T], discounted at r + h*L."""

    values: np.ndarray

    def __post_init__(self):
        object.__setattr__(self, "values", np.asarray(self.values, dtype=float))


@dataclass(frozen=True)
class BarrierClaim:
    """Barrier claim on the running max of the volatility state.

    "out" pays values[X_T] only if max sigma stays strictly below
    ``level`` on the whole path (the initial state included); "in" pays
    on the complement. Discounted at r alone.
    """

    level: float
    values: np.ndarray
    direction: str = "out"

    def __post_init__(self):
        object.__setattr__(self, "values", np.asarray(self.values, dtype=float))
        if self.direction not in ("out", "in"):
            raise ValueError("direction must be 'out' or 'in'")
        if self.level <= 0:
            raise ValueError("barrier level must be positive")


@dataclass(frozen=True)
class VulnerableOption:
    """Vulnerable European option on the stock, discounted at r + h*L."""

    strike: float
    spot: float
    put: bool = False

    def __post_init__(self):
        if self.strike <= 0 or self.spot <= 0:
            raise ValueError("strike and spot must be positive")


McClaim = Union[TerminalClaim, BarrierClaim, VulnerableOption]


@dataclass(frozen=True)
class McConfig:
    """Path count, seed and variance-reduction flags.

    The generator is counter-based (Philox) with one jumped substream
    per start regime, so runs are reproducible and independent across
    regimes. Antithetic/stratified sampling applies to the terminal
    Gaussian draw of vulnerable options (the chain jumps themselves are
    left untouched).
    """

    n_paths: int = 100_000
    seed: int = 0
    antithetic: bool = False
    stratified: bool = False

    def __post_init__(self):
        if self.n_paths < 1:
            raise ValueError("n_paths must be >= 1")


@dataclass(frozen=True)
class McResult:
    estimate: np.ndarray
    std_error: np.ndarray
    n_paths: int
    seed: int


def _simulate_constant(model, T, start, n, rng):
    """Vectorized jump-by-jump simulation under a constant generator.

    Returns (int_r, int_credit, int_var, run_max_sigma, final_state).
    """
    a = model.generator.matrix
    nreg = model.n_regimes
    exit_rate = -np.diag(a)
    jump_prob = a.copy()
    np.fill_diagonal(jump_prob, 0.0)
    with np.errstate(invalid="ignore", divide="ignore"):
        rows = np.where(exit_rate[:, None] > 0, jump_prob / exit_rate[:, None], 0.0)
    cum_rows = np.cumsum(rows, axis=1)

    r = model.short_rates
    credit = r + model.credit_spreads
    var = model.vols ** 2
    sig = model.vols

    state = np.full(n, start, dtype=np.int64)
    t = np.zeros(n)
    int_r = np.zeros(n)
    int_credit = np.zeros(n)
    int_var = np.zeros(n)
    run_max = np.full(n, sig[start])
    final = np.full(n, start, dtype=np.int64)
    idx = np.arange(n)
    while idx.size:
        st = state[idx]
        rate = exit_rate[st]
        with np.errstate(divide="ignore"):
            hold = np.where(rate > 0, rng.exponential(1.0, idx.size) / rate, np.inf)
        dt = np.minimum(hold, T - t[idx])
        int_r[idx] += r[st] * dt
        int_credit[idx] += credit[st] * dt
        int_var[idx] += var[st] * dt
        t[idx] += dt
        # a jump occurred iff the holding time ended before the horizon
        jumps = (hold <= dt) & (t[idx] < T - 1e-15)
        jidx = idx[jumps]
        if jidx.size:
            u = rng.random(jidx.size)
            nxt = (u[:, None] > cum_rows[state[jidx]]).sum(axis=1)
            nxt = np.minimum(nxt, nreg - 1)
            state[jidx] = nxt
            run_max[jidx] = np.maximum(run_max[jidx], sig[nxt])
        final[idx[~jumps]] = state[idx[~jumps]]
        idx = jidx
    return int_r, int_credit, int_var, run_max, final


def _simulate_time_varying(model, T, start, n, rng):
    """Exact thinning against the declared per-entry sup bounds."""
    gen = model.generator
    lo, up = gen.off_diagonal_bounds()
    nreg = model.n_regimes
    off = ~np.eye(nreg, dtype=bool)
    sup_exit = np.where(off, up, 0.0).sum(axis=1)

    r = model.short_rates
    credit = r + model.credit_spreads
    var = model.vols ** 2
    sig = model.vols

    int_r = np.zeros(n)
    int_credit = np.zeros(n)
    int_var = np.zeros(n)
    run_max = np.empty(n)
    final = np.empty(n, dtype=np.int64)
    for p in range(n):
        t = 0.0
        state = start
        rmax = sig[start]
        acc_r = acc_c = acc_v = 0.0
        while True:
            lam = sup_exit[state]
            prop = t + (rng.exponential() / lam if lam > 0 else np.inf)
            seg = min(prop, T) - t
            acc_r += r[state] * seg
            acc_c += credit[state] * seg
            acc_v += var[state] * seg
            if prop >= T:
                break
            rates = model.generator(prop)[state].copy()
            rates[state] = 0.0
            cum = np.cumsum(rates)
            if cum[-1] > lam * (1 + 1e-9):
                raise RuntimeError(
                    "declared sup bounds exceeded at t="
                    f"{prop:g}; thinning would be biased")
            u = rng.random() * lam
            if u < cum[-1]:
                state = int(np.searchsorted(cum, u, side="right"))
                rmax = max(rmax, sig[state])
            t = prop
        int_r[p] = acc_r
        int_credit[p] = acc_c
        int_var[p] = acc_v
        run_max[p] = rmax
        final[p] = state
    return int_r, int_credit, int_var, run_max, final


def _gaussian_draws(cfg: McConfig, n: int, rng) -> np.ndarray:
    if cfg.stratified:
        u = (rng.permutation(n) + rng.random(n)) / n
        z = ndtri(u)
    else:
        z = rng.standard_normal(n)
    if cfg.antithetic:
        half = n // 2
        z[half:2 * half] = -z[:half]
    return z


def mc_price(
    maturity: float,
    claim: McClaim,
    model: RegimeModel,
    cfg: McConfig | None = None,
) -> McResult:
    """Monte-Carlo price per start regime with standard errors.

    Simulates the chain by exponential holding times (thinning against
    declared sup rates when the generator is time-varying) and
    accumulates the discounted payoff of ``claim``.
    """
    cfg = cfg or McConfig()
    T = float(maturity)
    if T <= 0:
        raise ValueError("maturity must be positive")
    nreg = model.n_regimes
    est = np.empty(nreg)
    se = np.empty(nreg)
    for start in range(nreg):
        rng = np.random.Generator(np.random.Philox(cfg.seed).jumped(start))
        sim = (_simulate_constant if model.generator.constant
               else _simulate_time_varying)
        int_r, int_credit, int_var, run_max, final = sim(
            model, T, start, cfg.n_paths, rng)
        if isinstance(claim, TerminalClaim):
            pay = np.exp(-int_credit) * claim.values[final]
        elif isinstance(claim, BarrierClaim):
            survived = run_max < claim.level
            hit = survived if claim.direction == "out" else ~survived
            pay = np.exp(-int_r) * claim.values[final] * hit
        elif isinstance(claim, VulnerableOption):
            z = _gaussian_draws(cfg, cfg.n_paths, rng)
            terminal = claim.spot * np.exp(int_r - int_var / 2.0
                                           + np.sqrt(int_var) * z)
            intrinsic = (claim.strike - terminal if claim.put
                         else terminal - claim.strike)
            pay = np.exp(-int_credit) * np.maximum(intrinsic, 0.0)
        else:
            raise TypeError(f"unsupported claim {type(claim).__name__}")
        est[start] = pay.mean()
        se[start] = pay.std(ddof=1) / math.sqrt(cfg.n_paths)
    return McResult(est, se, cfg.n_paths, cfg.seed)


def mc_phi_conditional(
    i: int,
    m: int,
    zeta: float,
    payoff,
    tp: TransformedParams,
    n_samples: int = 200_000,
    seed: int = 0,
    survive: np.ndarray | None = None,
) -> tuple[float, float]:
    """Monte-Carlo estimate of the m-jump series term phi_{i,m}.

    Samples the uniform embedded chain and the ordered jump times
    directly under the unit-rate measure; validates the enumerated path
    sums conditional on the jump count. ``survive`` optionally masks
    regimes (barrier variant): paths touching a masked regime, or
    starting in one, contribute zero.
    """
    xi = as_payoff(payoff, tp.n_regimes)
    if not tp.constant:
        raise ValueError("conditional sampling requires a constant transform")
    k_mat, rho = tp.at()
    nreg = tp.n_regimes
    if survive is not None and not survive[i]:
        return 0.0, 0.0
    rng = np.random.Generator(np.random.Philox(seed))
    if m == 0:
        val = xi[i] * math.exp(-zeta * rho[i])
        return float(val), 0.0
    others = np.array([[j for j in range(nreg) if j != s] for s in range(nreg)],
                      dtype=np.int64)
    states = np.empty((n_samples, m + 1), dtype=np.int64)
    states[:, 0] = i
    for col in range(m):
        pick = rng.integers(0, nreg - 1, n_samples)
        states[:, col + 1] = others[states[:, col], pick]
    u = np.sort(rng.random((n_samples, m)), axis=1)
    spacings = np.diff(u, axis=1, prepend=0.0, append=1.0)  # (n, m+1)
    rate_int = zeta * (spacings * rho[states]).sum(axis=1)
    jump_pen = k_mat[states[:, :-1], states[:, 1:]].sum(axis=1)
    vals = xi[states[:, -1]] * np.exp(-rate_int - jump_pen)
    if survive is not None:
        vals = vals * survive[states].all(axis=1)
    return float(vals.mean()), float(vals.std(ddof=1) / math.sqrt(n_samples))
