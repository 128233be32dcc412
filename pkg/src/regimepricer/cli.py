"""Batch command-line driver.

Subcommands: ``price`` (CSV price tables per engine), ``bench`` (timing
grid of the series pricer against the ODE and matrix-exponential
engines, or compiled-vs-pure kernel timings), ``converge`` (error-vs-k
study with log-log slope) and ``validate`` (model invariant suite).
Exit codes: 0 ok, 2 config error, 3 numeric failure.
"""
from __future__ import annotations

import argparse
import csv
import io
import sys
import time
from pathlib import Path

import numpy as np

from .barrier import BarrierSpec, price_barrier
from .config import RunConfig, load_model, three_regime_model
from .engines import (
    BarrierClaim,
    McConfig,
    OdeConfig,
    TerminalClaim,
    VulnerableOption,
    expm_price,
    mc_price,
    ode_price,
)
from .measure import transform
from .model import validate_generator
from .series import PricerConfig, price_claim
from .vulnoption import LatticeConfig, OptionSpec, vuln_option_price

BENCH_DELTAS = (0.1, 0.075, 0.05, 0.025)
BENCH_HORIZONS = (5.0, 10.0, 15.0, 20.0, 25.0, 30.0, 35.0, 40.0)


def _fmt_price(x: float) -> str:
    return f"{x:.6f}"


def _fmt_diff(x: float) -> str:
    return f"{x:.6e}"


def _write_csv(path: str, header: list[str], rows: list[list[str]]) -> None:
    out = io.StringIO()
    w = csv.writer(out, lineterminator="\n")
    w.writerow(header)
    w.writerows(rows)
    text = out.getvalue()
    if path:
        Path(path).write_text(text)
    else:
        sys.stdout.write(text)


def read_price_csv(path: str) -> tuple[list[str], np.ndarray]:
    """Re-parse an emitted price CSV into (header, float matrix)."""
    with open(path, newline="") as fh:
        rows = list(csv.reader(fh))
    header = rows[0]
    data = np.array([[float(v) for v in r] for r in rows[1:]])
    return header, data


def _pricer_config(rc: RunConfig) -> PricerConfig:
    order = rc.taylor_order
    if isinstance(order, str) and order != "exact":
        order = int(order)
    return PricerConfig(n_terms=rc.n_terms, n_steps=rc.n_steps, step=rc.step,
                        taylor_order=order)


def _series_value(rc: RunConfig, model, maturity: float) -> np.ndarray:
    cfg = _pricer_config(rc)
    ones = np.ones(model.n_regimes)
    if rc.instrument == "bond":
        return price_claim(maturity, ones, cfg, model).terminal
    if rc.instrument in ("digital-barrier", "call-barrier"):
        values = (ones if rc.instrument == "digital-barrier"
                  else np.maximum(model.vols - rc.strike, 0.0))
        spec = BarrierSpec(rc.barrier_level, values, rc.barrier_direction)
        return price_barrier(maturity, spec, cfg, model).terminal
    spec = OptionSpec(rc.option_strike, rc.spot, maturity, rc.put)
    lat = LatticeConfig(step=rc.lattice_step, spacing_scale=rc.lattice_scale,
                        n_terms=rc.n_terms)
    return vuln_option_price(spec, lat, model).at_spot


def _mc_value(rc: RunConfig, model, maturity: float):
    ones = np.ones(model.n_regimes)
    if rc.instrument == "bond":
        claim = TerminalClaim(ones)
    elif rc.instrument == "digital-barrier":
        claim = BarrierClaim(rc.barrier_level, ones, rc.barrier_direction)
    elif rc.instrument == "call-barrier":
        claim = BarrierClaim(rc.barrier_level,
                             np.maximum(model.vols - rc.strike, 0.0),
                             rc.barrier_direction)
    else:
        claim = VulnerableOption(rc.option_strike, rc.spot, rc.put)
    cfg = McConfig(n_paths=rc.n_paths, seed=rc.seed, antithetic=rc.antithetic)
    return mc_price(maturity, claim, model, cfg)


def cmd_price(rc: RunConfig, out_path: str) -> int:
    model = load_model(rc.model_path) if rc.model_path else three_regime_model()
    ones = np.ones(model.n_regimes)
    engines = list(rc.engines)
    header = ["maturity", "regime", *engines]
    pairs = [(a, b) for i, a in enumerate(engines) for b in engines[i + 1:]]
    header += [f"absdiff_{a}_{b}" for a, b in pairs]
    if "mc" in engines:
        header.append("mc_stderr")
    rows = []
    for T in rc.maturities:
        values = {}
        mc_se = None
        for eng in engines:
            if eng == "series":
                values[eng] = _series_value(rc, model, T)
            elif eng == "ode":
                values[eng] = ode_price(T, ones, model, OdeConfig())
            elif eng == "expm":
                values[eng] = expm_price(T, ones, model)
            else:
                res = _mc_value(rc, model, T)
                values[eng] = res.estimate
                mc_se = res.std_error
        for regime in range(model.n_regimes):
            row = [f"{T:g}", str(regime + 1)]
            row += [_fmt_price(values[e][regime]) for e in engines]
            row += [_fmt_diff(abs(values[a][regime] - values[b][regime]))
                    for a, b in pairs]
            if mc_se is not None:
                row.append(_fmt_diff(mc_se[regime]))
            rows.append(row)
    _write_csv(out_path, header, rows)
    return 0


def cmd_bench(args, out_path: str) -> int:
    if args.kernels:
        return _bench_kernels(out_path)
    model = three_regime_model() if not args.model else load_model(args.model)
    deltas = args.deltas or BENCH_DELTAS
    horizons = args.horizons or BENCH_HORIZONS
    ones = np.ones(model.n_regimes)
    rows = []
    for delta in deltas:
        for T in horizons:
            cfg = PricerConfig(n_terms=2, step=delta)
            t0 = time.perf_counter()
            price_claim(T, ones, cfg, model)
            t_series = time.perf_counter() - t0

            t0 = time.perf_counter()
            ode_price(T, ones, model, dense=True)
            t_ode = time.perf_counter() - t0

            grid = np.arange(1, cfg.slices(T)[0] + 1) * delta
            t0 = time.perf_counter()
            for zeta in grid:
                expm_price(zeta, ones, model)
            t_expm = time.perf_counter() - t0

            rows.append(["ode", f"{delta:g}", f"{T:g}",
                         f"{t_series:.6f}", f"{t_ode:.6f}",
                         f"{t_series / t_ode:.4f}"])
            rows.append(["expm", f"{delta:g}", f"{T:g}",
                         f"{t_series:.6f}", f"{t_expm:.6f}",
                         f"{t_series / t_expm:.4f}"])
    _write_csv(out_path, ["reference", "delta", "horizon",
                          "t_series_s", "t_reference_s", "ratio"], rows)
    return 0


def _bench_kernels(out_path: str) -> int:
    from ._kernels import implementations

    impls = implementations()
    rng = np.random.default_rng(0)
    rows = []
    for m in (2, 3, 4, 5, 6):
        n_regimes = 6
        from .series import PathCache
        cache = PathCache(n_regimes)
        paths = cache.paths(0, m)
        rho = rng.uniform(-1.0, 0.0, n_regimes)
        k_mat = rng.uniform(0.5, 2.0, (n_regimes, n_regimes))
        np.fill_diagonal(k_mat, 0.0)
        sum_k = cache.jump_penalties(k_mat, 0, m)
        payoff = np.ones(n_regimes)
        timings = {}
        for name, impl in impls.items():
            reps, best = 5, float("inf")
            for _ in range(reps):
                t0 = time.perf_counter()
                impl.phi_weighted_sum(0, paths, sum_k, rho, payoff, 0.5, -1, 1e-6)
                best = min(best, time.perf_counter() - t0)
            timings[name] = best
        row = ["phi_weighted_sum", str(m), str(paths.shape[0]),
               f"{timings['pure']:.6e}",
               f"{timings.get('compiled', float('nan')):.6e}"]
        if "compiled" in timings and timings["compiled"] > 0:
            row.append(f"{timings['pure'] / timings['compiled']:.2f}")
        else:
            row.append("")
        rows.append(row)
    _write_csv(out_path, ["op", "m", "n_paths", "t_pure_s", "t_compiled_s",
                          "speedup"], rows)
    return 0


def cmd_converge(args, out_path: str) -> int:
    model = three_regime_model() if not args.model else load_model(args.model)
    ones = np.ones(model.n_regimes)
    ks = args.k_list
    rows = []
    slopes = {}
    for n_terms in args.terms:
        errs = []
        ref = ode_price(args.T, ones, model, OdeConfig(rtol=1e-10, atol=1e-12))
        for k in ks:
            cfg = PricerConfig(n_terms=n_terms, n_steps=k)
            approx = price_claim(args.T, ones, cfg, model).terminal
            err = float(np.max(np.abs(approx - ref)))
            errs.append(err)
            rows.append([str(n_terms), str(k), f"{err:.6e}"])
        slope = float(np.polyfit(np.log(ks), np.log(errs), 1)[0])
        slopes[n_terms] = slope
        print(f"n_terms={n_terms}: log-log slope {slope:+.3f} over k={list(ks)}")
    _write_csv(out_path, ["n_terms", "k", "max_abs_error"], rows)
    return 0


def cmd_validate(args) -> int:
    model = load_model(args.model, repair_zeros=not args.no_repair) \
        if args.model else three_regime_model(repair_zeros=not args.no_repair)
    report = validate_generator(model.generator, args.horizon)
    ok = report.ok
    print(f"generator check over [0, {args.horizon:g}]: {report}")
    if model.generator.constant:
        try:
            tp = transform(model)
        except ValueError as exc:
            print(f"transform: {exc}")
            print("violations found")
            return 2
        k_mat, _ = tp.at()
        a = model.generator.matrix
        n = model.n_regimes
        off = ~np.eye(n, dtype=bool)
        round_trip = np.exp(-k_mat[off]) / (n - 1) - a[off]
        rt_err = float(np.max(np.abs(round_trip)))
        print(f"transform round-trip max error: {rt_err:.3e}")
        ok &= rt_err < 1e-12
        from scipy.linalg import expm as _expm
        for t in (0.1, 1.0, 10.0):
            p = _expm(a * t)
            row_err = float(np.max(np.abs(p.sum(axis=1) - 1.0)))
            neg = float(p.min())
            print(f"transition matrix at t={t:g}: row-sum err {row_err:.2e}, "
                  f"min entry {neg:.2e}")
            ok &= row_err < 1e-10 and neg > -1e-10
    print("ok" if ok else "violations found")
    return 0 if ok else 2


def _split_floats(text: str) -> tuple[float, ...]:
    return tuple(float(v) for v in text.split(","))


def build_parser() -> argparse.ArgumentParser:
    ap = argparse.ArgumentParser(prog="regimepricer",
                                 description=__doc__.splitlines()[0])
    sub = ap.add_subparsers(dest="command", required=True)

    p = sub.add_parser("price", help="price an instrument across engines")
    p.add_argument("--config", help="run-config TOML; flags override")
    p.add_argument("--model", help="model TOML (default: bundled three-regime)")
    p.add_argument("--instrument", choices=["bond", "digital-barrier",
                                            "call-barrier", "vulnerable-call"])
    p.add_argument("--engines", help="comma list: series,ode,expm,mc")
    p.add_argument("--maturities", "--T", dest="maturities",
                   help="comma list of maturities in years")
    p.add_argument("--terms", type=int, help="series truncation M")
    p.add_argument("--steps", type=int, help="number of backward slices")
    p.add_argument("--step", type=float, help="backward slice length (years)")
    p.add_argument("--paths", type=int, help="Monte-Carlo path count")
    p.add_argument("--seed", type=int)
    p.add_argument("--barrier-level", type=float)
    p.add_argument("--barrier-direction", choices=["out", "in"])
    p.add_argument("--barrier-strike", type=float)
    p.add_argument("--spot", type=float)
    p.add_argument("--strike", type=float)
    p.add_argument("--put", action="store_true", default=None)
    p.add_argument("--lattice-step", type=float)
    p.add_argument("--lattice-scale", type=float)
    p.add_argument("--out", default="", help="output CSV (default stdout)")

    b = sub.add_parser("bench", help="timing grids")
    b.add_argument("--grid", choices=["full"], default="full")
    b.add_argument("--model")
    b.add_argument("--deltas", type=_split_floats)
    b.add_argument("--horizons", type=_split_floats)
    b.add_argument("--kernels", action="store_true",
                   help="compare compiled vs pure kernels instead")
    b.add_argument("--out", default="")

    c = sub.add_parser("converge", help="error-vs-k study against the ODE engine")
    c.add_argument("--model")
    c.add_argument("--terms", type=lambda s: tuple(int(v) for v in s.split(",")),
                   default=(2,))
    c.add_argument("--k-list", type=lambda s: tuple(int(v) for v in s.split(",")),
                   default=(2, 4, 8, 16, 32))
    c.add_argument("--T", type=float, default=1.0)
    c.add_argument("--out", default="")

    v = sub.add_parser("validate", help="invariant suite over a model file")
    v.add_argument("--model")
    v.add_argument("--horizon", type=float, default=50.0)
    v.add_argument("--no-repair", action="store_true",
                   help="do not floor zero off-diagonal rates")
    return ap


def _run_config_from_args(args) -> RunConfig:
    rc = RunConfig.from_file(args.config) if args.config else RunConfig()
    overrides = {
        "model": "model_path",
        "instrument": "instrument",
        "terms": "n_terms",
        "steps": "n_steps",
        "step": "step",
        "paths": "n_paths",
        "seed": "seed",
        "barrier_level": "barrier_level",
        "barrier_direction": "barrier_direction",
        "barrier_strike": "strike",
        "spot": "spot",
        "strike": "option_strike",
        "put": "put",
        "lattice_step": "lattice_step",
        "lattice_scale": "lattice_scale",
    }
    for arg_name, attr in overrides.items():
        val = getattr(args, arg_name, None)
        if val is not None:
            setattr(rc, attr, val)
    if args.engines is not None:
        rc.engines = tuple(args.engines.split(","))
    if args.maturities is not None:
        rc.maturities = _split_floats(args.maturities)
    if args.steps is not None:
        rc.step = None
    elif args.step is not None:
        rc.n_steps = None
    rc.validate()
    return rc


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    try:
        if args.command == "price":
            rc = _run_config_from_args(args)
            return cmd_price(rc, args.out)
        if args.command == "bench":
            return cmd_bench(args, args.out)
        if args.command == "converge":
            return cmd_converge(args, args.out)
        return cmd_validate(args)
    except (ValueError, FileNotFoundError, KeyError) as exc:
        print(f"config error: {exc}", file=sys.stderr)
        return 2
    except (ArithmeticError, RuntimeError) as exc:
        print(f"numeric failure: {exc}", file=sys.stderr)
        return 3


if __name__ == "__main__":
    sys.exit(main())
