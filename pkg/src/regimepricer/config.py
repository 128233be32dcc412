"""Model and run configuration files (TOML) and the bundled fixture."""
from __future__ import annotations

import sys
from dataclasses import dataclass, field
from importlib import resources
from pathlib import Path

import numpy as np

if sys.version_info >= (3, 11):
    import tomllib
else:
    import tomli as tomllib

from .model import ConstantGenerator, RegimeModel, floor_zero_rates

__all__ = ["model_from_dict", "load_model", "three_regime_model", "RunConfig"]


def model_from_dict(data: dict, repair_zeros: bool = True) -> RegimeModel:
    """Build a RegimeModel from parsed config data.

    Expects vectors ``short_rates``, ``hazards``, ``losses``, ``vols``
    (optionally ``drifts``) and a ``[generator]`` table with ``rows``.
    Zero off-diagonal rates are floored by default so the series
    transform stays defined; pass repair_zeros=False to keep them.
    """
    try:
        gen_rows = data["generator"]["rows"]
        gen = ConstantGenerator(np.asarray(gen_rows, dtype=float))
        if repair_zeros:
            gen = floor_zero_rates(gen)
        return RegimeModel(
            short_rates=np.asarray(data["short_rates"], dtype=float),
            hazards=np.asarray(data["hazards"], dtype=float),
            losses=np.asarray(data["losses"], dtype=float),
            vols=np.asarray(data["vols"], dtype=float),
            drifts=(np.asarray(data["drifts"], dtype=float)
                    if "drifts" in data else None),
            generator=gen,
        )
    except KeyError as exc:
        raise ValueError(f"model config missing field {exc.args[0]!r}") from None


def load_model(path: str | Path, repair_zeros: bool = True) -> RegimeModel:
    with open(path, "rb") as fh:
        data = tomllib.load(fh)
    return model_from_dict(data, repair_zeros)


def three_regime_model(short_rates=None, repair_zeros: bool = True) -> RegimeModel:
    """The bundled three-regime credit model, optionally with other rates."""
    ref = resources.files("regimepricer").joinpath("data/three_regime.toml")
    data = tomllib.loads(ref.read_text())
    model = model_from_dict(data, repair_zeros)
    if short_rates is not None:
        model = model.with_rates(short_rates)
    return model


_INSTRUMENTS = ("bond", "digital-barrier", "call-barrier", "vulnerable-call")
_ENGINES = ("series", "ode", "expm", "mc")


@dataclass
class RunConfig:
    """One batch pricing run: model, instrument, engines and knobs."""

    model_path: str = ""
    instrument: str = "bond"
    engines: tuple[str, ...] = ("series", "ode")
    maturities: tuple[float, ...] = (1.0,)
    output: str = ""
    seed: int = 0
    # series block
    n_terms: int = 2
    n_steps: int | None = None
    step: float | None = 0.1
    taylor_order: str | int = "exact"
    # mc block
    n_paths: int = 100_000
    antithetic: bool = False
    # barrier block
    barrier_level: float = 0.2
    barrier_direction: str = "out"
    strike: float = 0.075
    # option block
    spot: float = 1.0
    option_strike: float = 1.0
    put: bool = False
    lattice_step: float = 0.0625
    lattice_scale: float = 1.0

    def validate(self) -> None:
        if self.instrument not in _INSTRUMENTS:
            raise ValueError(f"unknown instrument {self.instrument!r}; "
                             f"choose from {', '.join(_INSTRUMENTS)}")
        if not self.engines:
            raise ValueError("engine set must be nonempty")
        for e in self.engines:
            if e not in _ENGINES:
                raise ValueError(f"unknown engine {e!r}; "
                                 f"choose from {', '.join(_ENGINES)}")
        if self.instrument in ("digital-barrier", "call-barrier", "vulnerable-call"):
            bad = set(self.engines) & {"ode", "expm"}
            if bad:
                raise ValueError(
                    f"engine(s) {', '.join(sorted(bad))} support terminal claims "
                    f"only, not {self.instrument}")
        if not self.maturities or any(t <= 0 for t in self.maturities):
            raise ValueError("maturities must be positive")
        if (self.n_steps is None) == (self.step is None):
            raise ValueError("set exactly one of n_steps / step")

    @classmethod
    def from_file(cls, path: str | Path) -> "RunConfig":
        with open(path, "rb") as fh:
            data = tomllib.load(fh)
        cfg = cls()
        flat = dict(data)
        for block in ("series", "mc", "barrier", "option"):
            flat.update({f"{block}.{k}": v for k, v in flat.pop(block, {}).items()})
        mapping = {
            "model": "model_path",
            "series.n_terms": "n_terms",
            "series.n_steps": "n_steps",
            "series.step": "step",
            "series.taylor_order": "taylor_order",
            "mc.n_paths": "n_paths",
            "mc.antithetic": "antithetic",
            "mc.seed": "seed",
            "barrier.level": "barrier_level",
            "barrier.direction": "barrier_direction",
            "barrier.strike": "strike",
            "option.spot": "spot",
            "option.strike": "option_strike",
            "option.put": "put",
            "option.lattice_step": "lattice_step",
            "option.lattice_scale": "lattice_scale",
        }
        for key, value in flat.items():
            attr = mapping.get(key, key)
            if not hasattr(cfg, attr):
                raise ValueError(f"unknown config key {key!r}")
            if attr == "engines":
                value = tuple(value)
            elif attr == "maturities":
                value = tuple(float(t) for t in value)
            setattr(cfg, attr, value)
        if cfg.n_steps is not None and "series.step" not in flat and "step" not in flat:
            cfg.step = None
        return cfg
