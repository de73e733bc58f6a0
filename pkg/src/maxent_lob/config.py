"""TOML experiment files: schema checks, canned configs and overrides."""
from __future__ import annotations

import os
import sys
from dataclasses import dataclass, field
from importlib import resources
from pathlib import Path
from typing import Optional, Union

from .dynamics import MODEL_KINDS, SamplingConfig, SimConfig
from .errors import ConfigError, InvalidInputError
from .microprice import Discretization, ToyModelConfig
from .stochastics import DistributionSpec, RngSpec

if sys.version_info >= (3, 11):
    import tomllib
else:
    import tomli as tomllib

__all__ = ["ExperimentConfig", "load_config", "parse_config", "canned_names", "canned_path", "ENV_PREFIX", "env_overrides"]

ENV_PREFIX = "MAXENT_LOB_"
KINDS = ("simulation", "sampling", "impact", "microprice")

_TOP = {"kind", "runs", "seed", "threads", "format", "model", "baseline", "sampling", "impact", "toy", "discretization", "description"}
_MODEL = {"model", "initial_price", "beta", "sigma", "eta", "mu", "steps", "dt", "tick", "imbalance", "spread"}
_SAMPLING = {"mode", "beta", "eta", "mu_tilde", "sigma_tilde", "n", "spread_tick", "round_decimals", "imbalance", "spread"}
_IMPACT = {"spread", "beta", "grid_min", "grid_max", "grid_points"}
_TOY = {"alpha", "epsilon_perturb", "tick", "events", "lattice", "sample_every", "initial_imbalance"}
_DISC = {"buckets", "spread_states", "iterations", "symmetrize", "tick"}


@dataclass
class ExperimentConfig:
    """Validated experiment: exactly one payload is set, matching ``kind``."""

    kind: str
    runs: int = 1
    seed: int = 0
    threads: int = 1
    format: str = "json"
    description: str = ""
    sim: Optional[SimConfig] = None
    baseline: Optional[SimConfig] = None
    sampling: Optional[SamplingConfig] = None
    impact: dict = field(default_factory=dict)
    toy: Optional[ToyModelConfig] = None
    disc: Optional[Discretization] = None
    iterations: int = 6


def _check_keys(table: dict, allowed: set, where: str):
    if not isinstance(table, dict):
        raise ConfigError(f"[{where}] must be a table")
    unknown = set(table) - allowed
    if unknown:
        raise ConfigError(f"unknown key(s) in [{where}]: {', '.join(sorted(unknown))}")


def _dist(table, where: str) -> DistributionSpec:
    if not isinstance(table, dict):
        raise ConfigError(f"[{where}] must be a table")
    try:
        return DistributionSpec.from_mapping(table)
    except InvalidInputError as exc:
        raise ConfigError(f"[{where}]: {exc}") from exc


def _sim(table: dict, where: str, rng: RngSpec, inherit: Optional[SimConfig] = None) -> SimConfig:
    _check_keys(table, _MODEL, where)
    kw = {k: v for k, v in table.items() if k not in ("imbalance", "spread")}
    if inherit is not None:
        kw.setdefault("steps", inherit.steps)
        kw.setdefault("dt", inherit.dt)
        kw.setdefault("initial_price", inherit.initial_price)
    if "imbalance" in table:
        kw["imbalance"] = _dist(table["imbalance"], f"{where}.imbalance")
    if "spread" in table:
        kw["spread"] = _dist(table["spread"], f"{where}.spread")
    if kw.get("model", "boltzmann_const_spread") not in MODEL_KINDS:
        raise ConfigError(f"[{where}] model must be one of {MODEL_KINDS}")
    try:
        return SimConfig(rng=rng, **kw)
    except (InvalidInputError, TypeError) as exc:
        raise ConfigError(f"[{where}]: {exc}") from exc


def parse_config(data: dict, overrides: Optional[dict] = None) -> ExperimentConfig:
    """Build a validated config from a parsed TOML mapping.

    ``overrides`` (runs, seed, threads, format, steps, beta, sigma, eta, dt)
    replace file values; ``None`` entries are ignored.
    """
    data = dict(data)
    _check_keys(data, _TOP, "top level")
    ov = {k: v for k, v in (overrides or {}).items() if v is not None}
    kind = data.get("kind")
    if kind not in KINDS:
        raise ConfigError(f"kind must be one of {KINDS}, got {kind!r}")
    exp = ExperimentConfig(kind=kind)
    for key in ("runs", "seed", "threads"):
        val = ov.get(key, data.get(key, getattr(exp, key)))
        if isinstance(val, bool) or not isinstance(val, int) or val < (0 if key == "seed" else 1):
            raise ConfigError(f"{key} must be a {'non-negative' if key == 'seed' else 'positive'} integer")
        setattr(exp, key, val)
    exp.format = ov.get("format", data.get("format", "json"))
    if exp.format not in ("json", "csv"):
        raise ConfigError("format must be 'json' or 'csv'")
    exp.description = str(data.get("description", ""))
    rng = RngSpec(exp.seed, 0)

    if kind == "simulation":
        if "model" not in data:
            raise ConfigError("simulation config needs a [model] table")
        model = dict(data["model"])
        for key in ("steps", "beta", "sigma", "eta", "dt"):
            if key in ov:
                model[key] = ov[key]
        exp.sim = _sim(model, "model", rng)
        if "baseline" in data:
            base = dict(data["baseline"])
            if "steps" in ov or "dt" in ov:
                base.pop("steps", None)
                base.pop("dt", None)
            exp.baseline = _sim(base, "baseline", rng, inherit=exp.sim)
    elif kind == "sampling":
        if "sampling" not in data:
            raise ConfigError("sampling config needs a [sampling] table")
        table = dict(data["sampling"])
        _check_keys(table, _SAMPLING, "sampling")
        for key in ("beta", "eta"):
            if key in ov:
                table[key] = ov[key]
        if "steps" in ov:
            table["n"] = ov["steps"]
        kw = {k: v for k, v in table.items() if k not in ("imbalance", "spread")}
        for key in ("imbalance", "spread"):
            if key in table:
                kw[key] = _dist(table[key], f"sampling.{key}")
        try:
            exp.sampling = SamplingConfig(rng=rng, **kw)
        except (InvalidInputError, TypeError) as exc:
            raise ConfigError(f"[sampling]: {exc}") from exc
    elif kind == "impact":
        table = dict(data.get("impact", {}))
        _check_keys(table, _IMPACT, "impact")
        if "beta" in ov:
            table["beta"] = ov["beta"]
        beta = table.get("beta", 1.0)
        betas = list(beta) if isinstance(beta, list) else [beta]
        exp.impact = {
            "spread": float(table.get("spread", 0.02)),
            "beta": [float(b) for b in betas],
            "grid_min": float(table.get("grid_min", -0.5)),
            "grid_max": float(table.get("grid_max", 0.5)),
            "grid_points": int(table.get("grid_points", 101)),
        }
        if exp.impact["grid_points"] < 2 or not -0.5 <= exp.impact["grid_min"] < exp.impact["grid_max"] <= 0.5:
            raise ConfigError("impact grid must satisfy -1/2 <= grid_min < grid_max <= 1/2 with >= 2 points")
    else:
        toy = dict(data.get("toy", {}))
        _check_keys(toy, _TOY, "toy")
        disc = dict(data.get("discretization", {}))
        _check_keys(disc, _DISC, "discretization")
        try:
            exp.toy = ToyModelConfig(rng=rng, **toy)
            exp.disc = Discretization(
                disc.get("buckets", 10),
                tuple(disc.get("spread_states", [1])),
                disc.get("symmetrize", True),
                disc.get("tick", exp.toy.tick),
            )
        except (InvalidInputError, TypeError) as exc:
            raise ConfigError(str(exc)) from exc
        exp.iterations = int(disc.get("iterations", 6))
    return exp


def canned_names() -> list:
    root = resources.files("maxent_lob") / "configs"
    return sorted(p.name[:-5] for p in root.iterdir() if p.name.endswith(".toml"))


def canned_path(name: str):
    return resources.files("maxent_lob") / "configs" / f"{name}.toml"


def read_config_text(name_or_path: Union[str, os.PathLike]) -> str:
    """A bare name selects a shipped config; anything else is a file path."""
    path = Path(name_or_path)
    if path.suffix == "" and str(name_or_path) in canned_names():
        return canned_path(str(name_or_path)).read_text(encoding="utf-8")
    if not path.is_file():
        raise ConfigError(f"no config file or canned config named {str(name_or_path)!r}")
    return path.read_text(encoding="utf-8")


def load_config(name_or_path, overrides: Optional[dict] = None) -> ExperimentConfig:
    text = read_config_text(name_or_path)
    try:
        data = tomllib.loads(text)
    except tomllib.TOMLDecodeError as exc:
        raise ConfigError(f"invalid TOML in {name_or_path}: {exc}") from exc
    return parse_config(data, overrides)


_ENV_TYPES = {
    "config": str,
    "seed": int,
    "runs": int,
    "steps": int,
    "threads": int,
    "beta": float,
    "sigma": float,
    "eta": float,
    "dt": float,
    "format": str,
}


def env_overrides(environ=None) -> dict:
    """Values from ``MAXENT_LOB_<NAME>`` variables, converted to the flag's type."""
    environ = os.environ if environ is None else environ
    out = {}
    for key, typ in _ENV_TYPES.items():
        raw = environ.get(ENV_PREFIX + key.upper())
        if raw is None or raw == "":
            continue
        try:
            out[key] = typ(raw)
        except ValueError as exc:
            raise ConfigError(f"{ENV_PREFIX}{key.upper()}={raw!r} is not a valid {typ.__name__}") from exc
    return out
