"""Seeded sampling, moment fitting and summary statistics."""
from __future__ import annotations

import math
from dataclasses import asdict, dataclass
from typing import Optional, Union

import numpy as np

from .errors import FitInfeasibleError, InvalidInputError, UndefinedStatisticError

__all__ = [
    "DistributionSpec",
    "RngSpec",
    "SummaryStats",
    "as_generator",
    "sample",
    "beta_from_moments",
    "gamma_from_moments",
    "fit_beta_mom",
    "fit_gamma_mom",
    "excess_kurtosis",
    "silverman_bandwidth",
    "gaussian_kde",
    "tick_ceiling",
    "round_changes",
]

_PARAM_NAMES = {
    "beta": ("a", "b"),
    "gamma": ("shape", "scale"),
    "constant": ("value",),
    "normal": ("mean", "stddev"),
}


@dataclass(frozen=True)
class DistributionSpec:
    """Parametric family used for imbalance, spread and noise draws.

    Gamma uses the shape/scale parametrisation.
    """

    kind: str
    params: tuple

    def __post_init__(self):
        if self.kind not in _PARAM_NAMES:
            raise InvalidInputError(f"unknown distribution kind {self.kind!r}")
        params = tuple(float(p) for p in self.params)
        object.__setattr__(self, "params", params)
        if len(params) != len(_PARAM_NAMES[self.kind]):
            raise InvalidInputError(f"{self.kind} takes parameters {_PARAM_NAMES[self.kind]}")
        if not all(math.isfinite(p) for p in params):
            raise InvalidInputError("distribution parameters must be finite")
        if self.kind in ("beta", "gamma") and min(params) <= 0:
            raise InvalidInputError(f"{self.kind} parameters must be > 0, got {params}")
        if self.kind == "normal" and params[1] <= 0:
            raise InvalidInputError("normal stddev must be > 0")

    @classmethod
    def beta(cls, a, b):
        return cls("beta", (a, b))

    @classmethod
    def gamma(cls, shape, scale):
        return cls("gamma", (shape, scale))

    @classmethod
    def constant(cls, value):
        return cls("constant", (value,))

    @classmethod
    def normal(cls, mean=0.0, stddev=1.0):
        return cls("normal", (mean, stddev))

    @classmethod
    def from_mapping(cls, data: dict) -> "DistributionSpec":
        data = dict(data)
        kind = data.pop("kind", None)
        if kind not in _PARAM_NAMES:
            raise InvalidInputError(f"unknown distribution kind {kind!r}")
        names = _PARAM_NAMES[kind]
        extra = set(data) - set(names)
        if extra or set(names) - set(data):
            raise InvalidInputError(f"{kind} needs exactly keys {names}, got {sorted(data)}")
        return cls(kind, tuple(data[n] for n in names))

    def to_mapping(self) -> dict:
        return {"kind": self.kind, **dict(zip(_PARAM_NAMES[self.kind], self.params))}

    @property
    def mean(self) -> float:
        p = self.params
        return {
            "beta": lambda: p[0] / (p[0] + p[1]),
            "gamma": lambda: p[0] * p[1],
            "constant": lambda: p[0],
            "normal": lambda: p[0],
        }[self.kind]()

    @property
    def variance(self) -> float:
        p = self.params
        if self.kind == "beta":
            a, b = p
            return a * b / ((a + b) ** 2 * (a + b + 1))
        if self.kind == "gamma":
            return p[0] * p[1] ** 2
        if self.kind == "normal":
            return p[1] ** 2
        return 0.0


@dataclass(frozen=True)
class RngSpec:
    """Reproducible random stream addressed by ``(master_seed, stream_index)``.

    Streams are derived with ``numpy.random.SeedSequence`` spawn keys and fed
    to the counter-based Philox generator, so distinct indices give
    statistically independent streams and any run can be regenerated on its
    own, on any thread.
    """

    master_seed: int = 0
    stream_index: int = 0

    def __post_init__(self):
        if not 0 <= int(self.master_seed) < 2**64:
            raise InvalidInputError("master_seed must fit in an unsigned 64-bit integer")
        if int(self.stream_index) < 0:
            raise InvalidInputError("stream_index must be non-negative")

    def _seed_sequence(self, *subkey: int) -> np.random.SeedSequence:
        return np.random.SeedSequence(int(self.master_seed), spawn_key=(int(self.stream_index), *subkey))

    def generator(self, *subkey: int) -> np.random.Generator:
        """Generator for this stream; ``subkey`` selects an independent sub-stream."""
        return np.random.Generator(np.random.Philox(self._seed_sequence(*subkey)))

    def child(self, index: int) -> "RngSpec":
        return RngSpec(self.master_seed, index)


RngLike = Union[RngSpec, np.random.Generator, int, None]


def as_generator(rng: RngLike, *subkey: int) -> np.random.Generator:
    if isinstance(rng, np.random.Generator):
        return rng
    if isinstance(rng, RngSpec):
        return rng.generator(*subkey)
    if rng is None or isinstance(rng, (int, np.integer)):
        return RngSpec(0 if rng is None else int(rng)).generator(*subkey)
    raise InvalidInputError(f"cannot build a random generator from {type(rng).__name__}")


@dataclass(frozen=True)
class SummaryStats:
    count: int
    mean: float
    stddev: float
    min: float
    max: float
    excess_kurtosis: Optional[float] = None

    @classmethod
    def from_samples(cls, samples) -> "SummaryStats":
        """Population (``ddof=0``) moments; kurtosis is ``None`` when undefined."""
        x = np.asarray(samples, float).ravel()
        if x.size == 0:
            raise UndefinedStatisticError("summary of an empty sample")
        try:
            kurt = excess_kurtosis(x)
        except UndefinedStatisticError:
            kurt = None
        # float rounding may put the mean a hair outside [min, max]
        lo, hi = float(x.min()), float(x.max())
        mean = min(max(float(x.mean()), lo), hi)
        return cls(int(x.size), mean, float(x.std()), lo, hi, kurt)

    def to_dict(self) -> dict:
        return asdict(self)


def sample(dist: DistributionSpec, rng: RngLike, n: int) -> np.ndarray:
    if int(n) != n or n < 0:
        raise InvalidInputError("sample size must be a non-negative integer")
    n = int(n)
    if dist.kind == "constant":
        return np.full(n, dist.params[0])
    gen = as_generator(rng)
    if dist.kind == "beta":
        return gen.beta(*dist.params, size=n)
    if dist.kind == "gamma":
        return gen.gamma(*dist.params, size=n)
    return gen.normal(*dist.params, size=n)


def beta_from_moments(mean: float, variance: float) -> DistributionSpec:
    if not 0 < mean < 1:
        raise FitInfeasibleError(f"Beta mean must lie in (0, 1), got {mean}")
    if not 0 < variance < mean * (1 - mean):
        raise FitInfeasibleError(
            f"variance {variance} outside (0, mean(1-mean)={mean * (1 - mean)}) for a Beta law"
        )
    concentration = mean * (1 - mean) / variance - 1
    return DistributionSpec.beta(mean * concentration, (1 - mean) * concentration)


def gamma_from_moments(mean: float, variance: float) -> DistributionSpec:
    if mean <= 0:
        raise FitInfeasibleError("Gamma mean must be positive")
    if variance <= 0:
        raise FitInfeasibleError("Gamma fit needs a positive variance")
    return DistributionSpec.gamma(mean**2 / variance, variance / mean)


def _as_samples(samples, minimum: int = 2) -> np.ndarray:
    x = np.asarray(samples, float).ravel()
    if x.size < minimum:
        raise FitInfeasibleError(f"need at least {minimum} samples, got {x.size}")
    if not np.all(np.isfinite(x)):
        raise InvalidInputError("samples must be finite")
    return x


def fit_beta_mom(samples) -> DistributionSpec:
    """Method-of-moments Beta fit from the sample mean and (ddof=0) variance."""
    x = _as_samples(samples)
    if np.any((x <= 0) | (x >= 1)):
        raise InvalidInputError("Beta samples must lie strictly inside (0, 1)")
    return beta_from_moments(float(x.mean()), _variance(x))


def fit_gamma_mom(samples) -> DistributionSpec:
    """Method-of-moments Gamma fit: shape ``m^2/v``, scale ``v/m``."""
    x = _as_samples(samples)
    if np.any(x <= 0):
        raise InvalidInputError("Gamma samples must be strictly positive")
    return gamma_from_moments(float(x.mean()), _variance(x))


def _variance(x: np.ndarray) -> float:
    # a constant sample must give exactly zero, not rounding noise
    return 0.0 if np.ptp(x) == 0 else float(x.var())


def excess_kurtosis(samples, axis: int = -1):
    """Fisher kurtosis ``m4 / m2**2 - 3`` with biased (1/n) central moments.

    Accepts a 2-d array and reduces along ``axis``, which is how batch runs
    compute one value per run.
    """
    x = np.asarray(samples, float)
    if x.ndim == 0:
        raise UndefinedStatisticError("kurtosis of a scalar")
    n = x.shape[axis]
    if n < 4:
        raise UndefinedStatisticError(f"kurtosis needs at least 4 observations, got {n}")
    d = x - x.mean(axis=axis, keepdims=True)
    d2 = d * d
    m2 = d2.mean(axis=axis)
    m4 = (d2 * d2).mean(axis=axis)
    spread_ = np.ptp(x, axis=axis)
    if np.any(spread_ == 0) or np.any(m2 <= 0):
        raise UndefinedStatisticError("kurtosis undefined for zero variance")
    out = m4 / (m2 * m2) - 3.0
    return float(out) if np.ndim(out) == 0 else out


def silverman_bandwidth(samples) -> float:
    """``0.9 min(sd, IQR/1.34) n^(-1/5)``; falls back to ``sd`` when the IQR is zero."""
    x = np.asarray(samples, float).ravel()
    if x.size < 2:
        raise UndefinedStatisticError("KDE needs at least two samples")
    sd = float(x.std(ddof=1))
    if sd == 0 or not math.isfinite(sd):
        raise UndefinedStatisticError("KDE undefined for a degenerate sample")
    q75, q25 = np.percentile(x, [75, 25])
    iqr = (q75 - q25) / 1.34
    scale = min(sd, iqr) if iqr > 0 else sd
    return 0.9 * scale * x.size ** (-0.2)


def gaussian_kde(samples, eval_points, bandwidth: Optional[float] = None, chunk: int = 2048) -> np.ndarray:
    x = np.asarray(samples, float).ravel()
    h = silverman_bandwidth(x) if bandwidth is None else float(bandwidth)
    if h <= 0:
        raise InvalidInputError("bandwidth must be positive")
    pts = np.atleast_1d(np.asarray(eval_points, float))
    flat = pts.ravel()
    out = np.empty(flat.size)
    norm = 1.0 / (x.size * h * math.sqrt(2 * math.pi))
    for start in range(0, flat.size, chunk):
        u = (flat[start:start + chunk, None] - x[None, :]) / h
        out[start:start + chunk] = np.exp(-0.5 * u * u).sum(axis=1) * norm
    return out.reshape(pts.shape)


def tick_ceiling(value, tick: float = 0.01):
    """Round a raw draw up to a whole number of ticks: ``ceil(value) * tick``.

    The draw is in tick units (a Gamma(1, 1) draw of 1.3 means 1.3 ticks),
    so the result is a positive multiple of ``tick``.
    """
    v = np.asarray(value, float)
    if np.any(~(v > 0)):
        raise InvalidInputError("tick ceiling needs strictly positive values")
    if tick <= 0:
        raise InvalidInputError("tick must be positive")
    out = np.ceil(v) * tick
    return float(out) if out.ndim == 0 else out


def round_changes(values, decimals: int = 2):
    """Round half away from zero, treating inputs as decimal literals.

    The magnitude is snapped to 9 decimals after scaling so that binary
    representation error (``2.675 -> 2.67499999...``) does not flip a tie.
    """
    v = np.asarray(values, float)
    factor = 10.0**decimals
    scaled = np.round(np.abs(v) * factor, 9)
    out = np.copysign(np.floor(scaled + 0.5) / factor, v)
    out = out + 0.0  # turn -0.0 into 0.0
    return float(out) if out.ndim == 0 else out
