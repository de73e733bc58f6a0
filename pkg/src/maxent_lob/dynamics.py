"""Imbalance-driven price simulators, baselines and the batch Monte Carlo harness.

All simulators draw the imbalance, spread and Gaussian noise from separate
sub-streams of one :class:`RngSpec`. Two configurations run with the same
``RngSpec`` therefore see the same noise sequence, which is what the paired
model comparisons rely on.
"""
from __future__ import annotations

import math
import warnings
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field, replace
from typing import Callable, Optional, Union

import numpy as np
from scipy.special import expit

from .errors import InfeasibleDriftError, InvalidInputError, NumericFailureError
from .stochastics import (
    DistributionSpec,
    RngLike,
    RngSpec,
    SummaryStats,
    as_generator,
    excess_kurtosis,
    round_changes,
    sample,
    tick_ceiling,
)

__all__ = [
    "MODEL_KINDS",
    "SimConfig",
    "SamplingConfig",
    "PricePath",
    "StepMoments",
    "BatchResult",
    "ImbalanceRangeWarning",
    "step_moments",
    "simulate_biased_walk",
    "simulate",
    "simulate_paired",
    "drift_match_theta",
    "beta_params_for_mean",
    "sample_price_changes_const_spread",
    "sample_price_changes_varying_spread",
    "sample_changes",
    "batch_run",
]

MODEL_KINDS = ("bachelier", "boltzmann_const_spread", "boltzmann_varying_spread", "gbm_boltzmann")

# sub-stream keys; fixed so that paired runs share noise
NOISE, IMBALANCE, SPREAD, WALK = 0, 1, 2, 3


class ImbalanceRangeWarning(UserWarning):
    """A drift-matched centered imbalance fell outside [-1/2, 1/2]."""


@dataclass(frozen=True)
class StepMoments:
    drift: float
    vol: float
    epsilon: float


@dataclass(frozen=True)
class SimConfig:
    """One discretised price-path experiment.

    ``sigma`` scales the constant-spread, Bachelier and GBM models; ``eta``
    scales the sampled spread in the varying-spread model. ``dt`` defaults to
    ``1 / steps``. Imbalance draws are bid imbalances ``q``; the models use
    ``theta = q - 1/2``.
    """

    model: str = "boltzmann_const_spread"
    initial_price: float = 10.0
    beta: float = 0.0
    sigma: float = 0.0
    eta: float = 0.0
    mu: float = 0.0
    steps: int = 390
    dt: Optional[float] = None
    imbalance: DistributionSpec = field(default_factory=lambda: DistributionSpec.constant(0.5))
    spread: DistributionSpec = field(default_factory=lambda: DistributionSpec.gamma(1.0, 1.0))
    tick: float = 0.01
    rng: RngSpec = field(default_factory=RngSpec)

    def __post_init__(self):
        if self.model not in MODEL_KINDS:
            raise InvalidInputError(f"model must be one of {MODEL_KINDS}, got {self.model!r}")
        if int(self.steps) != self.steps or self.steps < 1:
            raise InvalidInputError("steps must be a positive integer")
        if self.dt is not None and not self.dt > 0:
            raise InvalidInputError("dt must be positive")
        if self.sigma < 0 or self.eta < 0 or self.beta < 0:
            raise InvalidInputError("sigma, eta and beta must be non-negative")
        if not self.tick > 0:
            raise InvalidInputError("tick must be positive")
        if self.model == "gbm_boltzmann" and self.initial_price <= 0:
            raise InvalidInputError("GBM needs a positive initial price")

    @property
    def step_dt(self) -> float:
        return 1.0 / self.steps if self.dt is None else float(self.dt)


@dataclass(frozen=True)
class SamplingConfig:
    """Direct sampler of price changes without a time grid.

    ``mode="const_spread"``: ``eta mu_t tanh(beta theta) + eta sigma_t eps / cosh(beta theta)``;
    ``mode="varying_spread"``: ``S tanh(beta theta) + eta S eps / cosh(beta theta)``.
    Spread draws are rounded to the nearest ``spread_tick`` when it is set.
    """

    mode: str = "varying_spread"
    beta: float = 1.0
    eta: float = 1.0
    mu_tilde: float = 0.0
    sigma_tilde: float = 1.0
    n: int = 8000
    imbalance: DistributionSpec = field(default_factory=lambda: DistributionSpec.beta(4.5, 4.5))
    spread: DistributionSpec = field(default_factory=lambda: DistributionSpec.gamma(4.88, 0.03))
    spread_tick: Optional[float] = None
    round_decimals: Optional[int] = None
    rng: RngSpec = field(default_factory=RngSpec)

    def __post_init__(self):
        if self.mode not in ("const_spread", "varying_spread"):
            raise InvalidInputError("mode must be 'const_spread' or 'varying_spread'")
        if int(self.n) != self.n or self.n < 1:
            raise InvalidInputError("n must be a positive integer")
        if self.beta < 0 or self.eta < 0:
            raise InvalidInputError("beta and eta must be non-negative")


@dataclass
class PricePath:
    """Simulated path plus the drawn inputs, kept for audits and paired checks.

    ``increments`` is ``np.diff(prices)`` so the two always agree exactly.
    """

    prices: np.ndarray
    increments: np.ndarray
    theta: Optional[np.ndarray] = None
    spread: Optional[np.ndarray] = None
    noise: Optional[np.ndarray] = None
    dt: float = 1.0

    @property
    def terminal(self) -> float:
        return float(self.prices[-1])


def step_moments(epsilon, beta, theta) -> StepMoments:
    """Mean and standard deviation of one ``+-epsilon`` biased step."""
    if np.any(np.asarray(epsilon) < 0):
        raise InvalidInputError("epsilon must be non-negative")
    x = np.multiply(beta, theta)
    return StepMoments(np.multiply(epsilon, np.tanh(x)), np.divide(epsilon, np.cosh(x)), epsilon)


def simulate_biased_walk(epsilon: float, beta: float, theta_seq, rng: RngLike, initial_price: float = 0.0) -> PricePath:
    """Walk that moves ``+epsilon`` with probability ``e^{bt}/(e^{bt}+e^{-bt})``, else ``-epsilon``."""
    if epsilon < 0 or beta < 0:
        raise InvalidInputError("epsilon and beta must be non-negative")
    theta = np.asarray(theta_seq, float)
    p_up = expit(2.0 * beta * theta)
    u = as_generator(rng, WALK).random(theta.size)
    signs = np.where(u < p_up, 1.0, -1.0)
    prices = np.concatenate(([initial_price], initial_price + np.cumsum(signs * epsilon)))
    return PricePath(prices, np.diff(prices), theta=theta, noise=signs)


def _draw_inputs(config: SimConfig):
    n = int(config.steps)
    theta = None
    spread = None
    if config.model != "bachelier":
        theta = sample(config.imbalance, config.rng.generator(IMBALANCE), n) - 0.5
    if config.model == "boltzmann_varying_spread":
        spread = tick_ceiling(sample(config.spread, config.rng.generator(SPREAD), n), config.tick)
    z = config.rng.generator(NOISE).standard_normal(n)
    return theta, spread, z


def _coefficients(config: SimConfig, theta, spread):
    """Per-step drift and diffusion coefficients, before the dt scaling."""
    if config.model == "bachelier":
        return config.mu, config.sigma
    x = config.beta * theta
    th, sech = np.tanh(x), 1.0 / np.cosh(x)
    if config.model == "boltzmann_const_spread":
        return config.mu + config.sigma * th, config.sigma * sech
    if config.model == "boltzmann_varying_spread":
        scale = config.eta * spread
        return config.mu + scale * th, scale * sech
    return config.mu + config.sigma * th, config.sigma * sech


def simulate(config: SimConfig) -> PricePath:
    """Euler discretisation of the configured model.

    Arithmetic models step ``a_n dt + b_n sqrt(dt) Z_n``; the GBM variant
    multiplies that return by the current price. Prices are not clamped.
    """
    dt = config.step_dt
    theta, spread, z = _draw_inputs(config)
    drift, diffusion = _coefficients(config, theta, spread)
    shocks = drift * dt + diffusion * (math.sqrt(dt) * z)
    shocks = np.broadcast_to(shocks, z.shape)
    with np.errstate(over="ignore", invalid="ignore"):
        if config.model == "gbm_boltzmann":
            prices = config.initial_price * np.concatenate(([1.0], np.cumprod(1.0 + shocks)))
        else:
            prices = config.initial_price + np.concatenate(([0.0], np.cumsum(shocks)))
    if not np.all(np.isfinite(prices)):
        raise NumericFailureError("simulated path contains non-finite prices")
    return PricePath(prices, np.diff(prices), theta=theta, spread=spread, noise=z, dt=dt)


def simulate_paired(config_a: SimConfig, config_b: SimConfig, rng: Optional[RngSpec] = None):
    """Run two models on one set of random streams (same ``Z_n``)."""
    if config_a.steps != config_b.steps or config_a.step_dt != config_b.step_dt:
        raise InvalidInputError("paired simulations need identical steps and dt")
    rng = config_a.rng if rng is None else rng
    return simulate(replace(config_a, rng=rng)), simulate(replace(config_b, rng=rng))


def drift_match_theta(beta: float, mu: float, sigma: float) -> float:
    """Centered imbalance whose tanh-drift reproduces ``mu``: ``artanh(mu/sigma)/beta``."""
    if not beta > 0:
        raise InvalidInputError("drift matching needs beta > 0")
    if not sigma > 0 or abs(mu) >= sigma:
        raise InfeasibleDriftError(f"|mu| must be < sigma (mu={mu}, sigma={sigma})")
    theta = math.atanh(mu / sigma) / beta
    if abs(theta) > 0.5:
        warnings.warn(f"matched theta {theta:.6g} is outside [-1/2, 1/2]", ImbalanceRangeWarning, stacklevel=2)
    return theta


def beta_params_for_mean(target_mean: float, concentration: float) -> DistributionSpec:
    """Beta law with the given mean and ``a + b = concentration``."""
    if not 0 < target_mean < 1:
        raise InvalidInputError("target mean must lie in (0, 1)")
    if not concentration > 0:
        raise InvalidInputError("concentration must be positive")
    return DistributionSpec.beta(target_mean * concentration, (1 - target_mean) * concentration)


def sample_price_changes_const_spread(mu_tilde, sigma_tilde, beta, eta, theta_seq, rng: RngLike) -> np.ndarray:
    theta = np.asarray(theta_seq, float)
    eps = as_generator(rng, NOISE).standard_normal(theta.size)
    x = beta * theta
    return eta * mu_tilde * np.tanh(x) + eta * sigma_tilde * eps / np.cosh(x)


def sample_price_changes_varying_spread(beta, eta, spread_seq, theta_seq, rng: RngLike) -> np.ndarray:
    theta = np.asarray(theta_seq, float)
    s = np.asarray(spread_seq, float)
    if s.shape != theta.shape:
        raise InvalidInputError("spread and theta sequences must have the same length")
    eps = as_generator(rng, NOISE).standard_normal(theta.size)
    x = beta * theta
    return s * np.tanh(x) + eta * s * eps / np.cosh(x)


def sample_changes(config: SamplingConfig) -> np.ndarray:
    rng = config.rng
    theta = sample(config.imbalance, rng.generator(IMBALANCE), config.n) - 0.5
    if config.mode == "const_spread":
        out = sample_price_changes_const_spread(
            config.mu_tilde, config.sigma_tilde, config.beta, config.eta, theta, rng
        )
    else:
        s = sample(config.spread, rng.generator(SPREAD), config.n)
        if config.spread_tick:
            s = np.maximum(np.round(s / config.spread_tick), 1.0) * config.spread_tick
        out = sample_price_changes_varying_spread(config.beta, config.eta, s, theta, rng)
    if config.round_decimals is not None:
        out = round_changes(out, config.round_decimals)
    return out


@dataclass
class RunStats:
    kurtosis: np.ndarray
    increment_mean: np.ndarray
    increment_std: np.ndarray
    terminal: Optional[np.ndarray]

    def summary(self) -> dict:
        out = {
            "kurtosis": SummaryStats.from_samples(self.kurtosis),
            "increment_mean": SummaryStats.from_samples(self.increment_mean),
            "increment_std": SummaryStats.from_samples(self.increment_std),
        }
        if self.terminal is not None:
            out["terminal_price"] = SummaryStats.from_samples(self.terminal)
        return out


@dataclass
class BatchResult:
    """Per-run statistics (index = run = RNG stream) and their aggregates.

    ``baseline`` and ``increment_correlation`` are filled for paired batches.
    """

    runs: int
    master_seed: int
    model: RunStats
    baseline: Optional[RunStats] = None
    increment_correlation: Optional[np.ndarray] = None

    def summary(self) -> dict:
        out = {"runs": self.runs, "master_seed": self.master_seed, "model": self.model.summary()}
        if self.baseline is not None:
            out["baseline"] = self.baseline.summary()
            out["increment_correlation"] = SummaryStats.from_samples(self.increment_correlation)
        return out


ExperimentConfig = Union[SimConfig, SamplingConfig]


def _run_once(config: ExperimentConfig, baseline: Optional[SimConfig], rng: RngSpec):
    if isinstance(config, SamplingConfig):
        inc = sample_changes(replace(config, rng=rng))
        return inc, None, None, None
    path = simulate(replace(config, rng=rng))
    if baseline is None:
        return path.increments, path.terminal, None, None
    base = simulate(replace(baseline, rng=rng))
    return path.increments, path.terminal, base.increments, base.terminal


def _stats(incs: list, terminals: list) -> RunStats:
    arr = np.vstack(incs)
    term = None if terminals[0] is None else np.asarray(terminals, float)
    return RunStats(excess_kurtosis(arr, axis=1), arr.mean(axis=1), arr.std(axis=1), term)


def _rowwise_corr(a: np.ndarray, b: np.ndarray) -> np.ndarray:
    a = a - a.mean(axis=1, keepdims=True)
    b = b - b.mean(axis=1, keepdims=True)
    return (a * b).sum(axis=1) / np.sqrt((a * a).sum(axis=1) * (b * b).sum(axis=1))


def batch_run(
    config: ExperimentConfig,
    runs: int,
    baseline: Optional[SimConfig] = None,
    threads: int = 1,
    master_seed: Optional[int] = None,
    progress: Optional[Callable[[int], None]] = None,
) -> BatchResult:
    """Independent replications; run ``r`` uses stream ``(master_seed, r)``.

    Results are stored by run index, so the aggregates do not depend on
    ``threads`` or completion order. ``baseline`` (a simulation config) is
    run on the same streams as ``config`` for paired comparisons.
    """
    if int(runs) != runs or runs < 1:
        raise InvalidInputError("runs must be a positive integer")
    if threads < 1:
        raise InvalidInputError("threads must be >= 1")
    if baseline is not None:
        if isinstance(config, SamplingConfig):
            raise InvalidInputError("baselines are only defined for time-grid simulations")
        if baseline.steps != config.steps or baseline.step_dt != config.step_dt:
            raise InvalidInputError("baseline must share steps and dt with the model")
    seed = config.rng.master_seed if master_seed is None else master_seed
    streams = [RngSpec(seed, r) for r in range(int(runs))]

    def job(rng):
        out = _run_once(config, baseline, rng)
        if progress is not None:
            progress(rng.stream_index)
        return out

    if threads == 1:
        results = [job(s) for s in streams]
    else:
        with ThreadPoolExecutor(max_workers=threads) as pool:
            results = list(pool.map(job, streams))

    model = _stats([r[0] for r in results], [r[1] for r in results])
    if baseline is None:
        return BatchResult(int(runs), seed, model)
    base = _stats([r[2] for r in results], [r[3] for r in results])
    corr = _rowwise_corr(np.vstack([r[0] for r in results]), np.vstack([r[2] for r in results]))
    return BatchResult(int(runs), seed, model, base, corr)
