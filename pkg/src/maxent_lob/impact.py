"""Impact of imbalance changes on the Boltzmann price, lagged impact and market-maker P&L."""
from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .errors import InvalidInputError

__all__ = [
    "ImpactCurve",
    "TradeTape",
    "impact_derivative",
    "impact_delta",
    "weighted_mid_impact_delta",
    "impact_curve",
    "lagged_impact_mid",
    "lagged_impact_boltzmann",
    "lagged_delta_si",
    "mm_pnl",
    "pnl_distance_bound",
]


@dataclass(frozen=True)
class ImpactCurve:
    """Boltzmann price change from a balanced book (``theta = 0``) to each grid point.

    ``weighted`` is the weighted-mid change ``S theta`` and ``mid`` the flat
    mid-price line, both anchored at the same point.
    """

    theta_grid: np.ndarray
    price_change: np.ndarray
    weighted: np.ndarray
    mid: np.ndarray
    spread: float
    beta: float


@dataclass(frozen=True)
class TradeTape:
    """Aligned per-trade sequences. ``volume`` is one size for the whole tape."""

    signs: np.ndarray
    mids: np.ndarray
    spreads: np.ndarray
    thetas: np.ndarray
    volume: float = 1.0

    def __post_init__(self):
        arrays = {}
        for name in ("signs", "mids", "spreads", "thetas"):
            arr = np.asarray(getattr(self, name), float)
            if arr.ndim != 1:
                raise InvalidInputError(f"{name} must be one-dimensional")
            if not np.all(np.isfinite(arr)):
                raise InvalidInputError(f"{name} must be finite")
            arrays[name] = arr
            object.__setattr__(self, name, arr)
        if len({a.size for a in arrays.values()}) != 1:
            raise InvalidInputError("tape sequences must have equal length")
        if not np.all(np.isin(arrays["signs"], (-1.0, 1.0))):
            raise InvalidInputError("trade signs must be -1 or +1")
        if np.any(arrays["spreads"] < 0):
            raise InvalidInputError("spreads must be non-negative")
        if np.any(np.abs(arrays["thetas"]) > 0.5):
            raise InvalidInputError("centered imbalance must lie in [-1/2, 1/2]")
        if not self.volume > 0:
            raise InvalidInputError("volume must be positive")

    def __len__(self):
        return self.signs.size


def impact_derivative(spread, beta, theta):
    """``d P / d theta = beta (S/2) / cosh^2(beta theta)``."""
    x = np.multiply(beta, theta)
    return np.multiply(beta, 0.5 * np.asarray(spread)) / np.cosh(x) ** 2


def impact_delta(spread, beta, theta0, theta1):
    """Price change for a move ``theta0 -> theta1`` at fixed spread."""
    return 0.5 * np.multiply(spread, np.tanh(np.multiply(beta, theta1)) - np.tanh(np.multiply(beta, theta0)))


def weighted_mid_impact_delta(spread, q0, q1):
    return np.multiply(spread, np.subtract(q1, q0))


def impact_curve(spread: float, beta: float, grid) -> ImpactCurve:
    theta = np.asarray(grid, float)
    if np.any(np.abs(theta) > 0.5):
        raise InvalidInputError("grid must lie in [-1/2, 1/2]")
    if spread < 0 or beta < 0:
        raise InvalidInputError("spread and beta must be non-negative")
    return ImpactCurve(
        theta,
        impact_delta(spread, beta, 0.0, theta),
        spread * theta,
        np.zeros_like(theta),
        float(spread),
        float(beta),
    )


def _check_lag(tape: TradeTape, lag: int):
    if int(lag) != lag or lag < 1:
        raise InvalidInputError("lag must be a positive integer")
    if len(tape) <= lag:
        raise InvalidInputError(f"tape of length {len(tape)} is too short for lag {lag}")
    return int(lag)


def _boltzmann_marks(tape: TradeTape, beta: float, linearized: bool):
    x = beta * tape.thetas
    adj = x if linearized else np.tanh(x)
    return tape.mids + 0.5 * tape.spreads * adj


def lagged_impact_mid(tape: TradeTape, lag: int) -> float:
    """Mean signed mid move ``lag`` trades after each trade."""
    lag = _check_lag(tape, lag)
    m = tape.mids
    return float(np.mean(tape.signs[:-lag] * (m[lag:] - m[:-lag])))


def lagged_impact_boltzmann(tape: TradeTape, lag: int, beta: float, linearized: bool = False) -> float:
    """Same as :func:`lagged_impact_mid` with the Boltzmann price as the mark.

    ``linearized=True`` uses ``mid + beta (S/2) theta`` instead of the tanh form.
    """
    lag = _check_lag(tape, lag)
    if beta < 0:
        raise InvalidInputError("beta must be non-negative")
    p = _boltzmann_marks(tape, beta, linearized)
    return float(np.mean(tape.signs[:-lag] * (p[lag:] - p[:-lag])))


def lagged_delta_si(tape: TradeTape, lag: int) -> np.ndarray:
    """Per-trade ``(S_{n+l}/2) theta_{n+l} - (S_n/2) theta_n``."""
    lag = _check_lag(tape, lag)
    half = 0.5 * tape.spreads * tape.thetas
    return half[lag:] - half[:-lag]


def mm_pnl(tape: TradeTape, lag: int, benchmark: str = "mid", beta: float = 1.0, linearized: bool = False):
    """Liquidity-provider P&L per trade against a price ``lag`` trades later.

    Each trade fills at ``m_n + eps_n S_n / 2`` and is marked at the mid or
    Boltzmann price of trade ``n + lag``. Returns ``(per_trade, mean)``.
    """
    lag = _check_lag(tape, lag)
    if benchmark == "mid":
        marks = tape.mids
    elif benchmark == "boltzmann":
        if beta < 0:
            raise InvalidInputError("beta must be non-negative")
        marks = _boltzmann_marks(tape, beta, linearized)
    else:
        raise InvalidInputError("benchmark must be 'mid' or 'boltzmann'")
    eps = tape.signs[:-lag]
    fill = tape.mids[:-lag] + eps * tape.spreads[:-lag] / 2
    per_trade = tape.volume * eps * (fill - marks[lag:])
    return per_trade, float(per_trade.mean())


def pnl_distance_bound(tape: TradeTape, lag: int, beta: float) -> float:
    """``beta v mean(S_{n+l} |theta_{n+l}|)``, which caps the mid/Boltzmann P&L gap."""
    lag = _check_lag(tape, lag)
    return float(beta * tape.volume * np.mean(tape.spreads[lag:] * np.abs(tape.thetas[lag:])))
