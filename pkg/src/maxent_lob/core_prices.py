"""Top-of-book quantities and the maximum-entropy (Boltzmann) price family.

Every function accepts either scalars or numpy arrays in the book fields and
broadcasts, so the same code serves single snapshots and whole quote series.

The two-state maximum-entropy problem is fully determined once ``beta`` is
fixed, so no numerical maximisation happens here: the Boltzmann weights are
the closed-form softmax of ``(-beta * q_bid, -beta * q_ask)``. They are
evaluated as logistic functions of ``2 * beta * theta``, which stays finite for
any ``beta``.
"""
from __future__ import annotations

from dataclasses import dataclass
from typing import Union

import numpy as np
from scipy.special import expit, xlogy

from .errors import InvalidInputError, NumericFailureError

ArrayLike = Union[float, np.ndarray]

__all__ = [
    "TopOfBook",
    "Imbalance",
    "StateProbabilities",
    "imbalance_from_book",
    "mid_price",
    "weighted_mid_price",
    "spread",
    "state_probabilities",
    "shannon_entropy",
    "boltzmann_price",
    "boltzmann_adjustment",
    "equilibrium_price",
    "quasi_equilibrium_price",
    "decomposition_approx",
    "generalized_boltzmann_price",
]


@dataclass(frozen=True)
class TopOfBook:
    """Best bid/ask prices and displayed sizes.

    Fields may be scalars or equally shaped arrays. Locked or crossed books
    (``bid_price >= ask_price``) and non-positive sizes are rejected.
    """

    bid_price: ArrayLike
    ask_price: ArrayLike
    bid_size: ArrayLike
    ask_size: ArrayLike

    def __post_init__(self):
        bid, ask = np.asarray(self.bid_price, float), np.asarray(self.ask_price, float)
        qb, qa = np.asarray(self.bid_size, float), np.asarray(self.ask_size, float)
        for name, arr in (("bid_price", bid), ("ask_price", ask), ("bid_size", qb), ("ask_size", qa)):
            if not np.all(np.isfinite(arr)):
                raise InvalidInputError(f"{name} must be finite")
        if np.any(qb <= 0) or np.any(qa <= 0):
            raise InvalidInputError("sizes must be strictly positive")
        if np.any(bid >= ask):
            raise InvalidInputError("locked or crossed book: bid_price must be < ask_price")

    @classmethod
    def from_theta(cls, bid_price, ask_price, theta, total_size=1.0):
        """Book with the given centered imbalance, splitting ``total_size``."""
        theta = np.asarray(theta, float)
        if np.any(np.abs(theta) >= 0.5):
            raise InvalidInputError("theta must lie strictly inside (-1/2, 1/2) for positive sizes")
        q = 0.5 + theta
        return cls(bid_price, ask_price, q * total_size, (1.0 - q) * total_size)

    @property
    def spread(self):
        return np.subtract(self.ask_price, self.bid_price)

    @property
    def mid(self):
        return mid_price(self)


@dataclass(frozen=True)
class Imbalance:
    q_bid: ArrayLike
    q_ask: ArrayLike
    theta: ArrayLike

    @classmethod
    def from_q(cls, q_bid):
        q = np.asarray(q_bid, float)
        if np.any((q < 0) | (q > 1)):
            raise InvalidInputError("bid imbalance must lie in [0, 1]")
        if q.ndim == 0:
            q = float(q)
        return cls(q, 1.0 - q, q - 0.5)

    @classmethod
    def from_theta(cls, theta):
        return cls.from_q(np.add(theta, 0.5))

    @property
    def book_imbalance(self):
        """``(Q^b - Q^a) / (Q^b + Q^a)``, i.e. twice ``theta``."""
        return np.multiply(self.theta, 2.0)


@dataclass(frozen=True)
class StateProbabilities:
    p_bid: ArrayLike
    p_ask: ArrayLike
    beta: float


def _check_beta(beta):
    beta = np.asarray(beta, float)
    if np.any(~np.isfinite(beta)) or np.any(beta < 0):
        raise InvalidInputError(f"beta must be finite and >= 0, got {beta!r}")


def imbalance_from_book(book: TopOfBook) -> Imbalance:
    total = np.add(book.bid_size, book.ask_size)
    if np.any(np.asarray(total) <= 0):
        raise InvalidInputError("total displayed size is zero")
    q = np.divide(book.bid_size, total)
    return Imbalance(q, 1.0 - q, q - 0.5)


def mid_price(book: TopOfBook):
    return 0.5 * np.add(book.bid_price, book.ask_price)


def spread(book: TopOfBook):
    return np.subtract(book.ask_price, book.bid_price)


def weighted_mid_price(book: TopOfBook):
    imb = imbalance_from_book(book)
    return np.multiply(imb.q_bid, book.ask_price) + np.multiply(imb.q_ask, book.bid_price)


def state_probabilities(imb: Imbalance, beta: float) -> StateProbabilities:
    """Boltzmann probabilities of the bid and ask states.

    ``p_bid = exp(-beta q_bid) / Z`` which equals ``logistic(-2 beta theta)``.
    """
    _check_beta(beta)
    x = 2.0 * np.multiply(beta, imb.theta)
    return StateProbabilities(expit(-x), expit(x), beta)


def shannon_entropy(probs, tol: float = 1e-9) -> float:
    """Entropy in nats, with ``0 ln 0 = 0``."""
    p = np.asarray(probs, float)
    if p.ndim != 1 or p.size == 0:
        raise InvalidInputError("probabilities must be a non-empty 1-d sequence")
    if np.any(p < 0) or not np.all(np.isfinite(p)):
        raise InvalidInputError("probabilities must be finite and non-negative")
    if abs(p.sum() - 1.0) > tol:
        raise InvalidInputError(f"probabilities sum to {p.sum()!r}, not 1")
    return float(-np.sum(xlogy(p, p)))


def boltzmann_adjustment(spread_, theta, beta):
    """Closed-form offset of the Boltzmann price from the mid: ``(S/2) tanh(beta theta)``."""
    return 0.5 * np.multiply(spread_, np.tanh(np.multiply(beta, theta)))


def boltzmann_price(book: TopOfBook, beta: float):
    """Expectation of ``{P^b, P^a}`` under the Boltzmann state distribution.

    Always lies in ``[P^b, P^a]`` and equals ``mid + (S/2) tanh(beta theta)``.
    """
    probs = state_probabilities(imbalance_from_book(book), beta)
    price = np.multiply(probs.p_bid, book.bid_price) + np.multiply(probs.p_ask, book.ask_price)
    # a convex combination can overshoot an endpoint by one ulp
    return np.clip(price, book.bid_price, book.ask_price)


def equilibrium_price(book: TopOfBook):
    return boltzmann_price(book, 1.0)


def quasi_equilibrium_price(book: TopOfBook):
    return 0.5 * (mid_price(book) + weighted_mid_price(book))


def decomposition_approx(book: TopOfBook, beta: float, rtol: float = 1e-12):
    """Linear-in-imbalance approximation ``mid + beta (S/2) theta``.

    Also evaluated as ``(1 - beta/2) mid + (beta/2) weighted``; the two forms
    are algebraically identical and a disagreement beyond ``rtol`` raises.
    """
    _check_beta(beta)
    mid = mid_price(book)
    theta = imbalance_from_book(book).theta
    linear = mid + beta * 0.5 * np.multiply(spread(book), theta)
    blended = (1.0 - beta / 2.0) * mid + (beta / 2.0) * weighted_mid_price(book)
    scale = np.maximum(np.abs(mid), 1.0) * max(1.0, abs(beta))
    if np.any(np.abs(linear - blended) > rtol * scale):
        raise NumericFailureError("decomposition forms disagree beyond tolerance")
    return linear


def generalized_boltzmann_price(book: TopOfBook, beta: float):
    """Boltzmann price with the spread acting as temperature.

    Uses the effective parameter ``beta / S``. Here ``beta`` carries price
    units (the same units as the spread) so that ``beta / S`` is
    dimensionless; with ``S`` equal to one price unit this is the plain
    Boltzmann price.
    """
    _check_beta(beta)
    s = spread(book)
    if np.any(np.asarray(s) <= 0):
        raise InvalidInputError("generalized Boltzmann price needs a positive spread")
    return boltzmann_price(book, np.divide(beta, s))
