"""scikit-learn style wrappers around the functional API."""
from __future__ import annotations

from typing import Optional

import numpy as np
from sklearn.base import BaseEstimator, TransformerMixin
from sklearn.utils.validation import check_is_fitted

from . import core_prices as cp
from ._validation import check_book_columns, check_columns, check_samples
from .dynamics import IMBALANCE, NOISE, SPREAD, sample_price_changes_varying_spread
from .errors import InvalidInputError
from .microprice import Discretization, estimate_microprice, microprice_series
from .stochastics import RngLike, as_generator, fit_beta_mom, fit_gamma_mom, sample

__all__ = [
    "BoltzmannPriceTransformer",
    "BetaMoMFitter",
    "GammaMoMFitter",
    "VaryingSpreadSampler",
    "MicropriceEstimator",
]


class BoltzmannPriceTransformer(TransformerMixin, BaseEstimator):
    """Map book rows ``[bid, ask, bid_size, ask_size]`` to one reference price.

    ``kind`` is one of ``boltzmann``, ``generalized``, ``decomposition``,
    ``mid``, ``weighted`` or ``quasi_equilibrium``. Stateless; ``fit`` only
    validates.
    """

    _KINDS = ("boltzmann", "generalized", "decomposition", "mid", "weighted", "quasi_equilibrium")

    def __init__(self, beta: float = 1.0, kind: str = "boltzmann"):
        self.beta = beta
        self.kind = kind

    def fit(self, X, y=None):
        if self.kind not in self._KINDS:
            raise InvalidInputError(f"kind must be one of {self._KINDS}")
        if self.beta < 0:
            raise InvalidInputError("beta must be non-negative")
        check_book_columns(X)
        self.n_features_in_ = 4
        return self

    def transform(self, X):
        check_is_fitted(self, "n_features_in_")
        arr = check_book_columns(X)
        book = cp.TopOfBook(arr[:, 0], arr[:, 1], arr[:, 2], arr[:, 3])
        if self.kind == "boltzmann":
            return cp.boltzmann_price(book, self.beta)
        if self.kind == "generalized":
            return cp.generalized_boltzmann_price(book, self.beta)
        if self.kind == "decomposition":
            return cp.decomposition_approx(book, self.beta)
        if self.kind == "mid":
            return cp.mid_price(book)
        if self.kind == "weighted":
            return cp.weighted_mid_price(book)
        return cp.quasi_equilibrium_price(book)


class BetaMoMFitter(BaseEstimator):
    """Method-of-moments Beta fit; exposes ``a_``, ``b_`` and ``dist_``."""

    def fit(self, X, y=None):
        self.dist_ = fit_beta_mom(check_samples(X))
        self.a_, self.b_ = self.dist_.params
        return self

    def sample(self, n: int, rng: RngLike = None):
        check_is_fitted(self, "dist_")
        return sample(self.dist_, as_generator(rng), n)


class GammaMoMFitter(BaseEstimator):
    """Method-of-moments Gamma fit; exposes ``shape_``, ``scale_`` and ``dist_``."""

    def fit(self, X, y=None):
        self.dist_ = fit_gamma_mom(check_samples(X))
        self.shape_, self.scale_ = self.dist_.params
        return self

    def sample(self, n: int, rng: RngLike = None):
        check_is_fitted(self, "dist_")
        return sample(self.dist_, as_generator(rng), n)


class VaryingSpreadSampler(BaseEstimator):
    """Fit Beta imbalance and Gamma spread laws from ``X = [q_bid, spread]``, then
    generate ``S tanh(beta theta) + eta S eps / cosh(beta theta)`` price changes.
    """

    def __init__(self, beta: float = 1.0, eta: float = 0.75, spread_tick: Optional[float] = None):
        self.beta = beta
        self.eta = eta
        self.spread_tick = spread_tick

    def fit(self, X, y=None):
        arr = check_columns(X, 2)
        self.imbalance_dist_ = fit_beta_mom(arr[:, 0])
        self.spread_dist_ = fit_gamma_mom(arr[:, 1])
        return self

    def sample(self, n: int, rng: RngLike = None):
        check_is_fitted(self, "spread_dist_")
        theta = sample(self.imbalance_dist_, as_generator(rng, IMBALANCE), n) - 0.5
        s = sample(self.spread_dist_, as_generator(rng, SPREAD), n)
        if self.spread_tick:
            s = np.maximum(np.round(s / self.spread_tick), 1.0) * self.spread_tick
        return sample_price_changes_varying_spread(self.beta, self.eta, s, theta, as_generator(rng, NOISE))


class MicropriceEstimator(BaseEstimator):
    """Columns of ``X``: ``q_bid, spread, mid``. ``predict`` returns micro-prices."""

    def __init__(self, n_buckets: int = 10, spread_states=(1,), tick: float = 0.01, symmetrize: bool = True, iterations: int = 6):
        self.n_buckets = n_buckets
        self.spread_states = spread_states
        self.tick = tick
        self.symmetrize = symmetrize
        self.iterations = iterations

    def fit(self, X, y=None, segments=None):
        arr = check_columns(X, 3)
        disc = Discretization(self.n_buckets, tuple(self.spread_states), self.symmetrize, self.tick)
        self.table_ = estimate_microprice(arr[:, 0], arr[:, 2], arr[:, 1], disc, self.iterations, segments)
        return self

    def predict(self, X):
        check_is_fitted(self, "table_")
        arr = check_columns(X, 3)
        return microprice_series(arr[:, 0], arr[:, 2], arr[:, 1], self.table_)
