import numpy as np
import pytest
from sklearn.base import clone
from sklearn.exceptions import NotFittedError

from maxent_lob.core_prices import TopOfBook, boltzmann_price
from maxent_lob.errors import InvalidInputError
from maxent_lob.estimators import (
    BetaMoMFitter,
    BoltzmannPriceTransformer,
    GammaMoMFitter,
    MicropriceEstimator,
    VaryingSpreadSampler,
)
from maxent_lob.microprice import ToyModelConfig, simulate_toy_large_tick
from maxent_lob.stochastics import RngSpec

X_BOOK = np.array([[10.0, 10.02, 200, 150], [100.0, 100.1, 70, 30], [2.56, 2.57, 5, 5]])


def test_transformer_matches_function():
    t = BoltzmannPriceTransformer(beta=1.5).fit(X_BOOK)
    expected = boltzmann_price(TopOfBook(*X_BOOK.T), 1.5)
    np.testing.assert_array_equal(t.transform(X_BOOK), expected)
    assert t.get_params() == {"beta": 1.5, "kind": "boltzmann"}
    assert clone(t).set_params(kind="mid").fit(X_BOOK).transform(X_BOOK)[2] == pytest.approx(2.565)


def test_transformer_validation():
    with pytest.raises(NotFittedError):
        BoltzmannPriceTransformer().transform(X_BOOK)
    with pytest.raises(InvalidInputError):
        BoltzmannPriceTransformer(kind="vwap").fit(X_BOOK)
    with pytest.raises(InvalidInputError):
        BoltzmannPriceTransformer().fit(X_BOOK[:, :3])
    with pytest.raises(InvalidInputError):
        BoltzmannPriceTransformer().fit([[10.0, 9.0, 1, 1]])
    with pytest.raises(InvalidInputError):
        BoltzmannPriceTransformer().fit([[10.0, np.nan, 1, 1]])


def test_mom_fitters():
    x = np.random.default_rng(0).beta(2, 5, 200_000)
    f = BetaMoMFitter().fit(x)
    assert (f.a_, f.b_) == pytest.approx((2, 5), rel=0.03)
    assert f.sample(10, RngSpec(1)).shape == (10,)
    g = GammaMoMFitter().fit(np.random.default_rng(1).gamma(4.88, 0.03, 200_000).reshape(-1, 1))
    assert (g.shape_, g.scale_) == pytest.approx((4.88, 0.03), rel=0.03)


def test_varying_spread_sampler():
    rng = np.random.default_rng(2)
    X = np.column_stack([rng.beta(4.5, 4.5, 50_000), rng.gamma(4.88, 0.03, 50_000)])
    m = VaryingSpreadSampler(beta=1.0, eta=0.75, spread_tick=0.01).fit(X)
    out = m.sample(8000, RngSpec(3))
    np.testing.assert_array_equal(out, m.sample(8000, RngSpec(3)))
    assert out.std() == pytest.approx(0.75 * np.sqrt(0.1464**2 + 0.0044), rel=0.1)


def test_microprice_estimator():
    s = simulate_toy_large_tick(ToyModelConfig(alpha=0.5, events=100_000, rng=RngSpec(2)))
    X = np.column_stack([s.imbalance, s.spread, s.mid])
    est = MicropriceEstimator(tick=1.0).fit(X)
    pred = est.predict([[0.5, 1.0, 7.0], [0.75, 1.0, 7.0]])
    assert pred[0] == pytest.approx(7.0, abs=1e-12)
    assert pred[1] == pytest.approx(7.125, abs=0.05)
    assert est.get_params()["n_buckets"] == 10
