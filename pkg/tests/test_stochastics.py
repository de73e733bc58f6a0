import math
import threading

import numpy as np
import pytest
import scipy.stats
from hypothesis import given, settings
from hypothesis import strategies as st
from scipy.integrate import trapezoid

from maxent_lob.errors import FitInfeasibleError, InvalidInputError, UndefinedStatisticError
from maxent_lob.stochastics import (
    DistributionSpec,
    RngSpec,
    SummaryStats,
    as_generator,
    beta_from_moments,
    excess_kurtosis,
    fit_beta_mom,
    fit_gamma_mom,
    gamma_from_moments,
    gaussian_kde,
    round_changes,
    sample,
    silverman_bandwidth,
    tick_ceiling,
)


def test_distribution_validation():
    with pytest.raises(InvalidInputError):
        DistributionSpec.beta(0, 1)
    with pytest.raises(InvalidInputError):
        DistributionSpec.gamma(1, -1)
    with pytest.raises(InvalidInputError):
        DistributionSpec.normal(0, 0)
    with pytest.raises(InvalidInputError):
        DistributionSpec("weibull", (1,))
    with pytest.raises(InvalidInputError):
        DistributionSpec.from_mapping({"kind": "beta", "a": 1, "b": 2, "c": 3})
    d = DistributionSpec.from_mapping({"kind": "gamma", "shape": 4.88, "scale": 0.03})
    assert d.to_mapping() == {"kind": "gamma", "shape": 4.88, "scale": 0.03}


def test_constant_sample():
    np.testing.assert_array_equal(sample(DistributionSpec.constant(0.01), RngSpec(1), 3), [0.01] * 3)


def test_beta_sample_moments():
    x = sample(DistributionSpec.beta(4.5, 4.5), RngSpec(3), 100_000)
    assert abs(x.mean() - 0.5) < 0.005
    assert abs(x.var() - 0.025) < 0.002


def test_gamma_sample_moments():
    x = sample(DistributionSpec.gamma(1, 1), RngSpec(4), 100_000)
    assert abs(x.mean() - 1) < 0.02
    assert abs(x.var() - 1) < 0.05


def test_streams_reproducible_and_distinct():
    d = DistributionSpec.normal()
    a = sample(d, RngSpec(5, 2), 1000)
    np.testing.assert_array_equal(a, sample(d, RngSpec(5, 2), 1000))
    assert not np.array_equal(a, sample(d, RngSpec(5, 3), 1000))
    assert not np.array_equal(a, sample(d, RngSpec(6, 2), 1000))
    assert not np.array_equal(RngSpec(5, 2).generator(0).random(5), RngSpec(5, 2).generator(1).random(5))


def test_streams_identical_across_threads():
    out = {}

    def work(i):
        out[i] = sample(DistributionSpec.beta(2, 3), RngSpec(9, i), 500)

    threads = [threading.Thread(target=work, args=(i,)) for i in range(8)]
    for t in threads:
        t.start()
    for t in threads:
        t.join()
    for i in range(8):
        np.testing.assert_array_equal(out[i], sample(DistributionSpec.beta(2, 3), RngSpec(9, i), 500))


def test_as_generator():
    g = np.random.default_rng(0)
    assert as_generator(g) is g
    with pytest.raises(InvalidInputError):
        as_generator("seed")


def test_moment_inversions():
    d = beta_from_moments(0.5, 0.025)
    assert d.params == pytest.approx((4.5, 4.5))
    m = 0.6733
    d = beta_from_moments(m, m * (1 - m) / 11)
    assert d.params == pytest.approx((6.733, 3.267))
    assert gamma_from_moments(1, 1).params == pytest.approx((1, 1))
    assert gamma_from_moments(0.1464, 0.004392).params == pytest.approx((4.88, 0.03), rel=1e-3)
    with pytest.raises(FitInfeasibleError):
        beta_from_moments(0.5, 0.3)


def test_fit_errors():
    with pytest.raises(FitInfeasibleError):
        fit_gamma_mom([2.0, 2.0, 2.0])
    with pytest.raises(InvalidInputError):
        fit_beta_mom([0.2, 1.2])
    with pytest.raises(FitInfeasibleError):
        fit_beta_mom([0.3, 0.3, 0.3])


def test_fit_symmetric():
    x = np.concatenate([np.linspace(0.1, 0.9, 41), 1 - np.linspace(0.1, 0.9, 41)])
    a, b = fit_beta_mom(x).params
    assert a == pytest.approx(b, rel=1e-9)


@pytest.mark.parametrize("a,b", [(0.5, 0.5), (4.5, 4.5), (10, 2), (0.7, 6)])
def test_beta_round_trip(a, b):
    x = sample(DistributionSpec.beta(a, b), RngSpec(11), 1_000_000)
    assert fit_beta_mom(x).params == pytest.approx((a, b), rel=0.03)


@pytest.mark.parametrize("k,s", [(1, 1), (4.88, 0.03), (0.5, 2)])
def test_gamma_round_trip(k, s):
    x = sample(DistributionSpec.gamma(k, s), RngSpec(12), 1_000_000)
    assert fit_gamma_mom(x).params == pytest.approx((k, s), rel=0.03)


def test_gamma_scale_property():
    x = sample(DistributionSpec.gamma(2, 1), RngSpec(13), 5000)
    k1, s1 = fit_gamma_mom(x).params
    k2, s2 = fit_gamma_mom(3.5 * x).params
    assert k2 == pytest.approx(k1, rel=1e-12)
    assert s2 == pytest.approx(3.5 * s1, rel=1e-12)


def test_kurtosis_examples():
    assert excess_kurtosis([1, 2, 3, 4, 5]) == pytest.approx(-1.3)
    assert excess_kurtosis([1, -1, 1, -1]) == pytest.approx(-2)
    z = np.random.default_rng(0).standard_normal(1_000_000)
    assert abs(excess_kurtosis(z)) < 0.02
    with pytest.raises(UndefinedStatisticError):
        excess_kurtosis([1, 1, 1, 1])
    with pytest.raises(UndefinedStatisticError):
        excess_kurtosis([1, 2, 3])


def test_kurtosis_matches_scipy_rowwise():
    x = np.random.default_rng(1).standard_t(5, size=(7, 300))
    np.testing.assert_allclose(excess_kurtosis(x, axis=1), scipy.stats.kurtosis(x, axis=1, fisher=True, bias=True), rtol=1e-12)


@settings(max_examples=100, deadline=None)
@given(st.floats(0.01, 100), st.floats(-1e3, 1e3), st.integers(0, 2**32 - 1))
def test_kurtosis_affine_invariance(c, d, seed):
    x = np.random.default_rng(seed).standard_normal(200)
    assert excess_kurtosis(c * x + d) == pytest.approx(excess_kurtosis(x), abs=1e-9)
    assert excess_kurtosis(-c * x + d) == pytest.approx(excess_kurtosis(x), abs=1e-9)


def test_summary_stats():
    s = SummaryStats.from_samples([1, 2, 3, 4, 5])
    assert (s.count, s.mean, s.min, s.max) == (5, 3.0, 1.0, 5.0)
    assert s.stddev == pytest.approx(math.sqrt(2))
    assert s.excess_kurtosis == pytest.approx(-1.3)
    assert SummaryStats.from_samples([2.0]).excess_kurtosis is None
    with pytest.raises(UndefinedStatisticError):
        SummaryStats.from_samples([])


@settings(max_examples=100, deadline=None)
@given(st.lists(st.floats(-1e6, 1e6), min_size=1, max_size=50))
def test_summary_invariants(xs):
    s = SummaryStats.from_samples(xs)
    assert s.min <= s.mean <= s.max
    assert s.stddev >= 0 and s.count >= 1


def test_kde():
    with pytest.raises(UndefinedStatisticError):
        gaussian_kde([2.0] * 10, [0.0])
    x = np.random.default_rng(2).standard_normal(400)
    sym = np.concatenate([x, -x])
    pts = np.linspace(-3, 3, 61)
    dens = gaussian_kde(sym, pts)
    np.testing.assert_allclose(dens, dens[::-1], atol=1e-10)
    assert np.all(dens >= 0)
    h = silverman_bandwidth(x)
    grid = np.linspace(x.min() - 6 * h * 3, x.max() + 6 * h * 3, 4001)
    assert trapezoid(gaussian_kde(x, grid), grid) == pytest.approx(1, abs=0.01)


def test_silverman_matches_formula():
    x = np.random.default_rng(3).standard_normal(1000)
    iqr = np.subtract(*np.percentile(x, [75, 25]))
    expected = 0.9 * min(x.std(ddof=1), iqr / 1.34) * 1000 ** -0.2
    assert silverman_bandwidth(x) == pytest.approx(expected, rel=1e-12)


def test_tick_ceiling():
    assert tick_ceiling(1.3) == pytest.approx(0.02)
    assert tick_ceiling(1.0) == pytest.approx(0.01)
    assert tick_ceiling(0.2) == pytest.approx(0.01)
    with pytest.raises(InvalidInputError):
        tick_ceiling(0.0)


def test_round_changes():
    assert round_changes(0.004999) == 0.0
    assert round_changes(0.005) == 0.01
    assert round_changes(-0.005) == -0.01
    assert round_changes(2.675) == 2.68
    np.testing.assert_array_equal(round_changes(np.array([0.014, -0.015, 0.0])), [0.01, -0.02, 0.0])
