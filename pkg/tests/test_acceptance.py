"""Acceptance checks. Each numbered check prints one PASS/FAIL line.

Run with ``pytest tests/test_acceptance.py -s`` (lines are also printed
without ``-s``).
"""
import time
from dataclasses import replace

import numpy as np
import pytest
from scipy.integrate import quad

from maxent_lob.config import load_config
from maxent_lob.core_prices import (
    TopOfBook,
    boltzmann_price,
    decomposition_approx,
    weighted_mid_price,
)
from maxent_lob.dynamics import SamplingConfig, batch_run, drift_match_theta, step_moments
from maxent_lob.impact import (
    TradeTape,
    impact_delta,
    impact_derivative,
    lagged_impact_mid,
    mm_pnl,
    weighted_mid_impact_delta,
)
from maxent_lob.ingest import load_series
from maxent_lob.microprice import Discretization, ToyModelConfig, analytic_toy_table, estimate_microprice, simulate_toy_large_tick
from maxent_lob.stochastics import DistributionSpec, RngSpec, fit_beta_mom, fit_gamma_mom
from synthetic import synthetic_quotes

pytestmark = pytest.mark.slow

_CACHE = {}


def report(capsys, number, ok, detail):
    with capsys.disabled():
        print(f"\n{'PASS' if ok else 'FAIL'} criterion {number}: {detail}")


def _batches():
    """Every batched acceptance run, keyed by name: (config, runs, baseline)."""
    out = {}
    for name, runs in (
        ("table1", 1000),
        ("table3_beta5", 1000),
        ("table3_beta2_2", 1000),
        ("table3_beta8_2", 1000),
        ("table6", 1000),
        ("symmetric_beta5", 1000),
        ("symmetric_beta1", 1000),
    ):
        exp = load_config(name)
        out[name] = (exp.sim, runs, exp.baseline)
    lcid = load_config("lcid_sampling").sampling
    out["lcid_u"] = (replace(lcid, imbalance=DistributionSpec.beta(0.5, 0.5)), 1000, None)
    out["lcid_hump"] = (lcid, 1000, None)
    return out


BATCHES = _batches()


def run_batch(name, threads=1, config=None):
    cfg, runs, base = BATCHES[name] if config is None else (config, 1000, None)
    if threads == 1 and name in _CACHE:
        return _CACHE[name]
    res = batch_run(cfg, runs, baseline=base, threads=threads)
    if threads == 1:
        _CACHE[name] = res
    return res


def ge_sampling_config(tmp_dir):
    """Synthetic quotes through ingest and fitting into a sampler config."""
    q_gen, _ = synthetic_quotes(tmp_dir / "ge.csv", days=21, seed=7)
    series, report_ = load_series(tmp_dir / "ge.csv")
    imb = fit_beta_mom(series.q_bid)
    spr = fit_gamma_mom(series.spread)
    base = load_config("ge_sampling").sampling
    return replace(base, imbalance=imb, spread=spr), imb, spr, report_


def test_criterion_01_exact_identities(capsys):
    t0 = time.perf_counter()
    rng = np.random.default_rng(1)
    n = 100_000
    bid = rng.uniform(1, 500, n)
    ask = bid + rng.uniform(1e-4, 5, n)
    qb, qa = rng.uniform(1, 1e4, n), rng.uniform(1, 1e4, n)
    beta = rng.uniform(0, 10, n)
    book = TopOfBook(bid, ask, qb, qa)
    theta = qb / (qb + qa) - 0.5
    s = ask - bid
    mid = (bid + ask) / 2
    # independent closed forms
    ref = mid + s / 2 * np.tanh(beta * theta)
    price_err = np.max(np.abs(boltzmann_price(book, beta) - ref) / np.abs(ref))
    weighted_err = np.max(np.abs(weighted_mid_price(book) - (mid + s * theta)) / mid)

    eps = rng.uniform(0, 1, 1000)
    mom = step_moments(eps, rng.uniform(0, 10, 1000), rng.uniform(-0.5, 0.5, 1000))
    moment_err = np.max(np.abs(mom.drift**2 + mom.vol**2 - eps**2))

    pts = np.sort(rng.uniform(-0.5, 0.5, (200, 3)), axis=1)
    b, sp = rng.uniform(0, 10, 200), rng.uniform(0.01, 1, 200)
    additivity_err = np.max(np.abs(
        impact_delta(sp, b, pts[:, 0], pts[:, 1]) + impact_delta(sp, b, pts[:, 1], pts[:, 2]) - impact_delta(sp, b, pts[:, 0], pts[:, 2])
    ))
    ftc_err = max(
        abs(quad(lambda x: impact_derivative(sp[i], b[i], x), pts[i, 0], pts[i, 2])[0] - impact_delta(sp[i], b[i], pts[i, 0], pts[i, 2]))
        for i in range(20)
    )

    m = 5000
    tape = TradeTape(
        rng.choice([-1.0, 1.0], m),
        20 + np.cumsum(rng.choice([-0.005, 0.0, 0.005], m)),
        rng.choice([0.01, 0.02, 0.03], m),
        rng.beta(2, 2, m) - 0.5,
        100.0,
    )
    lag = 3
    pnl = mm_pnl(tape, lag)[1] + tape.volume * lagged_impact_mid(tape, lag)
    pnl_err = abs(pnl - tape.volume * np.mean(tape.spreads[:-lag] / 2))
    elapsed = time.perf_counter() - t0

    ok = (
        price_err <= 1e-12 and weighted_err <= 1e-12 and moment_err <= 1e-12
        and additivity_err <= 1e-12 and ftc_err <= 1e-10 and pnl_err <= 1e-9 and elapsed < 1.0
    )
    report(capsys, 1, ok, f"price rel err {price_err:.2e}, weighted {weighted_err:.2e}, moments {moment_err:.2e}, "
           f"additivity {additivity_err:.2e}, FTC {ftc_err:.2e}, P&L {pnl_err:.2e}, {elapsed:.2f}s")
    assert ok


def test_criterion_02_linearization_bound(capsys):
    betas = np.linspace(0, 10, 101)
    thetas = np.linspace(-0.5 + 1e-9, 0.5 - 1e-9, 201)
    bb, tt = np.meshgrid(betas, thetas)
    bb, tt = bb.ravel(), tt.ravel()
    book = TopOfBook.from_theta(np.full(bb.size, 99.99), np.full(bb.size, 100.03), tt, 1000.0)
    s = 0.04
    approx = np.empty(bb.size)
    for beta in betas:
        sub = bb == beta
        approx[sub] = decomposition_approx(TopOfBook(book.bid_price[sub], book.ask_price[sub], book.bid_size[sub], book.ask_size[sub]), beta)
    gap = np.abs(boltzmann_price(book, bb) - approx)
    bound = s / 2 * np.abs(bb * tt) ** 3 / 3
    worst = np.max(gap - bound)

    h = 1e-3
    second = []
    for beta in betas:
        f = [boltzmann_price(TopOfBook.from_theta(99.99, 100.03, x, 1000.0), beta) for x in (-h, 0.0, h)]
        second.append((f[2] - 2 * f[1] + f[0]) / h**2)
    curvature = float(np.max(np.abs(second)))
    ok = worst <= 1e-12 and curvature <= 1e-6
    report(capsys, 2, ok, f"max(gap - bound) {worst:.2e} over {bb.size} points, |f''(0)| max {curvature:.2e}")
    assert ok


def test_criterion_03_varying_spread_kurtosis(capsys):
    t0 = time.perf_counter()
    res = run_batch("table1")
    elapsed = time.perf_counter() - t0
    kurt = res.model.kurtosis.mean()
    std = res.model.increment_std.mean()
    ok = 6.2 <= kurt <= 8.4 and abs(std / 1.038e-3 - 1) <= 0.10 and elapsed < 30
    report(capsys, 3, ok, f"mean kurtosis {kurt:.3f} (sd {res.model.kurtosis.std():.2f}), "
           f"increment std {std:.4e}, {res.runs} runs in {elapsed:.1f}s")
    assert ok


def test_criterion_04_constant_spread_kurtosis(capsys):
    t0 = time.perf_counter()
    ranges = {"table3_beta5": (3.4, 4.3), "table3_beta2_2": (2.1, 2.9), "table3_beta8_2": (7.5, 10.0)}
    found = {name: run_batch(name).model.kurtosis.mean() for name in ranges}
    elapsed = time.perf_counter() - t0
    ok = all(lo <= found[n] <= hi for n, (lo, hi) in ranges.items()) and elapsed < 60
    detail = ", ".join(f"{n} {found[n]:.3f} in [{lo}, {hi}]" for n, (lo, hi) in ranges.items())
    report(capsys, 4, ok, f"{detail}; {BATCHES['table3_beta5'][1]} runs each in {elapsed:.1f}s")
    assert ok


def test_criterion_05_market_impact_drift(capsys):
    res = run_batch("table6")
    theta_hat = drift_match_theta(2.0, 0.1, 0.3)
    model_mean, base_mean = res.model.terminal.mean(), res.baseline.terminal.mean()
    model_sd, base_sd = res.model.terminal.std(), res.baseline.terminal.std()
    ok = (
        10.07 <= model_mean <= 10.13 and 10.07 <= base_mean <= 10.13
        and abs(model_sd / 0.28 - 1) <= 0.15 and abs(base_sd / 0.28 - 1) <= 0.15
        and abs(theta_hat - 0.173287) <= 5e-7
    )
    report(capsys, 5, ok, f"terminal mean {model_mean:.4f} / {base_mean:.4f} (Boltzmann / Bachelier), "
           f"sd {model_sd:.4f} / {base_sd:.4f}, theta_hat {theta_hat:.7f}")
    assert ok


def test_criterion_06_symmetric_alignment(capsys):
    wide = run_batch("symmetric_beta5")
    model_std, base_std = wide.model.increment_std.mean(), wide.baseline.increment_std.mean()
    corr = run_batch("symmetric_beta1").increment_correlation
    ok = abs(model_std / 0.005 - 1) <= 0.10 and abs(base_std / 0.005 - 1) <= 0.10 and corr.min() > 0.95
    report(capsys, 6, ok, f"beta=5 increment std {model_std:.5f} / {base_std:.5f}, "
           f"beta=1 correlation min {corr.min():.4f} mean {corr.mean():.4f}")
    assert ok


def test_criterion_07_impact_points(capsys):
    d = float(impact_delta(0.02, 1.0, 0.0, 0.5))
    w = float(weighted_mid_impact_delta(0.02, 0.5, 1.0))
    ok = abs(d - 0.0046212) <= 1e-7 and w == 0.01
    report(capsys, 7, ok, f"impact_delta {d:.9f}, weighted-mid delta {w!r}")
    assert ok


def test_criterion_08_toy_microprice(capsys):
    t0 = time.perf_counter()
    disc = Discretization(10, (1,), True, 1.0)
    worst_adj = worst_tail = 0.0
    for i, alpha in enumerate((0.25, 0.5, 1.0)):
        s = simulate_toy_large_tick(ToyModelConfig(alpha=alpha, events=200_000, rng=RngSpec(20250507, i)))
        table = estimate_microprice(s.imbalance, s.mid, s.spread, disc)
        ref = analytic_toy_table(alpha, disc)[0]
        worst_adj = max(worst_adj, float(np.abs(table.adjustment - ref).max()))
        worst_tail = max([worst_tail] + [float(np.abs(g).max()) for g in table.terms[1:]])
    elapsed = time.perf_counter() - t0
    ok = worst_adj <= 0.05 and worst_tail <= 0.02 and elapsed < 60
    report(capsys, 8, ok, f"max table error {worst_adj:.4f} tick, max higher-order term {worst_tail:.4f} tick, {elapsed:.1f}s")
    assert ok


def test_criterion_09_pipeline_and_lcid(capsys, tmp_path):
    cfg, imb, spr, drops = ge_sampling_config(tmp_path)
    a, b = imb.params
    shape, scale = spr.params
    fit_err = max(abs(a / 4.5 - 1), abs(b / 4.5 - 1), abs(shape / 4.88 - 1), abs(scale / 0.03 - 1))
    ge = batch_run(cfg, 1000).model.kurtosis.mean()
    lcid = run_batch("lcid_u").model.kurtosis.mean()
    ge_ok = drops.balanced and fit_err <= 0.05 and 1.5 <= ge <= 9
    lcid_ok = 4.2 <= lcid <= 7.6
    ok = ge_ok and lcid_ok
    report(capsys, 9, ok, f"synthetic pipeline fits Beta({a:.3f}, {b:.3f}) Gamma({shape:.3f}, {scale:.4f}), "
           f"max rel err {fit_err:.3f}, sampled kurtosis {ge:.3f} [{'ok' if ge_ok else 'out'}]; "
           f"LCID U-shaped Beta(0.5,0.5) kurtosis {lcid:.2f} vs [4.2, 7.6] [{'ok' if lcid_ok else 'out'}]")
    assert ok


def test_lcid_hump_proxy(capsys):
    # not a numbered check: the shipped LCID config uses a hump-shaped imbalance law
    kurt = run_batch("lcid_hump").model.kurtosis.mean()
    with capsys.disabled():
        print(f"\nINFO LCID hump Beta(3.59,3.59) proxy: mean kurtosis {kurt:.3f}")
    assert 4.2 <= kurt <= 7.6


def test_criterion_10_determinism(capsys, tmp_path):
    mismatched = []
    for name in BATCHES:
        one = run_batch(name)
        four = run_batch(name, threads=4)
        pairs = [(one.model.kurtosis, four.model.kurtosis), (one.model.increment_std, four.model.increment_std)]
        if one.model.terminal is not None:
            pairs.append((one.model.terminal, four.model.terminal))
        if one.baseline is not None:
            pairs += [(one.baseline.increment_std, four.baseline.increment_std), (one.increment_correlation, four.increment_correlation)]
        if not all(np.array_equal(x, y) for x, y in pairs) or one.summary() != four.summary():
            mismatched.append(name)
    cfg = ge_sampling_config(tmp_path)[0]
    if not np.array_equal(batch_run(cfg, 200).model.kurtosis, batch_run(cfg, 200, threads=3).model.kurtosis):
        mismatched.append("ge_pipeline")
    disc = Discretization(10, (1,), True, 1.0)
    tables = [
        estimate_microprice(*(lambda s: (s.imbalance, s.mid, s.spread))(simulate_toy_large_tick(ToyModelConfig(alpha=0.5, rng=RngSpec(20250507, 1)))), disc).adjustment
        for _ in range(2)
    ]
    if not np.array_equal(*tables):
        mismatched.append("toy_microprice")
    ok = not mismatched
    report(capsys, 10, ok, f"{len(BATCHES) + 2} acceptance runs repeated with 1 and several threads; "
           f"mismatches: {', '.join(mismatched) or 'none'}")
    assert ok
