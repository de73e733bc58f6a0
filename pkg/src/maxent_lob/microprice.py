"""Micro-price estimation on discretised imbalance/spread states, and a large-tick toy model.

The estimator treats consecutive observations as a Markov chain on
``(imbalance bucket, spread state)``. Transitions without a mid change are
continuation moves ``Q``; transitions with a mid change are absorbing moves
``T`` carrying the observed change. Then

    g1     = (I - Q)^{-1} r        with r the mean mid change per state
    g(k+1) = (I - Q)^{-1} T g(k)

and the adjustment is the partial sum of the ``g(k)``.
"""
from __future__ import annotations

import csv
import io
from dataclasses import dataclass, field
from typing import Optional, Sequence

import numpy as np

from .errors import InvalidInputError, MissingStateError
from .stochastics import RngSpec

__all__ = [
    "Discretization",
    "TransitionModel",
    "MicropriceTable",
    "ToyModelConfig",
    "ToySeries",
    "MISSING",
    "build_transition_model",
    "estimate_microprice",
    "microprice_series",
    "simulate_toy_large_tick",
    "analytic_toy_microprice",
    "analytic_toy_table",
    "table_to_csv",
]

MISSING = "NA"


@dataclass(frozen=True)
class Discretization:
    """Equal-width imbalance buckets on [0, 1] and spread states in ticks."""

    n_imbalance_buckets: int = 10
    spread_states: tuple = (1,)
    symmetrize: bool = True
    tick: float = 0.01

    def __post_init__(self):
        if int(self.n_imbalance_buckets) != self.n_imbalance_buckets or self.n_imbalance_buckets < 2:
            raise InvalidInputError("need at least 2 imbalance buckets")
        states = tuple(int(s) for s in self.spread_states)
        if not states or any(s < 1 for s in states) or list(states) != sorted(set(states)):
            raise InvalidInputError("spread_states must be sorted, distinct, positive tick multiples")
        object.__setattr__(self, "spread_states", states)
        if not self.tick > 0:
            raise InvalidInputError("tick must be positive")

    @property
    def n_states(self) -> int:
        return self.n_imbalance_buckets * len(self.spread_states)

    @property
    def edges(self) -> np.ndarray:
        return np.linspace(0.0, 1.0, self.n_imbalance_buckets + 1)

    @property
    def midpoints(self) -> np.ndarray:
        e = self.edges
        return 0.5 * (e[:-1] + e[1:])

    def bucket(self, imbalance) -> np.ndarray:
        q = np.asarray(imbalance, float)
        if np.any((q < 0) | (q > 1)) or not np.all(np.isfinite(q)):
            raise InvalidInputError("imbalance must lie in [0, 1]")
        return np.minimum((q * self.n_imbalance_buckets).astype(int), self.n_imbalance_buckets - 1)

    def spread_index(self, spread) -> np.ndarray:
        """Nearest spread state, measured in ticks."""
        ticks = np.asarray(spread, float) / self.tick
        states = np.asarray(self.spread_states, float)
        return np.abs(ticks[..., None] - states).argmin(axis=-1)

    def state(self, imbalance, spread) -> np.ndarray:
        return self.spread_index(spread) * self.n_imbalance_buckets + self.bucket(imbalance)

    def mirror(self) -> np.ndarray:
        """State index under ``theta -> -theta`` (bucket ``b -> n-1-b``)."""
        idx = np.arange(self.n_states)
        k, b = np.divmod(idx, self.n_imbalance_buckets)
        return k * self.n_imbalance_buckets + (self.n_imbalance_buckets - 1 - b)


@dataclass
class TransitionModel:
    """Transition counts between consecutive observations.

    ``continuation[s, s']``: no mid change; ``absorbing[s, s']``: mid changed,
    with the changes summed per origin state in ``mid_change_sum``.
    """

    disc: Discretization
    continuation: np.ndarray
    absorbing: np.ndarray
    mid_change_sum: np.ndarray

    @property
    def row_counts(self) -> np.ndarray:
        return self.continuation.sum(axis=1) + self.absorbing.sum(axis=1)

    @property
    def visited(self) -> np.ndarray:
        return self.row_counts > 0

    def probabilities(self):
        """``(Q, T, r)`` normalised per visited row; unvisited rows stay zero."""
        n = self.row_counts
        safe = np.where(n > 0, n, 1.0)
        return self.continuation / safe[:, None], self.absorbing / safe[:, None], self.mid_change_sum / safe


@dataclass
class MicropriceTable:
    """Cumulative adjustment per state, in price units.

    ``terms[k]`` is ``g(k+1)``; ``missing`` marks states never observed;
    ``nonconvergent`` marks visited states from which no mid change was ever
    reached (their terms are zero). ``residuals`` holds ``max |g(k)|`` for
    each term after the first.
    """

    disc: Discretization
    adjustment: np.ndarray
    terms: list
    missing: np.ndarray
    nonconvergent: np.ndarray
    residuals: list = field(default_factory=list)

    @property
    def iterations(self) -> int:
        return len(self.terms)

    @property
    def converged(self) -> bool:
        return not self.nonconvergent[~self.missing].any()

    def grid(self) -> np.ndarray:
        """Adjustments shaped ``(spread_state, bucket)``; missing entries are NaN."""
        out = np.where(self.missing, np.nan, self.adjustment)
        return out.reshape(len(self.disc.spread_states), self.disc.n_imbalance_buckets)


def _segments(n: int, segments) -> np.ndarray:
    """Boolean mask of usable transitions ``t -> t+1``."""
    ok = np.ones(max(n - 1, 0), bool)
    if segments is not None:
        seg = np.asarray(segments)
        if seg.shape != (n,):
            raise InvalidInputError("segments must align with the series")
        ok &= seg[1:] == seg[:-1]
    return ok


def build_transition_model(imbalance, mid, spread, disc: Discretization, segments=None) -> TransitionModel:
    q = np.asarray(imbalance, float)
    m = np.asarray(mid, float)
    s = np.broadcast_to(np.asarray(spread, float), q.shape)
    if q.ndim != 1 or m.shape != q.shape:
        raise InvalidInputError("imbalance, mid and spread must be aligned 1-d sequences")
    if q.size == 0:
        raise InvalidInputError("empty quote series")
    if not np.all(np.isfinite(m)):
        raise InvalidInputError("mid prices must be finite")
    state = disc.state(q, s)
    ok = _segments(q.size, segments)
    a, b = state[:-1][ok], state[1:][ok]
    dm = (m[1:] - m[:-1])[ok]
    moved = np.abs(dm) > 1e-9 * disc.tick
    n = disc.n_states
    cont = np.zeros((n, n))
    absb = np.zeros((n, n))
    np.add.at(cont, (a[~moved], b[~moved]), 1.0)
    np.add.at(absb, (a[moved], b[moved]), 1.0)
    dsum = np.bincount(a[moved], weights=dm[moved], minlength=n).astype(float)
    model = TransitionModel(disc, cont, absb, dsum)
    if disc.symmetrize:
        mir = disc.mirror()
        model = TransitionModel(
            disc,
            cont + cont[np.ix_(mir, mir)],
            absb + absb[np.ix_(mir, mir)],
            dsum - dsum[mir],
        )
    return model


def _reaches_absorption(model: TransitionModel) -> np.ndarray:
    """States from which some absorbing transition is reachable via continuation moves."""
    adj = model.continuation > 0
    reach = model.absorbing.sum(axis=1) > 0
    while True:
        new = reach | (adj & reach[None, :]).any(axis=1)
        if np.array_equal(new, reach):
            return reach
        reach = new


def estimate_microprice(
    imbalance,
    mid,
    spread,
    disc: Optional[Discretization] = None,
    iterations: int = 6,
    segments=None,
    tol_ticks: float = 1e-4,
) -> MicropriceTable:
    """Estimate the micro-price adjustment table from an observed quote series.

    ``segments`` (e.g. trading-day labels) stops transitions across breaks.
    Iteration stops early once ``max |g(k)|`` drops below ``tol_ticks`` ticks.
    """
    disc = Discretization() if disc is None else disc
    if int(iterations) != iterations or iterations < 1:
        raise InvalidInputError("iterations must be a positive integer")
    model = build_transition_model(imbalance, mid, spread, disc, segments)
    Q, T, r = model.probabilities()
    missing = ~model.visited
    live = _reaches_absorption(model) & ~missing
    nonconv = ~live & ~missing

    n = disc.n_states
    idx = np.flatnonzero(live)
    solve_mat = np.eye(idx.size) - Q[np.ix_(idx, idx)]

    def propagate(vec):
        out = np.zeros(n)
        if idx.size:
            out[idx] = np.linalg.solve(solve_mat, vec[idx])
        return out

    terms = [propagate(r)]
    residuals = []
    for _ in range(int(iterations) - 1):
        g = propagate(T @ terms[-1])
        terms.append(g)
        residuals.append(float(np.abs(g).max()))
        if residuals[-1] < tol_ticks * disc.tick:
            break
    total = np.sum(terms, axis=0)
    return MicropriceTable(disc, total, terms, missing, nonconv, residuals)


def microprice_series(imbalance, mid, spread, table: MicropriceTable, interpolate: bool = True) -> np.ndarray:
    """Mid plus the table adjustment for each quote.

    With ``interpolate`` the adjustment is linear in imbalance between bucket
    midpoints (flat beyond the outer midpoints), so a balanced book maps to
    the mid under a symmetric table. Otherwise the quote's own bucket is used.
    Any lookup touching a missing state raises :class:`MissingStateError`.
    """
    disc = table.disc
    q = np.asarray(imbalance, float)
    m = np.asarray(mid, float)
    k = disc.spread_index(np.broadcast_to(np.asarray(spread, float), q.shape))
    nb = disc.n_imbalance_buckets
    if interpolate:
        pos = np.clip(q * nb - 0.5, 0.0, nb - 1.0)
        lo = np.minimum(np.floor(pos).astype(int), nb - 2)
        w = pos - lo
        s_lo, s_hi = k * nb + lo, k * nb + lo + 1
        need = table.missing[s_lo] | (table.missing[s_hi] & (w > 0))
        adj = (1 - w) * table.adjustment[s_lo] + w * table.adjustment[s_hi]
    else:
        s = k * nb + disc.bucket(q)
        need = table.missing[s]
        adj = table.adjustment[s]
    if np.any(need):
        first = int(np.flatnonzero(need)[0])
        raise MissingStateError(f"quote {first} maps to an unobserved state")
    return m + adj


@dataclass(frozen=True)
class ToyModelConfig:
    """Large-tick toy model run on a lattice of ``lattice`` steps over [0, 1].

    One emitted event is ``sample_every`` lattice steps of the imbalance walk.
    """

    alpha: float = 0.5
    epsilon_perturb: float = 0.25
    tick: float = 1.0
    events: int = 200_000
    rng: RngSpec = field(default_factory=RngSpec)
    initial_imbalance: float = 0.5
    lattice: int = 40
    sample_every: int = 10

    def __post_init__(self):
        if not 0 <= self.alpha <= 1:
            raise InvalidInputError("alpha must lie in [0, 1]")
        if not 0 < self.epsilon_perturb < 0.5:
            raise InvalidInputError("epsilon_perturb must lie in (0, 1/2)")
        if not 0 < self.initial_imbalance < 1:
            raise InvalidInputError("initial imbalance must lie in (0, 1)")
        if not self.tick > 0:
            raise InvalidInputError("tick must be positive")
        if self.events < 1 or self.sample_every < 1 or self.lattice < 4:
            raise InvalidInputError("events, sample_every must be >= 1 and lattice >= 4")
        if not 1 <= round(self.epsilon_perturb * self.lattice) < self.lattice / 2:
            raise InvalidInputError("lattice too coarse to resolve epsilon_perturb")


@dataclass
class ToySeries:
    """Event-level toy output plus the per-hit record (side +1 at 1, -1 at 0)."""

    imbalance: np.ndarray
    mid: np.ndarray
    spread: np.ndarray
    hit_side: np.ndarray
    jumped: np.ndarray


def simulate_toy_large_tick(config: ToyModelConfig) -> ToySeries:
    """Imbalance as a symmetric lattice walk, absorbed at 0 and 1.

    At a hit the mid moves half a tick toward the hit side with probability
    ``alpha`` and the walk restarts at ``epsilon`` or ``1 - epsilon`` with
    equal probability. The lattice has no overshoot at the boundary.
    """
    K = int(config.lattice)
    eps_pos = int(round(config.epsilon_perturb * K))
    steps_total = int(config.events) * int(config.sample_every)
    gen_walk = config.rng.generator(0)
    gen_hit = config.rng.generator(1)

    pos_all = np.empty(steps_total, np.int64)
    dm_all = np.zeros(steps_total)
    sides, jumps = [], []
    pos = min(max(int(round(config.initial_imbalance * K)), 1), K - 1)
    half = 0.5 * config.tick
    t = 0
    chunk = 1024
    while t < steps_total:
        n = min(chunk, steps_total - t)
        path = pos + np.cumsum(gen_walk.integers(0, 2, n) * 2 - 1)
        hit = np.flatnonzero((path <= 0) | (path >= K))
        if hit.size == 0:
            pos_all[t:t + n] = path
            pos = int(path[-1])
            t += n
            continue
        h = int(hit[0])
        pos_all[t:t + h] = path[:h]
        side = 1 if path[h] >= K else -1
        jumped = gen_hit.random() < config.alpha
        pos = eps_pos if gen_hit.random() < 0.5 else K - eps_pos
        pos_all[t + h] = pos
        if jumped:
            dm_all[t + h] = side * half
        sides.append(side)
        jumps.append(jumped)
        t += h + 1

    mid_path = np.cumsum(dm_all)
    keep = slice(config.sample_every - 1, None, config.sample_every)
    imb = pos_all[keep] / K
    mids = mid_path[keep]
    return ToySeries(
        imb,
        mids,
        np.full(imb.size, config.tick),
        np.asarray(sides, int),
        np.asarray(jumps, bool),
    )


def analytic_toy_microprice(alpha: float, book) -> np.ndarray:
    """``(1 - alpha) mid + alpha weighted``."""
    from .core_prices import mid_price, weighted_mid_price

    if not 0 <= alpha <= 1:
        raise InvalidInputError("alpha must lie in [0, 1]")
    return (1 - alpha) * mid_price(book) + alpha * weighted_mid_price(book)


def analytic_toy_table(alpha: float, disc: Discretization, spread_ticks: Optional[Sequence[float]] = None) -> np.ndarray:
    """``alpha (I - 1/2) S`` at bucket midpoints, shaped ``(spread_state, bucket)``."""
    s = np.asarray(disc.spread_states if spread_ticks is None else spread_ticks, float) * disc.tick
    return alpha * (disc.midpoints[None, :] - 0.5) * s[:, None]


def table_to_csv(table: MicropriceTable, fmt: str = "{:.9g}") -> str:
    disc = table.disc
    buf = io.StringIO()
    w = csv.writer(buf, lineterminator="\n")
    w.writerow(["bucket_low", "bucket_high", "spread_state", "adjustment"])
    edges = disc.edges
    grid = table.grid()
    for k, st in enumerate(disc.spread_states):
        for b in range(disc.n_imbalance_buckets):
            v = grid[k, b]
            w.writerow([fmt.format(edges[b]), fmt.format(edges[b + 1]), st, MISSING if np.isnan(v) else fmt.format(v + 0.0)])
    return buf.getvalue()
