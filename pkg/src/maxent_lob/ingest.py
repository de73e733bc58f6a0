"""Quote CSV loading, last-quote binning and session filtering."""
from __future__ import annotations

import csv
import io
import json
import math
import os
from dataclasses import dataclass, field
from datetime import datetime, time as dtime, timedelta
from typing import Iterable, Optional, TextIO, Union

import numpy as np

from .errors import InvalidInputError, QuoteParseError

__all__ = [
    "HEADER",
    "QuoteRecord",
    "FilterPolicy",
    "DropReport",
    "BinnedSeries",
    "DerivedSeries",
    "parse_quote_csv",
    "bin_last_quote",
    "apply_session_filter",
    "derive_series",
    "load_series",
    "series_to_csv",
    "read_series_csv",
]

HEADER = ("timestamp", "bid_price", "ask_price", "bid_size", "ask_size")


@dataclass(frozen=True)
class QuoteRecord:
    timestamp: datetime
    bid_price: float
    ask_price: float
    bid_size: float
    ask_size: float

    @property
    def locked(self) -> bool:
        return self.bid_price == self.ask_price


@dataclass(frozen=True)
class FilterPolicy:
    """Session window and trims, in the timestamps' own local time."""

    session_start: dtime = dtime(9, 30)
    session_end: dtime = dtime(16, 0)
    trim_minutes: int = 4
    drop_locked: bool = True
    drop_first_bin_change: bool = True

    def __post_init__(self):
        if self.trim_minutes < 0:
            raise InvalidInputError("trim_minutes must be >= 0")
        if not self.session_start < self.session_end:
            raise InvalidInputError("session_start must precede session_end")


@dataclass
class DropReport:
    """Row bookkeeping: ``input_rows == kept + sum(dropped.values())``."""

    input_rows: int = 0
    kept: int = 0
    dropped: dict = field(default_factory=dict)

    def add(self, reason: str, count: int = 1):
        if count:
            self.dropped[reason] = self.dropped.get(reason, 0) + count

    @property
    def balanced(self) -> bool:
        return self.input_rows == self.kept + sum(self.dropped.values())

    def to_json(self) -> str:
        return json.dumps(
            {"input_rows": self.input_rows, "kept": self.kept, "dropped": dict(sorted(self.dropped.items()))},
            indent=2,
        )


@dataclass
class BinnedSeries:
    """One record per bin; ``bin_start`` is the bin's label (floor of the time)."""

    bin_start: list
    records: list
    first_of_day: np.ndarray = None

    def __post_init__(self):
        if self.first_of_day is None:
            self.first_of_day = np.zeros(len(self.records), bool)

    def __len__(self):
        return len(self.records)


@dataclass
class DerivedSeries:
    """Aligned per-bin sequences plus mid changes that never cross a day break.

    ``mid_change[i]`` is ``mid[i+1] - mid[i]`` for each index in
    ``change_index`` (the later bin of the pair).
    """

    timestamp: list
    mid: np.ndarray
    weighted: np.ndarray
    theta: np.ndarray
    spread: np.ndarray
    day: np.ndarray
    mid_change: np.ndarray
    change_index: np.ndarray

    @property
    def q_bid(self) -> np.ndarray:
        return self.theta + 0.5


def _parse_time(text: str) -> datetime:
    s = text.strip()
    if s.endswith(("Z", "z")):
        s = s[:-1] + "+00:00"
    ts = datetime.fromisoformat(s)
    if ts.tzinfo is None:
        raise ValueError("timestamp lacks a UTC offset")
    return ts


def _num(text: str, name: str) -> float:
    v = float(text)
    if not math.isfinite(v):
        raise ValueError(f"{name} is not finite")
    return v


def parse_quote_csv(source: Union[str, os.PathLike, TextIO], report: Optional[DropReport] = None) -> list:
    """Read and validate quote rows.

    Crossed rows (bid > ask) are dropped and counted under ``"crossed"``;
    locked rows are kept for the session filter. Any malformed row aborts the
    whole file with a :class:`QuoteParseError` listing every bad line.
    """
    if isinstance(source, (str, os.PathLike)):
        name = os.fspath(source)
        with open(name, newline="", encoding="utf-8") as fh:
            return parse_quote_csv_stream(fh, report, name)
    return parse_quote_csv_stream(source, report, getattr(source, "name", "<stream>"))


def parse_quote_csv_stream(fh: TextIO, report: Optional[DropReport], name: str) -> list:
    report = DropReport() if report is None else report
    reader = csv.reader(fh)
    header = next(reader, None)
    if header is None or tuple(h.strip() for h in header) != HEADER:
        raise QuoteParseError([(1, f"header must be {','.join(HEADER)}, got {header!r}")], name)
    out, problems = [], []
    for row in reader:
        line = reader.line_num
        if not row or all(not c.strip() for c in row):
            continue
        report.input_rows += 1
        if len(row) != len(HEADER):
            problems.append((line, f"expected {len(HEADER)} fields, got {len(row)}"))
            continue
        try:
            ts = _parse_time(row[0])
            bid, ask = _num(row[1], "bid_price"), _num(row[2], "ask_price")
            qb, qa = _num(row[3], "bid_size"), _num(row[4], "ask_size")
        except ValueError as exc:
            problems.append((line, str(exc)))
            continue
        if bid <= 0 or ask <= 0:
            problems.append((line, "prices must be positive"))
            continue
        if qb <= 0 or qa <= 0:
            problems.append((line, "sizes must be positive"))
            continue
        if bid > ask:
            report.add("crossed")
            continue
        out.append(QuoteRecord(ts, bid, ask, qb, qa))
    if problems:
        raise QuoteParseError(problems, name)
    return out


def bin_last_quote(records: Iterable[QuoteRecord], minutes: int = 1, report: Optional[DropReport] = None) -> BinnedSeries:
    """Keep the chronologically last quote per bin; ties go to the later row in file order.

    Bins are labelled by flooring the local wall-clock time. Empty bins are
    omitted.
    """
    if minutes < 1:
        raise InvalidInputError("bin width must be at least one minute")
    recs = list(records)
    order = sorted(range(len(recs)), key=lambda i: recs[i].timestamp)  # stable
    last = {}
    for i in order:
        ts = recs[i].timestamp
        floor_min = (ts.hour * 60 + ts.minute) // minutes * minutes
        label = ts.replace(hour=floor_min // 60, minute=floor_min % 60, second=0, microsecond=0)
        last[label] = i
    labels = sorted(last)
    if report is not None:
        report.add("superseded_in_bin", len(recs) - len(labels))
    return BinnedSeries(labels, [recs[last[k]] for k in labels])


def apply_session_filter(binned: BinnedSeries, policy: Optional[FilterPolicy] = None, report: Optional[DropReport] = None) -> BinnedSeries:
    """Keep bins labelled strictly between ``start + trim`` and ``end - trim``.

    With the defaults the first retained bin of a day is 09:35 and the last
    15:55. Locked books are dropped when ``drop_locked``. The first retained
    bin of each day is flagged so that its change is skipped downstream.
    Applying the filter twice gives the same result.
    """
    policy = FilterPolicy() if policy is None else policy
    trim = timedelta(minutes=policy.trim_minutes)
    keep_labels, keep_recs = [], []
    outside = locked = 0
    for label, rec in zip(binned.bin_start, binned.records):
        day = label.date()
        start = datetime.combine(day, policy.session_start, label.tzinfo) + trim
        end = datetime.combine(day, policy.session_end, label.tzinfo) - trim
        if not start < label < end:
            outside += 1
            continue
        if policy.drop_locked and rec.bid_price >= rec.ask_price:
            locked += 1
            continue
        keep_labels.append(label)
        keep_recs.append(rec)
    first = np.zeros(len(keep_labels), bool)
    if policy.drop_first_bin_change:
        prev_day = None
        for i, label in enumerate(keep_labels):
            if label.date() != prev_day:
                first[i] = True
                prev_day = label.date()
    if report is not None:
        report.add("outside_session", outside)
        report.add("locked", locked)
    return BinnedSeries(keep_labels, keep_recs, first)


def derive_series(filtered: BinnedSeries) -> DerivedSeries:
    """Mid, weighted mid, theta and spread per bin, and day-safe mid changes.

    A change into bin ``i`` is kept only when bins ``i-1`` and ``i`` share a
    date and bin ``i-1`` is not a flagged first bin.
    """
    recs = filtered.records
    bid = np.array([r.bid_price for r in recs], float)
    ask = np.array([r.ask_price for r in recs], float)
    qb = np.array([r.bid_size for r in recs], float)
    qa = np.array([r.ask_size for r in recs], float)
    q = qb / (qb + qa) if recs else np.zeros(0)
    mid = 0.5 * (bid + ask)
    weighted = q * ask + (1 - q) * bid
    dates = [lab.date() for lab in filtered.bin_start]
    day_codes = {d: i for i, d in enumerate(sorted(set(dates)))}
    day = np.array([day_codes[d] for d in dates], int)
    first = np.asarray(filtered.first_of_day, bool)
    idx = np.arange(1, len(recs))
    ok = (day[1:] == day[:-1]) & ~first[:-1] if len(recs) > 1 else np.zeros(0, bool)
    idx = idx[ok]
    return DerivedSeries(
        list(filtered.bin_start),
        mid,
        weighted,
        q - 0.5,
        ask - bid,
        day,
        mid[idx] - mid[idx - 1],
        idx,
    )


def load_series(source, policy: Optional[FilterPolicy] = None, minutes: int = 1):
    """Parse, bin, filter and derive in one go. Returns ``(series, report)``."""
    report = DropReport()
    records = parse_quote_csv(source, report)
    binned = bin_last_quote(records, minutes, report)
    filtered = apply_session_filter(binned, policy, report)
    report.kept = len(filtered)
    return derive_series(filtered), report


def _fmt(x: float) -> str:
    return f"{x + 0.0:.9g}"


def series_to_csv(series: DerivedSeries) -> str:
    buf = io.StringIO()
    w = csv.writer(buf, lineterminator="\n")
    w.writerow(["timestamp", "mid", "weighted", "theta", "spread"])
    for i, ts in enumerate(series.timestamp):
        w.writerow([ts.isoformat(), _fmt(series.mid[i]), _fmt(series.weighted[i]), _fmt(series.theta[i]), _fmt(series.spread[i])])
    return buf.getvalue()


def read_series_csv(source) -> dict:
    """Read any numeric CSV with a header into ``{column: array}``.

    Non-numeric columns (such as ``timestamp``) are kept as lists of strings.
    """
    if isinstance(source, (str, os.PathLike)):
        with open(source, newline="", encoding="utf-8") as fh:
            return read_series_csv(fh)
    reader = csv.reader(source)
    header = next(reader, None)
    if not header:
        raise QuoteParseError([(1, "missing header")], getattr(source, "name", "<stream>"))
    cols = {h.strip(): [] for h in header}
    names = list(cols)
    problems = []
    for row in reader:
        if not row:
            continue
        if len(row) != len(names):
            problems.append((reader.line_num, f"expected {len(names)} fields, got {len(row)}"))
            continue
        for n, v in zip(names, row):
            cols[n].append(v.strip())
    if problems:
        raise QuoteParseError(problems, getattr(source, "name", "<stream>"))
    out = {}
    for n, vals in cols.items():
        try:
            out[n] = np.array([float(v) for v in vals], float)
        except ValueError:
            out[n] = vals
    return out
