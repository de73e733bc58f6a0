"""Command-line driver: ``maxent-lob <command> ...``.

Settings resolve as flags > ``MAXENT_LOB_*`` environment variables > config
file. Numbers are written with 9 significant digits.
"""
from __future__ import annotations

import argparse
import csv
import io
import json
import math
import sys
from dataclasses import replace
from typing import Optional

import numpy as np

from . import core_prices as cp
from . import ingest
from .config import canned_names, canned_path, env_overrides, load_config
from .dynamics import SamplingConfig, batch_run, sample_changes, simulate
from .errors import (
    ConfigError,
    FitInfeasibleError,
    InvalidInputError,
    MaxentLobError,
    MissingStateError,
    NumericFailureError,
    QuoteParseError,
    UndefinedStatisticError,
)
from .impact import impact_curve
from .microprice import (
    Discretization,
    ToyModelConfig,
    estimate_microprice,
    microprice_series,
    simulate_toy_large_tick,
    table_to_csv,
)
from .stochastics import RngSpec, SummaryStats, fit_beta_mom, fit_gamma_mom, gaussian_kde, silverman_bandwidth

EXIT_OK = 0
EXIT_USAGE = 2
EXIT_PARSE = 3
EXIT_CONFIG = 4
EXIT_NUMERIC = 5
EXIT_INVALID = 6

_EXIT_FOR = (
    (QuoteParseError, EXIT_PARSE),
    (ConfigError, EXIT_CONFIG),
    (NumericFailureError, EXIT_NUMERIC),
    (InvalidInputError, EXIT_INVALID),
    (FitInfeasibleError, EXIT_INVALID),
    (UndefinedStatisticError, EXIT_INVALID),
    (MissingStateError, EXIT_INVALID),
)


def fmt(x) -> str:
    x = float(x)
    if math.isnan(x):
        return "nan"
    return f"{x + 0.0:.9g}"


def _round(obj):
    """Recursively round floats to 9 significant digits for stable JSON."""
    if isinstance(obj, SummaryStats):
        obj = obj.to_dict()
    if isinstance(obj, dict):
        return {k: _round(v) for k, v in obj.items()}
    if isinstance(obj, (list, tuple)):
        return [_round(v) for v in obj]
    if isinstance(obj, (float, np.floating)):
        v = float(obj)
        return v if not math.isfinite(v) else float(f"{v:.9g}") + 0.0
    if isinstance(obj, np.integer):
        return int(obj)
    return obj


def _dumps(obj) -> str:
    return json.dumps(_round(obj), indent=2, sort_keys=False) + "\n"


def _write(text: str, path: Optional[str]):
    if path in (None, "-"):
        sys.stdout.write(text)
    else:
        with open(path, "w", encoding="utf-8", newline="") as fh:
            fh.write(text)


def _csv(header, rows) -> str:
    buf = io.StringIO()
    w = csv.writer(buf, lineterminator="\n")
    w.writerow(header)
    for r in rows:
        w.writerow([v if isinstance(v, str) else fmt(v) for v in r])
    return buf.getvalue()


def _float_list(text: str):
    try:
        return [float(t) for t in text.split(",") if t.strip()]
    except ValueError as exc:
        raise InvalidInputError(f"expected comma-separated numbers, got {text!r}") from exc


def _policy(args) -> ingest.FilterPolicy:
    from datetime import time

    def t(s):
        hh, mm = s.split(":")
        return time(int(hh), int(mm))

    try:
        return ingest.FilterPolicy(t(args.session_start), t(args.session_end), args.trim)
    except ValueError as exc:
        raise InvalidInputError(f"bad session window: {exc}") from exc


def _overrides(args) -> dict:
    env = env_overrides()
    out = {}
    for key in ("seed", "runs", "steps", "threads", "beta", "sigma", "eta", "dt", "format"):
        flag = getattr(args, key, None)
        out[key] = flag if flag is not None else env.get(key)
    return out


def _config_name(args) -> str:
    name = args.config or env_overrides().get("config")
    if not name:
        raise ConfigError("no --config given (or MAXENT_LOB_CONFIG)")
    return name


# commands


def cmd_prices(args) -> int:
    series, report = ingest.load_series(args.quotes, _policy(args))
    betas = _float_list(args.beta) if args.beta else [0.0, 1.0, 2.0]
    n = len(series.timestamp)
    bid = series.mid - series.spread / 2
    ask = series.mid + series.spread / 2
    header = ["timestamp", "mid", "weighted", "equilibrium", "quasi_equilibrium"] + [f"boltzmann_{fmt(b)}" for b in betas]
    rows = []
    if n:
        q = series.q_bid
        book = cp.TopOfBook(bid, ask, q, 1.0 - q) if np.all((q > 0) & (q < 1)) else None
        if book is None:
            raise InvalidInputError("derived imbalance outside (0, 1)")
        cols = [series.mid, series.weighted, cp.equilibrium_price(book), cp.quasi_equilibrium_price(book)]
        cols += [cp.boltzmann_price(book, b) for b in betas]
        for i in range(n):
            rows.append([series.timestamp[i].isoformat()] + [c[i] for c in cols])
    if args.drop_report:
        _write(report.to_json() + "\n", args.drop_report)
    if args.series_out:
        _write(ingest.series_to_csv(series), args.series_out)
    _write(_csv(header, rows), args.out)
    return EXIT_OK


def _per_run_rows(result):
    m = result.model
    cols = [("kurtosis", m.kurtosis), ("increment_mean", m.increment_mean), ("increment_std", m.increment_std)]
    if m.terminal is not None:
        cols.append(("terminal_price", m.terminal))
    if result.baseline is not None:
        b = result.baseline
        cols += [("baseline_kurtosis", b.kurtosis), ("baseline_increment_std", b.increment_std)]
        if b.terminal is not None:
            cols.append(("baseline_terminal_price", b.terminal))
        cols.append(("increment_correlation", result.increment_correlation))
    header = ["run"] + [c[0] for c in cols]
    rows = [[str(i)] + [c[1][i] for c in cols] for i in range(result.runs)]
    return header, rows


def cmd_simulate(args) -> int:
    exp = load_config(_config_name(args), _overrides(args))
    if exp.kind == "simulation":
        cfg, base = replace(exp.sim, rng=RngSpec(exp.seed)), exp.baseline
    elif exp.kind == "sampling":
        cfg, base = replace(exp.sampling, rng=RngSpec(exp.seed)), None
    else:
        raise ConfigError(f"simulate needs a simulation or sampling config, got kind={exp.kind!r}")
    result = batch_run(cfg, exp.runs, baseline=base, threads=exp.threads, master_seed=exp.seed)
    if exp.format == "json":
        out = {"config": _config_name(args), "kind": exp.kind}
        out.update(result.summary())
        _write(_dumps(out), args.out)
    else:
        header, rows = _per_run_rows(result)
        _write(_csv(header, rows), args.out)
    if args.per_run_out:
        header, rows = _per_run_rows(result)
        _write(_csv(header, rows), args.per_run_out)
    if args.path_out:
        rng = RngSpec(exp.seed, 0)
        if isinstance(cfg, SamplingConfig):
            inc = sample_changes(replace(cfg, rng=rng))
            _write(_csv(["index", "change"], [[str(i), v] for i, v in enumerate(inc)]), args.path_out)
        else:
            path = simulate(replace(cfg, rng=rng))
            header = ["step", "price"]
            cols = [path.prices]
            if base is not None:
                header.append("baseline_price")
                cols.append(simulate(replace(base, rng=rng)).prices)
            rows = [[str(i)] + [c[i] for c in cols] for i in range(path.prices.size)]
            _write(_csv(header, rows), args.path_out)
    return EXIT_OK


def _column(data: dict, name: Optional[str], fallbacks) -> tuple:
    for key in ([name] if name else list(fallbacks)):
        if key in data and isinstance(data[key], np.ndarray):
            return key, data[key]
    if name:
        raise InvalidInputError(f"column {name!r} missing or non-numeric")
    numeric = [k for k, v in data.items() if isinstance(v, np.ndarray)]
    if not numeric:
        raise InvalidInputError("no numeric column found")
    return numeric[0], data[numeric[0]]


def cmd_fit(args) -> int:
    data = ingest.read_series_csv(args.series)
    if args.dist == "beta":
        if args.column is None and "theta" in data and "q" not in data and isinstance(data["theta"], np.ndarray):
            col, x = "theta+0.5", data["theta"] + 0.5
        else:
            col, x = _column(data, args.column, ("q", "q_bid", "imbalance"))
        dist = fit_beta_mom(x)
    else:
        col, x = _column(data, args.column, ("spread",))
        dist = fit_gamma_mom(x)
    out = {
        "column": col,
        "distribution": dist.to_mapping(),
        "sample": {"count": int(x.size), "mean": float(x.mean()), "variance": float(x.var())},
        "fitted": {"mean": dist.mean, "variance": dist.variance},
    }
    _write(_dumps(out), args.out)
    return EXIT_OK


def cmd_impact(args) -> int:
    if args.config:
        exp = load_config(args.config, {"beta": args.beta_single})
        if exp.kind != "impact":
            raise ConfigError("impact needs an impact config")
        imp = exp.impact
        spread, betas = imp["spread"], imp["beta"]
        grid = np.linspace(imp["grid_min"], imp["grid_max"], imp["grid_points"])
    else:
        spread = args.spread
        betas = _float_list(args.beta) if args.beta else [1.0]
        grid = _grid(args.grid)
    curves = [impact_curve(spread, b, grid) for b in betas]
    header = ["theta"] + [f"boltzmann_{fmt(b)}" for b in betas] + ["weighted", "mid"]
    rows = [[grid[i]] + [c.price_change[i] for c in curves] + [curves[0].weighted[i], curves[0].mid[i]] for i in range(grid.size)]
    _write(_csv(header, rows), args.out)
    return EXIT_OK


def _grid(text: str) -> np.ndarray:
    """``lo:hi:n`` for a linspace, or a comma list."""
    if ":" in text:
        parts = text.split(":")
        if len(parts) != 3:
            raise InvalidInputError("grid must be lo:hi:n or a comma list")
        try:
            return np.linspace(float(parts[0]), float(parts[1]), int(parts[2]))
        except ValueError as exc:
            raise InvalidInputError(str(exc)) from exc
    return np.asarray(_float_list(text))


def cmd_microprice(args) -> int:
    states = tuple(int(s) for s in _float_list(args.spread_states))
    if args.config:
        exp = load_config(args.config, {"seed": args.seed})
        if exp.kind != "microprice":
            raise ConfigError("microprice --config needs a microprice config")
        toy, disc, iterations = exp.toy, exp.disc, exp.iterations
        series = simulate_toy_large_tick(toy)
        q, mid, spread, seg = series.imbalance, series.mid, series.spread, None
    elif args.toy is not None:
        toy = ToyModelConfig(alpha=args.toy, events=args.events, rng=RngSpec(args.seed or 0))
        disc = Discretization(args.buckets, states, True, toy.tick)
        iterations = args.iterations
        series = simulate_toy_large_tick(toy)
        q, mid, spread, seg = series.imbalance, series.mid, series.spread, None
    elif args.quotes:
        derived, _ = ingest.load_series(args.quotes, _policy(args))
        disc = Discretization(args.buckets, states, True, args.tick)
        iterations = args.iterations
        q, mid, spread, seg = derived.q_bid, derived.mid, derived.spread, derived.day
        series = derived
    else:
        raise InvalidInputError("give a quotes CSV, --toy ALPHA or --config")
    table = estimate_microprice(q, mid, spread, disc, iterations, segments=seg)
    _write(table_to_csv(table), args.out)
    if args.series_out:
        micro = microprice_series(q, mid, spread, table)
        rows = [[str(i), q[i], mid[i], micro[i]] for i in range(len(q))]
        _write(_csv(["index", "q_bid", "mid", "microprice"], rows), args.series_out)
    if not table.converged:
        print("warning: some states never reach a mid change; their adjustment is 0", file=sys.stderr)
    return EXIT_OK


def cmd_stats(args) -> int:
    data = ingest.read_series_csv(args.series)
    col, x = _column(data, args.column, ())
    if args.diff:
        x = np.diff(x)
    x = x[np.isfinite(x)]
    stats = SummaryStats.from_samples(x)
    out = {"column": col, "diff": bool(args.diff), "stats": stats}
    if args.kde_out:
        h = silverman_bandwidth(x)
        pad = 6 * h
        pts = np.linspace(x.min() - pad, x.max() + pad, args.kde_points)
        dens = gaussian_kde(x, pts, h)
        _write(_csv(["x", "density"], zip(pts, dens)), args.kde_out)
        out["kde_bandwidth"] = h
    _write(_dumps(out), args.out)
    return EXIT_OK


def cmd_configs(args) -> int:
    if args.action == "list":
        _write("".join(f"{n}\n" for n in canned_names()), None)
    else:
        if args.name not in canned_names():
            raise ConfigError(f"unknown canned config {args.name!r}")
        _write(canned_path(args.name).read_text(encoding="utf-8"), None)
    return EXIT_OK


def build_parser() -> argparse.ArgumentParser:
    p = argparse.ArgumentParser(prog="maxent-lob", description=__doc__.splitlines()[0])
    p.add_argument("--json-errors", action="store_true", help="report errors as JSON on stderr")
    sub = p.add_subparsers(dest="command", required=True)

    def session(sp):
        sp.add_argument("--session-start", default="09:30")
        sp.add_argument("--session-end", default="16:00")
        sp.add_argument("--trim", type=int, default=4, help="minutes trimmed at each end")

    sp = sub.add_parser("prices", help="reference prices for a quote CSV")
    sp.add_argument("quotes")
    sp.add_argument("--beta", help="comma-separated beta values (default 0,1,2)")
    sp.add_argument("--out")
    sp.add_argument("--drop-report", help="write the JSON drop report here")
    sp.add_argument("--series-out", help="write timestamp,mid,weighted,theta,spread here")
    session(sp)
    sp.set_defaults(func=cmd_prices)

    sp = sub.add_parser("simulate", help="batch Monte Carlo from a config")
    sp.add_argument("--config")
    sp.add_argument("--runs", type=int)
    sp.add_argument("--seed", type=int)
    sp.add_argument("--steps", type=int)
    sp.add_argument("--beta", type=float)
    sp.add_argument("--sigma", type=float)
    sp.add_argument("--eta", type=float)
    sp.add_argument("--dt", type=float)
    sp.add_argument("--threads", type=int)
    sp.add_argument("--format", choices=("json", "csv"))
    sp.add_argument("--out")
    sp.add_argument("--per-run-out")
    sp.add_argument("--path-out", help="write the run-0 path (or sampled changes) here")
    sp.set_defaults(func=cmd_simulate)

    sp = sub.add_parser("fit", help="method-of-moments fit of a series column")
    sp.add_argument("series")
    sp.add_argument("--dist", choices=("beta", "gamma"), required=True)
    sp.add_argument("--column")
    sp.add_argument("--out")
    sp.set_defaults(func=cmd_fit)

    sp = sub.add_parser("impact", help="impact curves over a theta grid")
    sp.add_argument("--spread", type=float, default=0.02)
    sp.add_argument("--beta", help="comma-separated beta values (default 1)")
    sp.add_argument("--grid", default="-0.5:0.5:11")
    sp.add_argument("--config")
    sp.add_argument("--out")
    sp.set_defaults(func=cmd_impact, beta_single=None)

    sp = sub.add_parser("microprice", help="micro-price adjustment table")
    sp.add_argument("quotes", nargs="?")
    sp.add_argument("--toy", type=float, metavar="ALPHA")
    sp.add_argument("--config")
    sp.add_argument("--buckets", type=int, default=10)
    sp.add_argument("--spread-states", default="1")
    sp.add_argument("--tick", type=float, default=0.01)
    sp.add_argument("--iterations", type=int, default=6)
    sp.add_argument("--events", type=int, default=200_000)
    sp.add_argument("--seed", type=int)
    sp.add_argument("--out")
    sp.add_argument("--series-out")
    session(sp)
    sp.set_defaults(func=cmd_microprice)

    sp = sub.add_parser("stats", help="summary statistics and optional KDE of a column")
    sp.add_argument("series")
    sp.add_argument("--column")
    sp.add_argument("--diff", action="store_true", help="use first differences")
    sp.add_argument("--kde-out")
    sp.add_argument("--kde-points", type=int, default=512)
    sp.add_argument("--out")
    sp.set_defaults(func=cmd_stats)

    sp = sub.add_parser("configs", help="list or print shipped configs")
    sp.add_argument("action", choices=("list", "show"))
    sp.add_argument("name", nargs="?")
    sp.set_defaults(func=cmd_configs)
    return p


def _report(exc: Exception, code: int, as_json: bool):
    if as_json:
        payload = {"error": type(exc).__name__, "message": str(exc), "exit_code": code}
        if isinstance(exc, QuoteParseError):
            payload["problems"] = [{"line": ln, "message": msg} for ln, msg in exc.problems]
        sys.stderr.write(json.dumps(payload) + "\n")
    else:
        sys.stderr.write(f"error: {exc}\n")


def main(argv=None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    try:
        return args.func(args)
    except MaxentLobError as exc:
        code = next((c for t, c in _EXIT_FOR if isinstance(exc, t)), EXIT_INVALID)
        _report(exc, code, args.json_errors)
        return code
    except FloatingPointError as exc:
        _report(exc, EXIT_NUMERIC, args.json_errors)
        return EXIT_NUMERIC
    except OSError as exc:
        _report(exc, EXIT_INVALID, args.json_errors)
        return EXIT_INVALID


if __name__ == "__main__":
    sys.exit(main())
