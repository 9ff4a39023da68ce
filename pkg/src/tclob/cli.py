"""Command-line entry point.

Subcommands write plain CSV/JSON files into ``--out`` (default: the current
directory).  Exit status is 0 on success, 2 on a usage or parameter error and
3 when the data are insufficient for the requested statistic.
"""

from __future__ import annotations

import argparse
import json
import sys
from pathlib import Path

import numpy as np

from . import __version__
from .analytic import TailRegime, survival_const, survival_timechanged, tail_sigma
from .depth import DepthDistribution
from .errors import InsufficientDataError, TclobError
from .oracle import TruncatedChain, ctmc_survival, default_cap
from .rates import Form, RateSpec, parse_alpha_flag
from .scaling import (
    MIN_PATHS,
    Regime,
    classify_regime,
    counting_process_rescale,
    variance_profile,
)
from .simulator import BookConfig, iter_paths, summarize

EXIT_OK = 0
EXIT_USAGE = 2
EXIT_DATA = 3


class UsageError(Exception):
    pass


def _dump_json(obj) -> str:
    return json.dumps(obj, sort_keys=True, indent=2) + "\n"


def _write(out: Path, name: str, text: str) -> Path:
    out.mkdir(parents=True, exist_ok=True)
    path = out / name
    path.write_text(text)
    return path


def _rows_to_csv(header: list[str], rows) -> str:
    lines = [",".join(header)]
    for r in rows:
        lines.append(",".join(repr(float(v)) if not isinstance(v, str) else v for v in r))
    return "\n".join(lines) + "\n"


def _rows_to_json(header: list[str], rows) -> str:
    return _dump_json([dict(zip(header, (float(v) for v in r))) for r in rows])


def _emit_table(args, name: str, header: list[str], rows) -> Path:
    rows = list(rows)
    if args.format == "json":
        return _write(args.out, f"{name}.json", _rows_to_json(header, rows))
    return _write(args.out, f"{name}.csv", _rows_to_csv(header, rows))


def _spec_from_args(args) -> RateSpec:
    if args.alpha:
        return parse_alpha_flag(args.alpha, args.lam, args.mu)
    return RateSpec(Form.CONSTANT, {"c": 1.0}, args.lam, args.mu)


def _parse_depth(text: str) -> DepthDistribution:
    name, _, rest = text.partition(":")
    try:
        nums = [int(v) for v in rest.split(",")] if rest else []
    except ValueError:
        raise UsageError(f"cannot parse depth {text!r}") from None
    if name == "point" and len(nums) == 2:
        return DepthDistribution.point(*nums)
    if name == "uniform" and nums:
        return DepthDistribution.uniform(nums)
    path = Path(text)
    if path.exists():
        return DepthDistribution.from_pairs(json.loads(path.read_text()))
    raise UsageError("depth must be point:x,y, uniform:a,b,... or a JSON file of [x,y,p]")


def _parse_grid(text: str) -> np.ndarray:
    try:
        lo, hi, count = text.split(",")
        lo, hi, count = float(lo), float(hi), int(count)
    except ValueError:
        raise UsageError("t-grid must be 'min,max,count'") from None
    if not (0 < lo < hi) or count < 3:
        raise UsageError("t-grid needs 0 < min < max and at least 3 points")
    return np.geomspace(lo, hi, count)


# -- subcommands -----------------------------------------------------------

def cmd_survival(args) -> int:
    if args.x < 1:
        raise UsageError("x must be ≥ 1")
    if not args.tmax > 0:
        raise UsageError("tmax must be positive")
    spec = _spec_from_args(args)
    clock = spec.clock()
    if args.points < 2:
        raise UsageError("points must be at least 2")
    lo = args.tmin if args.tmin is not None else args.tmax / args.points
    T = np.linspace(lo, args.tmax, args.points)
    if T[0] <= clock.origin:
        raise UsageError(f"the T grid must start after the clock origin {clock.origin:g}")
    A = np.asarray(clock.cumulative(T), dtype=float)
    regime = TailRegime.from_rates(spec.lam, spec.mu)
    surv = np.asarray(survival_timechanged(T, args.x, clock), dtype=float)
    tail = np.asarray(tail_sigma(A, args.x, regime, spec.lam, spec.mu, variant=args.tail))
    header = ["T", "survival", "tail_asymptote"]
    cols = [T, surv, tail]
    if args.alpha:
        header[1:1] = ["A_T"]
        cols[1:1] = [A]
        header.append("survival_const_at_A")
        cols.append(np.asarray(survival_const(A, args.x, spec.lam, spec.mu), dtype=float))
    if args.oracle_check:
        cap = default_cap(args.x, spec.lam, float(A.max()))
        chain = TruncatedChain.for_clock(clock, cap)
        header.append("oracle")
        cols.append(np.array([ctmc_survival(t, args.x, chain).value for t in T]))
    _emit_table(args, "survival", header, zip(*cols))
    return EXIT_OK


def _load_config(path: Path) -> BookConfig:
    try:
        data = json.loads(Path(path).read_text())
    except OSError as exc:
        raise UsageError(f"cannot read config: {exc}") from None
    except json.JSONDecodeError as exc:
        raise UsageError(f"config is not valid JSON: {exc}") from None
    return BookConfig.from_dict(data)


def cmd_simulate(args) -> int:
    config = _load_config(args.config)
    if args.paths < 1:
        raise UsageError("paths must be at least 1")
    if (args.horizon is None) == (args.changes is None):
        raise UsageError("give exactly one of --horizon or --changes")
    lines = ["path,n,S_n,X_n,price"]
    paths = []
    for i, p in enumerate(iter_paths(config, args.paths, args.horizon, args.seed,
                                     args.changes, args.jobs)):
        body = p.to_csv().splitlines()[1:]
        lines.extend(f"{i},{row}" for row in body)
        paths.append(p)
    summary = summarize(paths)
    summary["master_seed"] = args.seed
    summary["config"] = config.to_dict()
    _write(args.out, "paths.csv", "\n".join(lines) + "\n")
    _write(args.out, "summary.json", _dump_json(summary))
    return EXIT_OK


def cmd_limit(args) -> int:
    spec = _spec_from_args(args)
    report = classify_regime(spec, args.threshold, printed_schedule=args.printed_schedule)
    result = {"regime": report.to_dict(), "fits": []}
    if report.regime is Regime.NO_CONVERGENCE:
        _write(args.out, "regime.json", _dump_json(report.to_dict()))
        _write(args.out, "limit.json", _dump_json(result))
        return EXIT_OK
    try:
        ladder = [int(v) for v in args.n_ladder.split(",")]
    except ValueError:
        raise UsageError("n-ladder must be comma-separated integers") from None
    if any(b <= a for a, b in zip(ladder, ladder[1:])) or ladder[0] < 2:
        raise UsageError("n-ladder must be increasing and start at 2 or more")
    if args.paths < MIN_PATHS:
        raise InsufficientDataError(f"need at least {MIN_PATHS} paths, got {args.paths}")
    grid = _parse_grid(args.t_grid)
    depth = _parse_depth(args.depth)
    config = BookConfig(spec.clock(), depth)
    for n in ladder:
        horizon = float(report.schedule(grid[-1], n))
        prof = variance_profile(iter_paths(config, args.paths, horizon, args.seed, None,
                                           args.jobs), report, n, grid)
        fit = prof.fit()
        counting = counting_process_rescale(None, report, n, grid, depth=None, profile=prof)
        rows = zip(prof.t, prof.times, prof.variance, counting.mean)
        _emit_table(args, f"variance_n{n}", ["t", "t_n", "variance", "mean_count_over_n"], rows)
        result["fits"].append({
            "n": n,
            "n_paths": prof.n_paths,
            "pooled_mean_move": prof.pooled_mean,
            "slope": fit.to_dict(),
            "predicted_slope": report.variance_exponent,
            "normality_pvalue": prof.normality_pvalue(),
        })
    _write(args.out, "regime.json", _dump_json(report.to_dict()))
    _write(args.out, "limit.json", _dump_json(result))
    return EXIT_OK


def cmd_fit(args) -> int:
    from . import empirical as emp

    if args.published:
        rep = emp.published_table_report(args.threshold)
        _write(args.out, "report.json", _dump_json(rep.to_dict()))
        _write(args.out, "report.txt", rep.to_text())
        return EXIT_OK
    if args.events is None:
        raise UsageError("--events is required unless --published is given")
    events = emp.parse_events(args.events)
    if len(events) == 0:
        raise UsageError("event file contains no events")
    flows = {"lam_ask": ("A", "L"), "mu_ask": ("A", "MC"),
             "lam_bid": ("B", "L"), "mu_bid": ("B", "MC")}
    curves, fits = {}, {}
    for name, (side, kinds) in flows.items():
        curves[name] = emp.estimate_intensity(events, side, list(kinds), args.bin_width)
        fits[name] = emp.fit_power_law(curves[name])
        _write(args.out, f"curve_{name}.csv", curves[name].to_csv())
        if len(events.days) > 1:
            for day, c in emp.daily_intensities(events, side, list(kinds), args.bin_width).items():
                _write(args.out, f"curve_{name}_{day}.csv", c.to_csv())
    q_ask = emp.quotient_series(curves["lam_ask"], curves["mu_ask"])
    q_bid = emp.quotient_series(curves["lam_bid"], curves["mu_bid"])
    stock = emp.StockFits(fits["lam_ask"], fits["mu_ask"], fits["lam_bid"], fits["mu_bid"],
                          q_ask.mean, q_bid.mean)
    rep = emp.table_report({args.name: stock}, args.threshold)
    out = rep.to_dict()
    out["settings"] = {"bin_width": args.bin_width, "session_length": events.session_length,
                       "days": events.days, "n_events": len(events)}
    _write(args.out, "report.json", _dump_json(out))
    _write(args.out, "report.txt", rep.to_text())
    _write(args.out, "regime.json", _dump_json(rep.regimes[args.name].to_dict()))
    return EXIT_OK


def cmd_classify(args) -> int:
    spec = _spec_from_args(args)
    report = classify_regime(spec, args.threshold, printed_schedule=args.printed_schedule)
    text = _dump_json(report.to_dict())
    if args.out is None:
        sys.stdout.write(text)
    else:
        _write(args.out, "regime.json", text)
    return EXIT_OK


# -- parser ----------------------------------------------------------------

def _add_rates(p: argparse.ArgumentParser) -> None:
    p.add_argument("--lambda", dest="lam", type=float, required=True,
                   help="limit-order rate")
    p.add_argument("--mu", type=float, required=True, help="market+cancel rate")
    p.add_argument("--alpha", default=None,
                   help="modulation: constant:c, power:K,s, powerlog:K,s,m or recip:k,t0")


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="tclob", description=__doc__.splitlines()[0])
    parser.add_argument("--version", action="version", version=f"%(prog)s {__version__}")
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("survival", help="extinction-time survival curve")
    _add_rates(p)
    p.add_argument("--x", type=int, required=True, help="initial queue depth")
    p.add_argument("--tmax", type=float, required=True)
    p.add_argument("--tmin", type=float, default=None)
    p.add_argument("--points", type=int, default=50)
    p.add_argument("--tail", choices=("proof", "printed", "integral"), default="proof")
    p.add_argument("--oracle-check", action="store_true",
                   help="add a uniformization column from the truncated chain")
    p.add_argument("--format", choices=("csv", "json"), default="csv")
    p.add_argument("--out", type=Path, default=Path("."))
    p.set_defaults(func=cmd_survival)

    p = sub.add_parser("simulate", help="simulate price paths from a book config")
    p.add_argument("--config", type=Path, required=True)
    p.add_argument("--paths", type=int, default=1)
    p.add_argument("--horizon", type=float, default=None)
    p.add_argument("--changes", type=int, default=None)
    p.add_argument("--seed", type=int, required=True)
    p.add_argument("--jobs", type=int, default=1)
    p.add_argument("--out", type=Path, default=Path("."))
    p.set_defaults(func=cmd_simulate)

    p = sub.add_parser("limit", help="variance profile of the rescaled price")
    _add_rates(p)
    p.add_argument("--depth", default="uniform:1,2")
    p.add_argument("--n-ladder", default="1024,4096")
    p.add_argument("--t-grid", default="0.1,1,10")
    p.add_argument("--paths", type=int, default=MIN_PATHS)
    p.add_argument("--threshold", type=float, default=0.97)
    p.add_argument("--printed-schedule", action="store_true")
    p.add_argument("--seed", type=int, required=True)
    p.add_argument("--jobs", type=int, default=1)
    p.add_argument("--format", choices=("csv", "json"), default="csv")
    p.add_argument("--out", type=Path, default=Path("."))
    p.set_defaults(func=cmd_limit)

    p = sub.add_parser("fit", help="intensity fits and quotient tables from events")
    p.add_argument("--events", type=Path, default=None)
    p.add_argument("--bin-width", type=float, default=300.0)
    p.add_argument("--name", default="stock")
    p.add_argument("--threshold", type=float, default=0.97)
    p.add_argument("--published", action="store_true", help="use the published table values")
    p.add_argument("--out", type=Path, default=Path("."))
    p.set_defaults(func=cmd_fit)

    p = sub.add_parser("classify", help="diffusion-limit regime of a rate spec")
    _add_rates(p)
    p.add_argument("--threshold", type=float, default=0.97)
    p.add_argument("--printed-schedule", action="store_true")
    p.add_argument("--out", type=Path, default=None)
    p.set_defaults(func=cmd_classify)
    return parser


def main(argv=None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    try:
        return args.func(args)
    except InsufficientDataError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_DATA
    except (UsageError, TclobError, ValueError, OSError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_USAGE


if __name__ == "__main__":
    sys.exit(main())
