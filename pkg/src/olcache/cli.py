"""Command line entry point: ``olcache generate|run|bounds|inspect``.

Exit codes: 0 success, 1 runtime failure, 2 usage or configuration error.
``OLCACHE_OUTPUT_DIR`` sets where outputs go when ``-o`` is not given.
"""

from __future__ import annotations

import argparse
import csv
import math
import os
import sys
from pathlib import Path

import numpy as np

from .bounds import (
    GaussianRequestModel,
    bsa_upper_bound,
    lb_monte_carlo,
    lb_pairing,
    lb_uniform,
    oga_upper_bound,
    prop1_bound,
)
from .core import InputError
from .experiment import (
    ExperimentConfig,
    format_results,
    lru_oga_table,
    make_trace,
    run_experiment,
    save_state,
    summary_rows,
)
from .traces import assign_locations, save_trace

OUTPUT_DIR_ENV = "OLCACHE_OUTPUT_DIR"


class UsageError(Exception):
    pass


def _default_output(name: str) -> Path:
    return Path(os.environ.get(OUTPUT_DIR_ENV, ".")) / name


def _generate_spec(args) -> dict:
    g = args.generator
    if g in ("zipf", "uniform", "snm", "replacement") and args.n is None:
        raise UsageError(f"generate {g} needs --n")
    if args.t is None:
        raise UsageError("--t is required")
    if g == "zipf":
        return {"generator": g, "N": args.n, "T": args.t, "exponent": args.s}
    if g == "uniform":
        return {"generator": g, "N": args.n, "T": args.t}
    if g == "periodic":
        if args.c is None:
            raise UsageError("generate periodic needs --c")
        return {"generator": g, "C": args.c, "T": args.t, "N": args.n}
    if g == "snm":
        return {
            "generator": g,
            "N": args.n,
            "T": args.t,
            "shot_rate": args.rate,
            "duration_shape": args.shape,
            "duration_scale": args.scale,
            "volume_low": args.vlow,
            "volume_high": args.vhigh,
            "background": args.background,
        }
    return {"generator": g, "N": args.n, "T": args.t, "exponent": args.s, "churn_prob": args.churn}


def cmd_generate(args) -> int:
    trace = make_trace(_generate_spec(args), args.seed)
    if args.locations:
        trace = assign_locations(trace, args.locations, args.seed)
    out = Path(args.output) if args.output else _default_output(f"{args.generator}.csv")
    save_trace(trace, out)
    print(f"wrote {trace.horizon} requests over {trace.catalog_size} files to {out}")
    return 0


def _parse_policy(text: str) -> dict:
    name, _, rest = text.partition(":")
    p = {"name": name.strip()}
    for item in filter(None, rest.split(",")):
        key, eq, val = item.partition("=")
        if not eq:
            raise UsageError(f"bad policy parameter {item!r} (expected key=value)")
        try:
            p[key.strip()] = float(val) if key.strip() != "schedule" else val.strip()
        except ValueError:
            raise UsageError(f"policy parameter {key}={val!r} is not a number") from None
    return p


def _run_config(args) -> ExperimentConfig:
    cfg = ExperimentConfig.load(args.config) if args.config else ExperimentConfig()
    if args.mode:
        cfg.mode = args.mode
    if args.trace:
        cfg.trace = {"path": args.trace}
    elif args.generator:
        spec = _generate_spec(args)
        cfg.trace = spec
    if args.capacity is not None:
        cfg.capacity = args.capacity
    if args.weight is not None:
        cfg.weights = args.weight
    if args.network:
        cfg.network = args.network
    if args.policy:
        cfg.policies = [_parse_policy(p) for p in args.policy]
    if args.seed is not None:
        cfg.seed = args.seed
    if args.output:
        cfg.output = args.output
    if args.every is not None:
        cfg.every = args.every
    if args.hindsight:
        cfg.hindsight = args.hindsight
    return cfg


def cmd_run(args) -> int:
    cfg = _run_config(args)
    result = run_experiment(cfg)
    out = Path(cfg.output) if cfg.output else _default_output("results.csv")
    out.write_text(format_results(cfg, result), encoding="utf-8")
    if args.save_state:
        save_state(args.save_state, result)
    print(f"{'policy':<12}{'total':>16}{'avg':>12}{'regret':>14}")
    for name, tot, avg, reg in summary_rows(result):
        print(f"{name:<12}{tot:>16.6g}{avg:>12.6g}{reg:>14.6g}")
    print(f"results: {out}")
    return 0


def _weights(args) -> np.ndarray:
    if args.weights:
        vals = [float(x) for x in args.weights.split(",")]
        if len(vals) != args.n:
            raise UsageError(f"--weights has {len(vals)} entries, expected N={args.n}")
        return np.array(vals)
    return np.full(args.n, args.w)


def bounds_table(args) -> list[tuple[str, str, str]]:
    """Rows of (quantity, coefficient of sqrt(T), value at T)."""
    N, C, T = args.n, args.c, args.t
    w = _weights(args)
    uniform = bool(np.all(w == w[0]))
    sq = math.sqrt(T)
    rows = []

    def add(name, coef=None, value=None, note=None):
        if note:
            rows.append((name, note, note))
        else:
            rows.append((name, "" if coef is None else f"{coef:.6g}", f"{value:.6g}"))

    if uniform and float(C).is_integer() and C + 1 <= N:
        add("prop1_lru_lfu_regret", value=prop1_bound(w[0], int(C), T))
    else:
        add("prop1_lru_lfu_regret", note="n/a (uniform weights, integer C < N required)")
    ub = oga_upper_bound(C, N, T, w.max())
    add("oga_upper", ub / sq, ub)
    deg, J = args.deg, args.j
    ub = bsa_upper_bound(deg, J, C, T, w.max())
    add(f"bsa_upper(deg={deg},J={J})", ub / sq, ub)
    if C < N / 2:
        if uniform:
            lb = lb_uniform(w[0], C / N, C, T)
            add("lower_uniform", lb / sq, lb)
        else:
            add("lower_uniform", note="n/a (uniform weights required)")
        if C >= 1 and float(C).is_integer():
            coef = lb_pairing(w, int(C))
            add("lower_pairing", coef, coef * sq)
        else:
            add("lower_pairing", note="n/a (integer C required)")
    else:
        add("lower_uniform", note="n/a (C<N/2 required)")
        add("lower_pairing", note="n/a (C<N/2 required)")
    if float(C).is_integer() and 1 <= C <= N:
        est, se = lb_monte_carlo(GaussianRequestModel(w), int(C), args.samples, args.seed)
        rows.append(("lower_monte_carlo", f"{est:.6g} +- {se:.2g}", f"{est * sq:.6g} +- {se * sq:.2g}"))
    return rows


def cmd_bounds(args) -> int:
    rows = bounds_table(args)
    if args.output:
        with open(args.output, "w", newline="", encoding="utf-8") as fh:
            wr = csv.writer(fh)
            wr.writerow(["quantity", "coef_sqrtT", "value"])
            wr.writerows(rows)
    width = max(len(r[0]) for r in rows) + 2
    print(f"{'quantity':<{width}}{'coef of sqrt(T)':>22}{'value at T':>24}")
    for name, coef, val in rows:
        print(f"{name:<{width}}{coef:>22}{val:>24}")
    return 0


def cmd_inspect(args) -> int:
    try:
        table = lru_oga_table(args.state)
    except (InputError, OSError) as exc:
        raise UsageError(str(exc)) from None
    out = Path(args.output) if args.output else _default_output("lru_oga.csv")
    with out.open("w", newline="", encoding="utf-8") as fh:
        wr = csv.writer(fh)
        wr.writerow(["lru_rank", "file", "oga_y"])
        wr.writerows((r, n, format(y, ".12g")) for r, n, y in table)
    print(f"wrote {len(table)} rows to {out}")
    return 0


def _add_generator_args(p, with_name: bool = True):
    if with_name:
        p.add_argument("generator", choices=["zipf", "uniform", "periodic", "snm", "replacement"])
    p.add_argument("--n", type=int, help="catalog size N")
    p.add_argument("--t", type=int, help="horizon T")
    p.add_argument("--s", type=float, default=0.8, help="Zipf exponent")
    p.add_argument("--c", type=int, help="cache size for the periodic sequence")
    p.add_argument("--churn", type=float, default=0.01, help="replacement probability per slot")
    p.add_argument("--rate", type=float, help="SNM shot arrivals per slot")
    p.add_argument("--shape", type=float, default=2.0, help="SNM Pareto duration shape")
    p.add_argument("--scale", type=float, default=1000.0, help="SNM minimum duration")
    p.add_argument("--vlow", type=float, default=50.0)
    p.add_argument("--vhigh", type=float, default=150.0)
    p.add_argument("--background", type=float, default=1e-3)


def build_parser() -> argparse.ArgumentParser:
    ap = argparse.ArgumentParser(prog="olcache", description=__doc__.splitlines()[0])
    sub = ap.add_subparsers(dest="command", required=True)

    g = sub.add_parser("generate", help="write a synthetic request trace")
    _add_generator_args(g)
    g.add_argument("--seed", type=int, default=0)
    g.add_argument("--locations", type=int, help="attach uniform random locations 0..I-1")
    g.add_argument("-o", "--output")
    g.set_defaults(func=cmd_generate)

    r = sub.add_parser("run", help="run policies on a trace and write per-slot results")
    r.add_argument("--config", help="JSON experiment config")
    r.add_argument("--mode", choices=["single", "bipartite"])
    r.add_argument("--trace", help="trace CSV (overrides config)")
    r.add_argument("--generator", choices=["zipf", "uniform", "periodic", "snm", "replacement"])
    _add_generator_args(r, with_name=False)
    r.add_argument("--capacity", type=float)
    r.add_argument("--weight", type=float, help="uniform file weight")
    r.add_argument("--network", help="network description JSON")
    r.add_argument("--policy", action="append", help="e.g. oga:eta=0.1, lru, lazy_qlru:q=1")
    r.add_argument("--seed", type=int)
    r.add_argument("--every", type=int, help="write every k-th slot (last slot always)")
    r.add_argument("--hindsight", choices=["lp", "ascent"])
    r.add_argument("--save-state", help="npz with final policy states (for inspect)")
    r.add_argument("-o", "--output")
    r.set_defaults(func=cmd_run)

    b = sub.add_parser("bounds", help="tabulate regret bounds")
    b.add_argument("--n", type=int, required=True)
    b.add_argument("--c", type=float, required=True)
    b.add_argument("--t", type=int, required=True)
    b.add_argument("--w", type=float, default=1.0, help="uniform weight")
    b.add_argument("--weights", help="comma-separated per-file weights")
    b.add_argument("--deg", type=int, default=1)
    b.add_argument("--j", type=int, default=1)
    b.add_argument("--samples", type=int, default=100_000)
    b.add_argument("--seed", type=int, default=0)
    b.add_argument("-o", "--output")
    b.set_defaults(func=cmd_bounds)

    i = sub.add_parser("inspect", help="OGA fraction of each file in the final LRU cache")
    i.add_argument("state", help="npz written by run --save-state")
    i.add_argument("-o", "--output")
    i.set_defaults(func=cmd_inspect)
    return ap


def main(argv=None) -> int:
    ap = build_parser()
    args = ap.parse_args(argv)
    try:
        return args.func(args)
    except (UsageError, InputError, FileNotFoundError) as exc:
        print(f"olcache {args.command}: error: {exc}", file=sys.stderr)
        return 2
    except Exception as exc:  # runtime failure
        print(f"olcache {args.command}: failed: {exc}", file=sys.stderr)
        return 1


if __name__ == "__main__":
    sys.exit(main())
