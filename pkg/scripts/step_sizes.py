"""Time-average OGA utility for several step sizes, plus the LRU/OGA join at the horizon.

Writes ``step_sizes.csv`` (slot, eta, avg_utility) and ``lru_oga.csv``
(lru_rank, file, count, oga_y) into ``--out``.
"""

import argparse
import csv
from pathlib import Path

import numpy as np

from olcache.core import Catalog
from olcache.policies import OgaState, horizon_optimal_step, simulate_lru, simulate_oga
from olcache.traces import gen_zipf_iid


def main():
    ap = argparse.ArgumentParser(description=__doc__)
    ap.add_argument("--n", type=int, default=10_000)
    ap.add_argument("--c", type=float, default=1000)
    ap.add_argument("--t", type=int, default=100_000)
    ap.add_argument("--s", type=float, default=0.8)
    ap.add_argument("--etas", default="0.001,0.01,opt,1")
    ap.add_argument("--every", type=int, default=1000)
    ap.add_argument("--seed", type=int, default=0)
    ap.add_argument("--out", default=".")
    args = ap.parse_args()
    out = Path(args.out)
    out.mkdir(parents=True, exist_ok=True)

    trace = gen_zipf_iid(args.n, args.t, args.s, args.seed)
    cat = Catalog.uniform(args.n)
    opt = horizon_optimal_step(args.c, args.n, args.t, 1.0)
    etas = [opt if e == "opt" else float(e) for e in args.etas.split(",")]
    slots = np.arange(args.every - 1, args.t, args.every)
    finals = {}
    with (out / "step_sizes.csv").open("w", newline="") as fh:
        wr = csv.writer(fh)
        wr.writerow(["slot", "eta", "avg_utility"])
        for eta in etas:
            util, state = simulate_oga(trace, cat, OgaState.initial(cat, args.c, eta=eta))
            avg = np.cumsum(util)[slots] / (slots + 1)
            wr.writerows((int(t), f"{eta:.6g}", f"{a:.6g}") for t, a in zip(slots, avg))
            finals[eta] = state
            print(f"eta={eta:.4g}: time-average utility {util.mean():.4f}")

    _, lru = simulate_lru(trace, cat, args.c)
    y = finals[opt if opt in finals else etas[0]].y.fractions
    counts = trace.counts()
    with (out / "lru_oga.csv").open("w", newline="") as fh:
        wr = csv.writer(fh)
        wr.writerow(["lru_rank", "file", "count", "oga_y"])
        wr.writerows((r, n, int(counts[n]), f"{y[n]:.6g}") for r, n in enumerate(lru.items))


if __name__ == "__main__":
    main()
