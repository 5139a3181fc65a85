"""OGA, LRU, LFU and the best static configuration under four request models.

Writes ``single_cache.csv`` with columns model, slot, policy, avg_utility.
Defaults follow the large-catalog setting (N=1e4, C=3000, T=2e5, eta=0.1),
which takes a few minutes per model; shrink with ``--n/--c/--t``.
"""

import argparse
import csv

import numpy as np

from olcache.core import Catalog
from olcache.policies import (
    OgaState,
    hindsight_best_static,
    hindsight_slot_utils,
    simulate_lfu,
    simulate_lru,
    simulate_oga,
)
from olcache.traces import gen_random_replacement, gen_snm, gen_zipf_iid, load_trace


def main():
    ap = argparse.ArgumentParser(description=__doc__)
    ap.add_argument("--n", type=int, default=10_000)
    ap.add_argument("--c", type=float, default=3000)
    ap.add_argument("--t", type=int, default=200_000)
    ap.add_argument("--eta", type=float, default=0.1)
    ap.add_argument("--churn", type=float, default=0.01)
    ap.add_argument("--trace", help="optional external trace CSV used as a fourth model")
    ap.add_argument("--every", type=int, default=2000)
    ap.add_argument("--seed", type=int, default=0)
    ap.add_argument("-o", "--output", default="single_cache.csv")
    args = ap.parse_args()

    models = {
        "zipf": gen_zipf_iid(args.n, args.t, 0.8, args.seed),
        "snm": gen_snm(args.n, args.t, seed=args.seed),
        "replacement": gen_random_replacement(args.n, args.t, 0.8, args.churn, args.seed),
    }
    if args.trace:
        models["external"] = load_trace(args.trace, mode="single")

    with open(args.output, "w", newline="") as fh:
        wr = csv.writer(fh)
        wr.writerow(["model", "slot", "policy", "avg_utility"])
        for name, trace in models.items():
            cat = Catalog.uniform(trace.catalog_size)
            C = min(args.c, trace.catalog_size)
            y_star, _ = hindsight_best_static(trace, cat, C)
            curves = {
                "oga": simulate_oga(trace, cat, OgaState.initial(cat, C, eta=args.eta))[0],
                "lru": simulate_lru(trace, cat, C)[0],
                "lfu": simulate_lfu(trace, cat, C)[0],
                "best_static": hindsight_slot_utils(trace, cat, y_star),
            }
            slots = np.arange(args.every - 1, trace.horizon, args.every)
            for policy, util in curves.items():
                avg = np.cumsum(util)[slots] / (slots + 1)
                wr.writerows((name, int(t), policy, f"{a:.6g}") for t, a in zip(slots, avg))
            print(name, " ".join(f"{p}={u.mean():.4f}" for p, u in curves.items()))


if __name__ == "__main__":
    main()
