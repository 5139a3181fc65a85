"""Regret of LRU, LFU and OGA on the periodic sequence over C+1 files, against wC(T/(C+1)-1)."""

import argparse

from olcache.bounds import oga_upper_bound, prop1_bound
from olcache.core import Catalog
from olcache.policies import OgaState, hindsight_best_static, simulate_lfu, simulate_lru, simulate_oga
from olcache.traces import gen_periodic_adversarial


def main():
    ap = argparse.ArgumentParser(description=__doc__)
    ap.add_argument("--cs", default="1,2,5,10,50")
    ap.add_argument("--t", type=int, default=3000)
    args = ap.parse_args()
    print(f"{'C':>4} {'bound':>10} {'LRU':>8} {'LFU':>8} {'OGA':>10} {'OGA bound':>10}")
    for C in map(int, args.cs.split(",")):
        trace = gen_periodic_adversarial(C, args.t, 2 * C + 2)
        cat = Catalog.uniform(trace.catalog_size)
        _, best = hindsight_best_static(trace, cat, C)
        lru = best - simulate_lru(trace, cat, C)[0].sum()
        lfu = best - simulate_lfu(trace, cat, C)[0].sum()
        s0 = OgaState.initial(cat, C, schedule="horizon_optimal", horizon=args.t)
        oga = best - simulate_oga(trace, cat, s0)[0].sum()
        ub = oga_upper_bound(C, trace.catalog_size, args.t, 1.0)
        print(f"{C:>4} {prop1_bound(1, C, args.t):>10.1f} {lru:>8.0f} {lfu:>8.0f} {oga:>10.1f} {ub:>10.1f}")


if __name__ == "__main__":
    main()
