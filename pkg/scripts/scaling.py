#!/usr/bin/env python3
"""Wall-clock of the randomized single-instance solver against n."""
import argparse
import statistics
import time

import numpy as np

from concave_rank.objective import ConcaveObjective
from concave_rank.rank_core import Instance, solve_rank_randomized


def timed(n, seed, f):
    rng = np.random.default_rng(seed)
    inst = Instance.with_dcg(rng.lognormal(size=n), rng.lognormal(size=n))
    t0 = time.perf_counter()
    res = solve_rank_randomized(inst, f, seed=seed)
    return time.perf_counter() - t0, res.probes


def main():
    ap = argparse.ArgumentParser(description=__doc__)
    ap.add_argument("--sizes", type=int, nargs="+", default=[1000, 3000, 10_000, 30_000, 100_000, 300_000])
    ap.add_argument("--reps", type=int, default=5)
    args = ap.parse_args()

    f = ConcaveObjective.log_product()
    timed(2000, 0, f)  # JIT warm-up
    prev = None
    print(f"{'n':>8} {'median s':>10} {'probes':>7} {'ratio':>7}")
    for n in args.sizes:
        runs = [timed(n, s, f) for s in range(args.reps)]
        t = statistics.median(r[0] for r in runs)
        probes = statistics.median(r[1] for r in runs)
        ratio = f"{t / prev:7.2f}" if prev else " " * 7
        print(f"{n:>8} {t:10.4f} {probes:7.0f} {ratio}")
        prev = t


if __name__ == "__main__":
    main()
