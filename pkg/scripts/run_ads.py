#!/usr/bin/env python3
"""Ad-ranking stand-in: revenue-matched ExpPenalty vs LinearSum."""
import argparse

from concave_rank.experiments import AdConfig, run_ad_experiment, write_ad_positions


def main():
    ap = argparse.ArgumentParser(description=__doc__)
    ap.add_argument("--m", type=int, default=300)
    ap.add_argument("--seed", type=int, default=0)
    ap.add_argument("--outdir", default=None)
    args = ap.parse_args()

    rep = run_ad_experiment(AdConfig(m=args.m, seed=args.seed))
    print(f"revenue target {rep.target:.4f}")
    for out in (rep.linear, rep.exp):
        print(f"{out.combiner:<12} {out.params}  revenue {out.revenue:.4f}  bottom quartile {out.bottom_quartile:.4f}")
    for cand in rep.candidates:
        print(f"  {cand.params}  revenue {cand.revenue:.4f}  bottom quartile {cand.bottom_quartile:.4f}")
    if args.outdir:
        print(write_ad_positions(rep, args.outdir))


if __name__ == "__main__":
    main()
