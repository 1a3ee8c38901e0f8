"""Tree tensor network rounding sweep; one CSV per singular value decay."""

import argparse
import sys

import numpy as np

from ttnystrom.cli import parse_ranks
from ttnystrom.experiments import rounding_config, run_rounding


def main(argv=None):
    ap = argparse.ArgumentParser(description=__doc__)
    ap.add_argument("--n", type=int, default=100)
    ap.add_argument("--stored-rank", type=int, default=40)
    ap.add_argument("--ranks", default="4,8,16,24,32")
    ap.add_argument("--oversample", type=int, default=10)
    ap.add_argument("--trials", type=int, default=10)
    ap.add_argument("--seed", type=int, default=0)
    ap.add_argument("--tree", default="toy")
    ap.add_argument("--no-timing", action="store_true")
    ap.add_argument("--out", default="rounding.csv")
    args = ap.parse_args(argv)
    cfg = rounding_config(n=args.n, stored_rank=args.stored_rank, ranks=parse_ranks(args.ranks),
                          overs=args.oversample, trials=args.trials, seed=args.seed, tree=args.tree,
                          timing=not args.no_timing, out=args.out)
    res = run_rounding(cfg, log=lambda m: print(m, file=sys.stderr))
    for decay, out in res.items():
        e = out["errors"]
        ratio = np.median(e["ttnn"], axis=0) / np.median(e["svd"], axis=0)
        t = out["times"]["ttnn"].mean(axis=0) / out["times"]["svd"].mean(axis=0)
        print(decay)
        for r, q, s in zip(out["ranks"], ratio, t):
            print(f"  r={r:3d}  ttnn/svd error {q:6.2f}  ttnn/svd time {s:5.2f}")


if __name__ == "__main__":
    main()
