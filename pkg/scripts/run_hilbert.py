"""Hilbert-tensor rank sweep; writes the CSV and prints median error ratios."""

import argparse
import sys

import numpy as np

from ttnystrom.cli import parse_ranks
from ttnystrom.experiments import hilbert_config, run_hilbert


def main(argv=None):
    ap = argparse.ArgumentParser(description=__doc__)
    ap.add_argument("--d", type=int, default=6)
    ap.add_argument("--n", type=int, default=20)
    ap.add_argument("--ranks", default="2:12:2")
    ap.add_argument("--oversample", type=int, default=3)
    ap.add_argument("--trials", type=int, default=30)
    ap.add_argument("--seed", type=int, default=0)
    ap.add_argument("--tree", default="toy")
    ap.add_argument("--no-timing", action="store_true")
    ap.add_argument("--out", default="hilbert.csv")
    args = ap.parse_args(argv)
    cfg = hilbert_config(d=args.d, n=args.n, ranks=parse_ranks(args.ranks), overs=args.oversample,
                         trials=args.trials, seed=args.seed, tree=args.tree, timing=not args.no_timing,
                         out=args.out)
    res = run_hilbert(cfg, log=lambda m: print(m, file=sys.stderr))
    med = {m: np.median(e, axis=0) for m, e in res["errors"].items()}
    print("rank  ttnn/svd  sttnn/ttnn  hmt/ttnn  sttnn/ttnn flops")
    for j, r in enumerate(res["ranks"]):
        fl = res["flops"]["sttnn"][:, j].mean() / res["flops"]["ttnn"][:, j].mean()
        print(f"{r:4d}  {med['ttnn'][j] / med['svd'][j]:8.2f}  {med['sttnn'][j] / med['ttnn'][j]:10.2f}"
              f"  {med['hmt'][j] / med['ttnn'][j]:8.2f}  {fl:16.2f}")
    print(f"wrote {args.out}")


if __name__ == "__main__":
    main()
