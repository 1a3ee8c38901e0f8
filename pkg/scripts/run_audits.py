"""Deterministic and expected error-bound audits on Hilbert tensors."""

import argparse

from ttnystrom.analysis import deterministic_audit, expected_audit, node_spectra
from ttnystrom.sketch import DrmSpec
from ttnystrom.tensor import hilbert_tensor
from ttnystrom.tree import balanced_binary_tree, toy_tree
from ttnystrom.ttnn import TtnnConfig


def main(argv=None):
    ap = argparse.ArgumentParser(description=__doc__)
    ap.add_argument("--seeds", type=int, default=30)
    ap.add_argument("--trials", type=int, default=200)
    args = ap.parse_args(argv)

    h, tree = hilbert_tensor(6, 10), toy_tree()
    spectra = node_spectra(h, tree, 4)
    worst = 0.0
    for s in range(args.seeds):
        rep = deterministic_audit(h, tree, TtnnConfig(6, 3, DrmSpec("gaussian", s)), 4, spectra=spectra)
        worst = max(worst, rep.error / rep.rhs_node)
        assert rep.passed
    print(f"TTNN per-node audit, d=6 n=10 r=6 r̂=4 p=3: {args.seeds} draws pass, max error/RHS {worst:.2e}")

    h4, tree4 = hilbert_tensor(4, 10), balanced_binary_tree(4)
    spectra4 = node_spectra(h4, tree4, 4)
    worst = 0.0
    for s in range(args.seeds):
        rep = deterministic_audit(h4, tree4, TtnnConfig(6, 3, DrmSpec("gaussian", s)), 4, "sttnn", spectra=spectra4)
        worst = max(worst, rep.error / rep.rhs_node)
        assert rep.passed
    print(f"STTNN per-node audit, d=4 n=10: {args.seeds} draws pass, max error/RHS {worst:.2e}")

    rep = expected_audit(hilbert_tensor(4, 8), balanced_binary_tree(4), 6, 4, 4, args.trials)
    print(f"expected-error audit, d=4 n=8: mean {rep.mean_error:.3e} vs bound {rep.rhs:.3e} "
          f"({'pass' if rep.passed else 'FAIL'})")


if __name__ == "__main__":
    main()
