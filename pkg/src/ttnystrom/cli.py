"""Command-line driver.

Exit codes: 0 success, 2 usage or input error, 3 numerical precondition
failure.
"""

import argparse
import json
import os
import sys
import time
import warnings

import numpy as np

from . import io
from .analysis import PreconditionError, deterministic_audit, expected_audit
from .baselines import ttn_hmt, ttn_svd
from .experiments import ExperimentConfig, resolve_tree, run_hilbert, run_rounding
from .kernels import SingularCoreError
from .sketch import DrmSpec, sketch_dense, sketch_ttn
from .sttnn import reuse_plan, sequential_sketch
from .tensor import hilbert_tensor
from .ttn import TtnTensor, random_ttn, rel_error, to_dense, ttn_storage
from .ttnn import StreamCompressor, TtnnConfig, recover, resolve_config

__all__ = ["main", "parse_synthetic", "parse_ranks", "workers"]

# above this many entries a network is not densified for error reports
DENSE_LIMIT = 2**26


class InputError(Exception):
    pass


def workers():
    """Worker cap from ``TTNN_THREADS`` (default 1)."""
    try:
        return max(1, int(os.environ.get("TTNN_THREADS", "1")))
    except ValueError:
        raise InputError("TTNN_THREADS must be an integer") from None


def parse_ranks(text):
    """``a:b:step`` (inclusive) or a comma list."""
    try:
        if ":" in text:
            a, b, *s = (int(x) for x in text.split(":"))
            step = s[0] if s else 1
            if step < 1:
                raise ValueError
            out = tuple(range(a, b + 1, step))
        else:
            out = tuple(int(x) for x in text.split(","))
    except ValueError:
        raise InputError(f"bad rank sweep {text!r}; expected a:b:step") from None
    if not out:
        raise InputError(f"empty rank sweep {text!r}")
    return out


def _kv(body):
    out = {}
    for part in filter(None, body.split(",")):
        if "=" not in part:
            raise InputError(f"bad synthetic parameter {part!r}")
        k, v = part.split("=", 1)
        out[k.strip()] = v.strip()
    return out


def parse_synthetic(text, tree_arg=None):
    """``hilbert:d=6,n=20`` or ``randttn:tree=toy,n=6,r=2,decay=none,seed=0``.

    Returns a dense array or a :class:`TtnTensor`.
    """
    kind, _, body = text.partition(":")
    kv = _kv(body)
    try:
        if kind == "hilbert":
            return hilbert_tensor(int(kv.get("d", 6)), int(kv.get("n", 20)))
        if kind == "randttn":
            d = int(kv.get("d", 6))
            tree = resolve_tree(kv.get("tree", tree_arg or "toy"), d)
            n = int(kv.get("n", 6))
            return random_ttn(tree, (n,) * tree.d, int(kv.get("r", 2)), kv.get("decay", "none"), int(kv.get("seed", 0)))
    except (ValueError, OSError) as exc:
        raise InputError(str(exc)) from None
    raise InputError(f"unknown synthetic tensor {text!r}")


def _load(source, tree_arg=None):
    if ":" in source and not os.path.exists(source):
        return parse_synthetic(source, tree_arg)
    if os.path.isdir(source):
        return io.read_ttn(source)
    if not os.path.isfile(source):
        raise InputError(f"input not found: {source}")
    return io.read_tensor(source)


def _tree(arg, d):
    try:
        return resolve_tree(arg, d)
    except (ValueError, OSError) as exc:
        raise InputError(str(exc)) from None


def _spec(args, kind="gaussian"):
    return DrmSpec(kind, args.seed)


def _emit(report, out):
    text = json.dumps(report, indent=1)
    if out:
        os.makedirs(out, exist_ok=True)
        with open(os.path.join(out, "report.json"), "w") as f:
            f.write(text + "\n")
    print(text)


def _error_report(ref, approx):
    if isinstance(ref, TtnTensor) or isinstance(approx, TtnTensor) or np.size(ref) <= DENSE_LIMIT:
        return rel_error(ref, approx)
    return None


def cmd_compress(args):
    t = _load(args.input, args.tree)
    if isinstance(t, TtnTensor):
        tree = t.tree
        if np.prod(t.shape) > DENSE_LIMIT:
            raise InputError("input network is too large to densify; use 'round'")
        t = to_dense(t)
    else:
        tree = _tree(args.tree, t.ndim)
    cfg = TtnnConfig(args.rank, args.oversample, _spec(args), args.ls_mode)
    phases = {}
    t0 = time.perf_counter()
    if args.method in ("ttnn", "sttnn"):
        ranks, overs = resolve_config(cfg, tree, t.shape)
        if args.method == "ttnn":
            state = sketch_dense(t, tree, ranks, overs, cfg.spec)
        else:
            state = sequential_sketch(t, tree, ranks, overs, cfg.spec, reuse_plan(tree))
        phases["sketch"] = time.perf_counter() - t0
        t1 = time.perf_counter()
        approx = recover(state, cfg.ls_mode)
        phases["recover"] = time.perf_counter() - t1
    elif args.method == "ttn-svd":
        approx = ttn_svd(t, tree, args.rank)
    elif args.method == "ttn-hmt":
        approx = ttn_hmt(t, tree, args.rank, cfg.spec)
    else:
        raise InputError(f"unknown method {args.method!r}")
    phases["total"] = time.perf_counter() - t0
    if args.out:
        io.write_ttn(args.out, approx)
    report = {
        "method": args.method,
        "rel_error": _error_report(t, approx),
        "time": phases,
        "ranks": {f"{a[0]},{a[1]}": r for a, r in approx.ranks.items()},
        "storage": ttn_storage(approx),
    }
    _emit(report, args.out)


def cmd_round(args):
    t = _load(args.input, args.tree)
    if not isinstance(t, TtnTensor):
        raise InputError("round expects a tree tensor network input")
    cfg = TtnnConfig(args.rank, args.oversample, _spec(args, "khatri_rao"), args.ls_mode)
    t0 = time.perf_counter()
    ranks, overs = resolve_config(cfg, t.tree, t.shape)
    state = sketch_ttn(t, ranks, overs, cfg.spec)
    t1 = time.perf_counter()
    approx = recover(state, cfg.ls_mode)
    t2 = time.perf_counter()
    if args.out:
        io.write_ttn(args.out, approx)
    report = {
        "method": "ttnn-khatri-rao",
        "rel_error": rel_error(t, approx),
        "time": {"sketch": t1 - t0, "recover": t2 - t1, "total": t2 - t0},
        "ranks": {f"{a[0]},{a[1]}": r for a, r in approx.ranks.items()},
        "storage": ttn_storage(approx),
    }
    _emit(report, args.out)


def _read_manifest(path):
    if not os.path.isfile(path):
        raise InputError(f"manifest not found: {path}")
    base = os.path.dirname(os.path.abspath(path))
    with open(path) as f:
        try:
            obj = json.load(f)
        except json.JSONDecodeError as exc:
            raise InputError(f"malformed manifest: {exc}") from None
    terms = obj.get("terms") if isinstance(obj, dict) else obj
    if not isinstance(terms, list) or not terms:
        raise InputError("manifest must list terms as {'path': ..., 'lambda': ...}")
    out = []
    for term in terms:
        if not isinstance(term, dict) or "path" not in term:
            raise InputError(f"bad manifest entry {term!r}")
        p = term["path"]
        out.append((p if os.path.isabs(p) or ":" in p else os.path.join(base, p), float(term.get("lambda", 1.0))))
    return out


def cmd_stream(args):
    terms = _read_manifest(args.manifest)
    first = _load(terms[0][0], args.tree)
    tree = first.tree if isinstance(first, TtnTensor) else _tree(args.tree, first.ndim)
    shape = first.shape
    kind = "khatri_rao" if isinstance(first, TtnTensor) or args.khatri_rao else "gaussian"
    cfg = TtnnConfig(args.rank, args.oversample, _spec(args, kind), args.ls_mode)
    state = None
    if args.resume:
        state, _ = io.read_state(args.resume)
    acc = StreamCompressor(tree, shape, cfg, state)
    for i, (path, lam) in enumerate(terms):
        term = first if i == 0 else _load(path, args.tree)
        acc.ingest(term, lam)
        del term
        first = None
    if args.checkpoint:
        io.write_state(args.checkpoint, acc.state)
    approx = acc.finalize()
    if args.out:
        io.write_ttn(args.out, approx)
    _emit({"terms": len(terms), "ranks": {f"{a[0]},{a[1]}": r for a, r in approx.ranks.items()},
           "storage": ttn_storage(approx)}, args.out)


def cmd_experiment(args):
    base = dict(tree=args.tree or "toy", seed=args.seed, timing=not args.no_timing)
    if args.trials is not None:
        base["trials"] = args.trials
    if args.ranks:
        base["ranks"] = parse_ranks(args.ranks)
    if args.oversample is not None:
        base["overs"] = args.oversample
    if args.n is not None:
        base["n"] = args.n
    if args.which == "hilbert":
        cfg = ExperimentConfig(name="hilbert", out=args.out or "hilbert.csv", **base)
        run_hilbert(cfg, log=_stderr if args.verbose else None)
        print(cfg.out)
    else:
        defaults = {"n": 100, "ranks": (4, 8, 16, 24, 32), "overs": 10, "trials": 10}
        cfg = ExperimentConfig(name="rounding", out=args.out or "rounding.csv",
                               stored_rank=args.stored_rank, **{**defaults, **base})
        run_rounding(cfg, log=_stderr if args.verbose else None)
        for decay in cfg.decays:
            stem, _, ext = cfg.out.rpartition(".")
            print(f"{stem}_{decay}.{ext}")


def _stderr(msg):
    print(msg, file=sys.stderr)


def cmd_audit(args):
    t = _load(args.input, args.tree)
    if isinstance(t, TtnTensor):
        t = to_dense(t)
    tree = _tree(args.tree, t.ndim)
    rhat = args.rhat if args.rhat is not None else max(args.rank - 2, 0)
    if rhat >= args.rank:
        raise PreconditionError(f"need r̂ < r, got r̂={rhat}, r={args.rank}")
    if args.method == "expected":
        rep = expected_audit(t, tree, args.rank, rhat, args.oversample, args.trials, args.seed, args.ls_mode)
        _emit(rep.to_dict(), args.out)
        return 0 if rep.passed else 1
    rows = []
    ok = True
    for k in range(args.trials):
        cfg = TtnnConfig(args.rank, args.oversample, DrmSpec("gaussian", args.seed + k), args.ls_mode)
        rep = deterministic_audit(t, tree, cfg, rhat, args.method)
        rows.append(rep.to_dict())
        ok = ok and rep.passed
    _emit({"method": args.method, "trials": rows, "passed": ok}, args.out)
    return 0 if ok else 1


def cmd_plan(args):
    tree = _tree(args.tree, args.d)
    print(reuse_plan(tree).to_json())


def _parser():
    p = argparse.ArgumentParser(prog="ttnn", description="Randomized compression in the tree tensor network format.")
    sub = p.add_subparsers(dest="command", required=True)

    def common(sp, rank=4, overs=3):
        sp.add_argument("--tree", default=None, help="toy, tucker, tt, binary or a tree JSON file")
        sp.add_argument("--rank", type=int, default=rank)
        sp.add_argument("--oversample", type=int, default=overs)
        sp.add_argument("--seed", type=int, default=0)
        sp.add_argument("--ls-mode", choices=("fast", "stabilized"), default="fast")
        sp.add_argument("--out", default=None)

    c = sub.add_parser("compress", help="compress a dense tensor")
    c.add_argument("input", help="tensor file, TTN directory or synthetic spec")
    c.add_argument("--method", choices=("ttnn", "sttnn", "ttn-svd", "ttn-hmt"), default="ttnn")
    common(c)
    c.set_defaults(func=cmd_compress)

    r = sub.add_parser("round", help="round a tree tensor network with Khatri-Rao sketches")
    r.add_argument("input", help="TTN directory or randttn:... spec")
    common(r, overs=10)
    r.set_defaults(func=cmd_round)

    s = sub.add_parser("stream", help="single-pass compression of a weighted sum of terms")
    s.add_argument("manifest", help="JSON manifest listing {'path', 'lambda'} terms")
    s.add_argument("--khatri-rao", action="store_true", help="use Khatri-Rao maps for dense terms too")
    s.add_argument("--checkpoint", default=None, help="write the final sketch state here")
    s.add_argument("--resume", default=None, help="start from a sketch state checkpoint")
    common(s)
    s.set_defaults(func=cmd_stream)

    e = sub.add_parser("experiment", help="rank-sweep experiments")
    e.add_argument("which", choices=("hilbert", "rounding"))
    e.add_argument("--tree", default=None)
    e.add_argument("--ranks", default=None, help="a:b:step")
    e.add_argument("--oversample", type=int, default=None)
    e.add_argument("--trials", type=int, default=None)
    e.add_argument("--seed", type=int, default=0)
    e.add_argument("--n", type=int, default=None, help="mode size")
    e.add_argument("--stored-rank", type=int, default=40)
    e.add_argument("--no-timing", action="store_true", help="write zero time columns (byte-reproducible CSV)")
    e.add_argument("--verbose", action="store_true")
    e.add_argument("--out", default=None)
    e.set_defaults(func=cmd_experiment)

    a = sub.add_parser("audit", help="error-bound audits")
    a.add_argument("input")
    a.add_argument("--method", choices=("ttnn", "sttnn", "expected"), default="ttnn")
    a.add_argument("--rhat", type=int, default=None)
    a.add_argument("--trials", type=int, default=1)
    common(a)
    a.set_defaults(func=cmd_audit)

    pl = sub.add_parser("plan", help="print the sequential reuse plan of a tree")
    pl.add_argument("--tree", default="toy")
    pl.add_argument("--d", type=int, default=6)
    pl.set_defaults(func=cmd_plan)
    return p


def main(argv=None):
    args = _parser().parse_args(argv)
    if getattr(args, "tree", None) is None and args.command != "experiment":
        args.tree = "toy"
    try:
        workers()
        with warnings.catch_warnings():
            warnings.simplefilter("default")
            code = args.func(args)
    except (InputError, FileNotFoundError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 2
    except (PreconditionError, SingularCoreError, np.linalg.LinAlgError) as exc:
        print(f"numerical precondition failed: {exc}", file=sys.stderr)
        return 3
    except ValueError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 2
    return code or 0


if __name__ == "__main__":
    sys.exit(main())
