"""Hilbert-tensor and TTN-rounding rank sweeps.

The Hilbert sweep sketches each trial once at the largest rank and cuts the
smaller-rank sketches out of it (random maps are column-nested, so this equals
sketching from scratch).  TTN-HMT reuses the same right sketches ``T^{I} X``
and its bases are nested as well.  TTN-SVD is deterministic and computed once.
STTNN is run per rank.  Time columns come from separate end-to-end runs.
"""

import csv
import time
import warnings
from dataclasses import dataclass, replace

import numpy as np

from .analysis import trial_seed
from .baselines import assemble, svd_bases, ttn_hmt, ttn_svd
from .kernels import orth
from .rng import DrawCache
from .sketch import DrmSpec, restrict_state, sketch_dense
from .sttnn import compress_dense_sequential, reuse_plan
from .tensor import FlopCounter, hilbert_tensor
from .tree import IndexTree, named_tree, tree_from_json
from .ttn import leading_block, random_ttn, rel_error
from .ttnn import TtnnConfig, compress_dense, compress_ttn, recover, resolve_config

__all__ = [
    "ExperimentConfig",
    "hilbert_config",
    "rounding_config",
    "resolve_tree",
    "run_hilbert",
    "run_rounding",
    "write_csv",
    "HILBERT_COLUMNS",
    "ROUNDING_COLUMNS",
]

HILBERT_COLUMNS = ["rank", "err_ttnn", "err_sttnn", "err_hmt", "err_svd",
                   "time_ttnn", "time_sttnn", "time_hmt", "time_svd"]
ROUNDING_COLUMNS = ["rank", "err_ttnn", "err_hmt", "err_svd", "time_ttnn", "time_hmt", "time_svd"]


@dataclass(frozen=True)
class ExperimentConfig:
    name: str = "hilbert"
    tree: object = "toy"
    d: int = 6
    n: int = 20
    ranks: tuple = (2, 4, 6, 8, 10, 12)
    overs: int = 3
    trials: int = 30
    seed: int = 0
    decays: tuple = ("quadratic", "cubic", "exponential")
    stored_rank: int = 40
    timing_trials: int = 1
    timing: bool = True
    out: str | None = None

    def __post_init__(self):
        if self.trials < 1:
            raise ValueError("trials must be >= 1")
        if not self.ranks or list(self.ranks) != sorted(set(self.ranks)):
            raise ValueError("rank sweep must be nonempty and strictly ascending")
        if self.name not in ("hilbert", "rounding"):
            raise ValueError(f"unknown experiment {self.name!r}")


def hilbert_config(**kw):
    return ExperimentConfig(**{"name": "hilbert", **kw})


def rounding_config(**kw):
    base = {"name": "rounding", "n": 100, "ranks": (4, 8, 16, 24, 32), "overs": 10, "trials": 10}
    return ExperimentConfig(**{**base, **kw})


def resolve_tree(tree, d):
    """Tree from an :class:`IndexTree`, a builtin name or a JSON file path."""
    if isinstance(tree, IndexTree):
        return tree
    try:
        return named_tree(tree, d)
    except ValueError:
        if str(tree).endswith(".json"):
            with open(tree) as f:
                return tree_from_json(f.read())
        raise


def _clock(fn, *args, **kw):
    t0 = time.perf_counter()
    out = fn(*args, **kw)
    return out, time.perf_counter() - t0


def run_hilbert(cfg, log=None):
    """Hilbert-tensor sweep.

    Returns a dict with per-trial error arrays ``(trials, ranks)`` for
    ``ttnn, sttnn, hmt, svd``, mean sketch-phase multiply-add counts, mean
    times per rank and the CSV rows (means over trials).
    """
    tree = resolve_tree(cfg.tree, cfg.d)
    tree.check()
    h = hilbert_tensor(cfg.d, cfg.n)
    ranks = list(cfg.ranks)
    rmax = ranks[-1]
    nr = len(ranks)
    err = {m: np.zeros((cfg.trials, nr)) for m in ("ttnn", "sttnn", "hmt", "svd")}
    flops = {m: np.zeros((cfg.trials, nr)) for m in ("ttnn", "sttnn")}
    times = {m: np.zeros(nr) for m in ("ttnn", "sttnn", "hmt", "svd")}
    plan = reuse_plan(tree)

    # deterministic baseline: bases once at the largest rank
    with warnings.catch_warnings():
        warnings.simplefilter("ignore")
        bases, t_basis = _clock(svd_bases, h, tree, rmax)
    for j, r in enumerate(ranks):
        sub = {a: b[:, :r] for a, b in bases.items()}
        approx, t_asm = _clock(assemble, h, tree, sub)
        err["svd"][:, j] = rel_error(h, approx)
        times["svd"][j] = t_basis + t_asm

    for k in range(cfg.trials):
        spec = DrmSpec("gaussian", trial_seed(cfg.seed, k))
        top = TtnnConfig(rmax, cfg.overs, spec)
        rk, pk = resolve_config(top, tree, h.shape)
        record = {}
        state = sketch_dense(h, tree, rk, pk, spec, record=record)
        hmt_top = assemble(h, tree, {a: orth(record[a]) for a in tree.non_root()})
        del record
        cache_spec = replace(spec, cache=DrawCache())
        for j in reversed(range(nr)):
            r = ranks[j]
            cfg_r = TtnnConfig(r, cfg.overs, spec)
            with warnings.catch_warnings():
                warnings.simplefilter("ignore")
                rr, pr = resolve_config(cfg_r, tree, h.shape)
            err["ttnn"][k, j] = rel_error(h, recover(restrict_state(state, rr, pr)))
            err["hmt"][k, j] = rel_error(h, leading_block(hmt_top, rr))
            fc = FlopCounter()
            seq, t_seq = _clock(compress_dense_sequential, h, tree, replace(cfg_r, spec=cache_spec), plan, fc)
            err["sttnn"][k, j] = rel_error(h, seq)
            flops["sttnn"][k, j] = fc.count
            times["sttnn"][j] += t_seq / cfg.trials
        del state, hmt_top, cache_spec
        if log:
            log(f"trial {k + 1}/{cfg.trials}: ttnn {err['ttnn'][k]}")

    spec0 = DrmSpec("gaussian", trial_seed(cfg.seed, 0))
    for j, r in enumerate(ranks):
        cfg_r = TtnnConfig(r, cfg.overs, spec0)
        fc = FlopCounter()
        with warnings.catch_warnings():
            warnings.simplefilter("ignore")
            t_nn = min(_clock(compress_dense, h, tree, cfg_r, fc)[1] for _ in range(cfg.timing_trials))
            t_hmt = min(_clock(ttn_hmt, h, tree, r, spec0)[1] for _ in range(cfg.timing_trials))
        flops["ttnn"][:, j] = fc.count // cfg.timing_trials
        times["ttnn"][j] = t_nn
        times["hmt"][j] = t_hmt

    rows = []
    for j, r in enumerate(ranks):
        rows.append([r] + [float(err[m][:, j].mean()) for m in ("ttnn", "sttnn", "hmt", "svd")]
                    + [float(times[m][j]) if cfg.timing else 0.0 for m in ("ttnn", "sttnn", "hmt", "svd")])
    out = {"ranks": ranks, "errors": err, "flops": flops, "times": times, "rows": rows}
    if cfg.out:
        write_csv(cfg.out, HILBERT_COLUMNS, rows)
    return out


def run_rounding(cfg, log=None):
    """TTN rounding sweep per decay; returns ``{decay: result}``.

    The input is a random network with orthogonal-CP cores at the stored
    rank; each trial draws fresh Khatri-Rao maps.  Errors are measured on
    the networks directly.
    """
    tree = resolve_tree(cfg.tree, cfg.d)
    tree.check()
    shape = (cfg.n,) * tree.d
    ranks = list(cfg.ranks)
    results = {}
    for decay in cfg.decays:
        t = random_ttn(tree, shape, cfg.stored_rank, decay, seed=cfg.seed)
        nr = len(ranks)
        err = {m: np.zeros((cfg.trials, nr)) for m in ("ttnn", "hmt", "svd")}
        times = {m: np.zeros((cfg.trials, nr)) for m in ("ttnn", "hmt", "svd")}
        for k in range(cfg.trials):
            spec = DrmSpec("khatri_rao", trial_seed(cfg.seed, k))
            for j, r in enumerate(ranks):
                cfg_r = TtnnConfig(r, cfg.overs, spec)
                a, times["ttnn"][k, j] = _clock(compress_ttn, t, cfg_r)
                b, times["hmt"][k, j] = _clock(ttn_hmt, t, None, r, spec)
                c, times["svd"][k, j] = _clock(ttn_svd, t, None, r)
                err["ttnn"][k, j] = rel_error(t, a)
                err["hmt"][k, j] = rel_error(t, b)
                err["svd"][k, j] = rel_error(t, c)
            if log:
                log(f"{decay} trial {k + 1}/{cfg.trials}")
        rows = []
        for j, r in enumerate(ranks):
            rows.append([r] + [float(err[m][:, j].mean()) for m in ("ttnn", "hmt", "svd")]
                        + [float(times[m][:, j].mean()) if cfg.timing else 0.0 for m in ("ttnn", "hmt", "svd")])
        results[decay] = {"ranks": ranks, "errors": err, "times": times, "rows": rows}
        if cfg.out:
            write_csv(_decay_path(cfg.out, decay), ROUNDING_COLUMNS, rows)
    return results


def _decay_path(out, decay):
    stem, dot, ext = out.rpartition(".")
    return f"{stem}_{decay}.{ext}" if dot else f"{out}_{decay}.csv"


def write_csv(path, columns, rows):
    with open(path, "w", newline="") as f:
        w = csv.writer(f, lineterminator="\n")
        w.writerow(columns)
        for row in rows:
            w.writerow([row[0]] + [f"{x:.10e}" for x in row[1:]])
