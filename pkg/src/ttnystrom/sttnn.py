"""Sequential TTNN: sketches taken from partially contracted tensors.

Nodes are visited level-major.  After node ``v`` is sketched from a cached
tensor ``T_S`` (``T`` with the nodes in ``S`` already contracted against their
``Y``), ``T_{S+v}`` becomes available.  Each node draws from the cached tensor
with the most contracted modes that avoids its own modes, latest first on
ties, or from ``T`` itself.
"""

import json
from dataclasses import dataclass

import numpy as np

from .rng import gaussian
from .sketch import SketchState, _internal_psi, _root_psi, drm, resolve_ranks
from .tensor import as_tensor, mode_contract, unfold_matmul
from .tree import ROOT
from .ttnn import recover, resolve_config

__all__ = ["ReusePlan", "reuse_plan", "sequential_sketch", "compress_dense_sequential"]


@dataclass(frozen=True)
class ReusePlan:
    order: tuple
    sources: dict
    root_source: tuple | None

    def source(self, addr):
        """Contracted nodes of the tensor ``addr`` is sketched from, in order."""
        return self.sources[addr]

    def needed(self):
        """Cache keys some later step reads."""
        keys = {s for s in self.sources.values() if s}
        if self.root_source:
            keys.add(self.root_source)
        return keys

    def to_json(self):
        return json.dumps({
            "order": [list(a) for a in self.order],
            "sources": {f"{a[0]},{a[1]}": [list(s) for s in self.sources[a]] for a in self.order},
            "root_source": None if self.root_source is None else [list(s) for s in self.root_source],
        })


def reuse_plan(tree):
    tree.check()
    cache = []  # (key, contracted modes), oldest first
    sources = {}
    for v in tree.non_root():
        mine = set(tree.indices(v))
        best, best_rank = (), None
        for idx, (key, modes) in enumerate(cache):
            if modes.isdisjoint(mine):
                rank = (len(modes), idx)
                if best_rank is None or rank > best_rank:
                    best, best_rank = key, rank
        sources[v] = best
        done = set().union(*(tree.indices(s) for s in best)) if best else set()
        cache.append((best + (v,), done | mine))
    level1 = set(tree.children(ROOT))
    root_source = next((k for k, _ in cache if set(k) == level1), None)
    return ReusePlan(tuple(tree.non_root()), sources, root_source)


def sequential_sketch(t, tree, ranks, overs, spec, plan=None, flops=None, record=None):
    """Sketch state built along a reuse plan.

    ``record``, if a dict, receives per node the source labels and the drawn
    ``X'`` (used by the bound audits).
    """
    t = as_tensor(t)
    plan = reuse_plan(tree) if plan is None else plan
    if spec.kind != "gaussian":
        raise ValueError("sequential sketching uses Gaussian maps")
    ranks = resolve_ranks(tree, ranks)
    overs = resolve_ranks(tree, overs, "oversample")
    shape = t.shape
    ys = {a: drm(spec, tree, shape, a, "Y", ranks, overs) for a in tree.non_root()}
    needed = plan.needed()
    last_use = {}
    for i, v in enumerate(plan.order):
        if plan.sources[v]:
            last_use[plan.sources[v]] = i
    if plan.root_source:
        last_use[plan.root_source] = len(plan.order)
    cache = {(): (t, list(range(1, tree.d + 1)))}
    omega, psi = {}, {}
    for i, v in enumerate(plan.order):
        key = plan.sources[v]
        arr, labels = cache[key]
        axes = [labels.index(m) for m in tree.indices(v)]
        rest = [x for j, x in enumerate(labels) if j not in axes]
        n_rest = arr.size // int(np.prod([arr.shape[j] for j in axes]))
        ell, k = v
        xs = gaussian(("node", spec.seed, ell, k, "X", "seq"), n_rest, ranks[v], spec.cache)
        if record is not None:
            record[v] = (key, rest, [arr.shape[labels.index(x)] for x in rest], xs)
        tx = unfold_matmul(arr, axes, xs, flops)
        omega[v] = ys[v].T @ tx
        if flops is not None:
            flops.add(tx.size * ys[v].shape[1])
        psi[v] = tx if tree[v].is_leaf else _internal_psi(tx, tree, shape, v, ys, flops)
        new = key + (v,)
        if new in needed:
            out = mode_contract(arr, axes, ys[v], flops)
            pos = min(axes)
            nl = [x for j, x in enumerate(labels) if j not in axes]
            nl.insert(pos, ("node", v))
            cache[new] = (out, nl)
        if key and last_use.get(key) == i:
            del cache[key]
    if plan.root_source:
        arr, labels = cache.pop(plan.root_source)
        perm = [labels.index(("node", c)) for c in tree.children(ROOT)]
        psi[ROOT] = np.asfortranarray(arr.transpose(perm))
    else:
        psi[ROOT] = _root_psi(t, tree, ys, flops)
    return SketchState(tree, shape, ranks, overs, spec, omega, psi)


def compress_dense_sequential(t, tree, cfg, plan=None, flops=None):
    """STTNN compression of a dense tensor."""
    t = as_tensor(t)
    tree.check()
    ranks, overs = resolve_config(cfg, tree, t.shape)
    state = sequential_sketch(t, tree, ranks, overs, cfg.spec, plan, flops)
    return recover(state, cfg.ls_mode)
