"""Tree tensor network Nyström: recovery from sketches, compression and
streaming accumulation."""

import warnings
from dataclasses import dataclass, field

import numpy as np

from .kernels import SingularCoreError, economy_qr, stabilized_ls_solve
from .sketch import (
    DrmSpec,
    accumulate,
    resolve_ranks,
    sketch_dense,
    sketch_ttn,
    zero_state,
)
from .tensor import as_tensor, mode_contract
from .tree import ROOT
from .ttn import TtnTensor, zeros_ttn

__all__ = [
    "TtnnConfig",
    "resolve_config",
    "recover",
    "compress_dense",
    "compress_ttn",
    "StreamCompressor",
]


@dataclass(frozen=True)
class TtnnConfig:
    """Target ranks ``r``, oversamples ``p``, random maps and least-squares mode.

    ``ranks`` and ``overs`` are integers (uniform) or per-node dicts.
    """

    ranks: object = 4
    overs: object = 3
    spec: DrmSpec = field(default_factory=DrmSpec)
    ls_mode: str = "fast"

    def __post_init__(self):
        if self.ls_mode not in ("fast", "stabilized"):
            raise ValueError(f"unknown least-squares mode {self.ls_mode!r}")


def resolve_config(cfg, tree, shape):
    """Per-node ``(ranks, overs)`` after feasibility clamping.

    Ranks are capped by ``min(n_I, n_C)``.  For Gaussian maps the oversample is
    capped so that ``r + p <= n_I``.  Khatri-Rao maps need uniform values, so
    an infeasible rank is an error there and oversampling beyond ``n_I`` is
    kept (extra sketch columns are harmless).
    """
    ranks = resolve_ranks(tree, cfg.ranks)
    overs = resolve_ranks(tree, cfg.overs, "oversample")
    total = int(np.prod(shape))
    notes = []
    for a in tree.non_root():
        n_i = int(np.prod([shape[x] for x in tree.axes(a)]))
        cap = min(n_i, total // n_i)
        if ranks[a] < 1 or overs[a] < 0:
            raise ValueError(f"node {a}: need r >= 1 and p >= 0")
        if ranks[a] > cap:
            if cfg.spec.kind == "khatri_rao":
                raise ValueError(f"node {a}: rank {ranks[a]} exceeds {cap}; khatri_rao needs uniform feasible ranks")
            notes.append(f"{a}: r {ranks[a]}->{cap}")
            ranks[a] = cap
        if cfg.spec.kind == "gaussian" and ranks[a] + overs[a] > n_i:
            notes.append(f"{a}: p {overs[a]}->{n_i - ranks[a]}")
            overs[a] = n_i - ranks[a]
    if notes:
        warnings.warn("infeasible ranks clamped: " + ", ".join(notes), stacklevel=3)
    return ranks, overs


def _solve(rf, b, mode, addr):
    try:
        return stabilized_ls_solve(rf, b, mode)
    except SingularCoreError as exc:
        raise SingularCoreError(f"node {addr}: {exc}") from None


def recover(state, ls_mode="fast"):
    """Assemble the network from a sketch state.

    Per non-root node ``Z R = qr(Ω)``.  The root core is ``Ψ_root`` with each
    child block multiplied by ``Z_child^T``; an internal core solves
    ``(⊗ Z_child^T) Ψ = B R``; a leaf solves ``Ψ = B^T R``.
    """
    tree = state.tree
    zs, rs = {}, {}
    for a in tree.non_root():
        zs[a], rs[a] = economy_qr(state.omega[a])
        if zs[a].shape[1] < state.ranks[a]:
            raise ValueError(f"node {a}: sketch has fewer rows than the rank (p < 0)")
    cores = {}
    for a in tree.order():
        rec = tree[a]
        psi = state.psi[a]
        if rec.is_leaf:
            cores[a] = _solve(rs[a], psi, ls_mode, a).T
            continue
        m = psi
        for j, c in enumerate(rec.children):
            m = mode_contract(m, (j,), zs[c])
        if a == ROOT:
            cores[a] = m
            continue
        kid = m.shape[:-1]
        mat = m.reshape(-1, m.shape[-1], order="F")
        sol = _solve(rs[a], mat, ls_mode, a)
        cores[a] = np.moveaxis(sol.reshape(kid + (sol.shape[1],), order="F"), -1, 0)
    return TtnTensor(tree, state.shape, cores)


def compress_dense(t, tree, cfg, flops=None):
    """One-pass TTNN compression of a dense tensor."""
    t = as_tensor(t)
    tree.check()
    ranks, overs = resolve_config(cfg, tree, t.shape)
    state = sketch_dense(t, tree, ranks, overs, cfg.spec, flops)
    return recover(state, cfg.ls_mode)


def compress_ttn(t, cfg):
    """Round a tree tensor network with Khatri-Rao sketches (never densified)."""
    if cfg.spec.kind != "khatri_rao":
        raise ValueError("rounding a tree tensor network requires a khatri_rao spec")
    ranks, overs = resolve_config(cfg, t.tree, t.shape)
    return recover(sketch_ttn(t, ranks, overs, cfg.spec), cfg.ls_mode)


class StreamCompressor:
    """Single-pass compression of ``Σ λ_i H_i``.

    Each ingested term is sketched once with the shared random maps and folded
    into the running state; the sum itself is never formed.
    """

    def __init__(self, tree, shape, cfg, state=None):
        tree.check()
        self.tree = tree
        self.shape = tuple(int(n) for n in shape)
        self.cfg = cfg
        self.ranks, self.overs = resolve_config(cfg, tree, self.shape)
        self.terms = 0
        if state is None:
            state = zero_state(tree, self.shape, self.ranks, self.overs, cfg.spec)
        else:
            if state.ranks != self.ranks or state.overs != self.overs or tuple(state.shape) != self.shape:
                raise ValueError("checkpoint does not match the configuration")
            self.terms = -1
        self.state = state

    def ingest(self, term, lam=1.0):
        if isinstance(term, TtnTensor):
            if term.tree != self.tree:
                raise ValueError("term tree differs from the accumulator tree")
            if tuple(term.shape) != self.shape:
                raise ValueError(f"term shape {term.shape} differs from {self.shape}")
            s = sketch_ttn(term, self.ranks, self.overs, self.cfg.spec)
        else:
            term = as_tensor(term)
            if term.shape != self.shape:
                raise ValueError(f"term shape {term.shape} differs from {self.shape}")
            s = sketch_dense(term, self.tree, self.ranks, self.overs, self.cfg.spec)
        self.state = accumulate(self.state, s, lam)
        if self.terms >= 0:
            self.terms += 1
        return self

    def finalize(self):
        """Recovered network; an empty or identically zero state gives zeros."""
        if self.terms == 0 or self.state.is_zero():
            return zeros_ttn(self.tree, self.shape, self.ranks)
        return recover(self.state, self.cfg.ls_mode)
