"""TTN-SVD and TTN-HMT baselines.

Both compute an orthonormal basis ``U_v`` per non-root node and express it in
the children's bases: leaves store ``U^T``, internal nodes
``(⊗ U_child^T) U_v``, and the root is the tensor contracted with every
level-1 ``U^T``.  Bases are not nested: each comes from the full unfolding.

Tree tensor network inputs are handled without densifying, through an
orthogonalized copy of the network and small complement factors.
"""

import warnings

import numpy as np

from .kernels import economy_qr, orth, truncated_svd
from .sketch import DrmSpec, contract_groups, drm, mode_factor, resolve_ranks, _down_messages, _up_messages
from .tensor import as_tensor, matricize, mode_contract, unfold_matmul
from .tree import ROOT
from .ttn import TtnTensor, orthogonalize

__all__ = ["svd_bases", "hmt_bases", "assemble", "ttn_svd", "ttn_hmt", "complement_factors"]


def _pad(u, r, addr):
    if u.shape[1] >= r:
        return u[:, :r]
    warnings.warn(f"node {addr}: rank {r} exceeds the available {u.shape[1]}; basis zero-padded", stacklevel=3)
    return np.hstack([u, np.zeros((u.shape[0], r - u.shape[1]))])


def svd_bases(t, tree, ranks):
    """Leading left singular vectors of every node unfolding."""
    t = as_tensor(t)
    ranks = resolve_ranks(tree, ranks)
    out = {}
    for a in tree.non_root():
        m = matricize(t, tree.axes(a))
        k = min(ranks[a], min(m.shape))
        u, _, _, _ = truncated_svd(m, k, compute_v=False)
        out[a] = _pad(u, ranks[a], a)
    return out


def hmt_bases(t, tree, ranks, spec, flops=None):
    """``orth(T^{I_v} X_v)`` with the same ``X_v`` a TTNN run would draw."""
    t = as_tensor(t)
    ranks = resolve_ranks(tree, ranks)
    out = {}
    for a in tree.non_root():
        x = drm(spec, tree, t.shape, a, "X", ranks, 0)
        out[a] = _pad(orth(unfold_matmul(t, tree.axes(a), x, flops)), ranks[a], a)
    return out


def assemble(t, tree, bases, flops=None):
    """Network from per-node orthonormal bases of a dense tensor."""
    t = as_tensor(t)
    cores = {}
    for a in tree.non_root():
        u = bases[a]
        if tree[a].is_leaf:
            cores[a] = np.ascontiguousarray(u.T)
            continue
        modes = tree.indices(a)
        arr = u.reshape([t.shape[i - 1] for i in modes] + [u.shape[1]], order="F")
        groups = [(tree.indices(c), bases[c]) for c in tree.children(a)]
        m = contract_groups(arr, list(modes) + ["rank"], groups)
        cores[a] = np.moveaxis(m, -1, 0)
    groups = [(tree.indices(c), bases[c]) for c in tree.children(ROOT)]
    cores[ROOT] = contract_groups(t, list(range(1, tree.d + 1)), groups, flops)
    return TtnTensor(tree, t.shape, cores)


def complement_factors(o):
    """Triangular ``R_G`` per node of an orthogonalized network, where the
    complement frame factors as ``G_v = Q R_G`` and ``T^{I_v} = F_v G_v^T``."""
    tree = o.tree
    rg = {}
    for a in tree.order():
        rec = tree[a]
        if rec.is_leaf:
            continue
        core = o.cores[a]
        if a == ROOT:
            base, off = core, 0
        else:
            base, off = np.tensordot(rg[a], core, axes=([1], [0])), 1
        for j, c in enumerate(rec.children):
            mat = np.moveaxis(base, off + j, -1)
            mat = mat.reshape(-1, mat.shape[-1], order="F")
            rg[c] = economy_qr(mat)[1]
    return rg


def _assemble_frames(o, ws):
    """Truncate an orthogonalized network with per-node frame rotations ``W``."""
    tree = o.tree
    cores = {}
    for a in tree.order():
        core = o.cores[a]
        rec = tree[a]
        if rec.is_leaf:
            cores[a] = ws[a].T @ core
            continue
        off = 0 if a == ROOT else 1
        if a != ROOT:
            core = mode_contract(core, (0,), ws[a])
        for j, c in enumerate(rec.children):
            core = mode_contract(core, (off + j,), ws[c])
        cores[a] = core
    return TtnTensor(tree, o.shape, cores)


def _ttn_svd_ttn(t, ranks):
    o = orthogonalize(t)
    rg = complement_factors(o)
    ws = {}
    for a in t.tree.non_root():
        u, _, _ = np.linalg.svd(rg[a].T, full_matrices=False)
        ws[a] = _pad(u, ranks[a], a)
    return _assemble_frames(o, ws)


def _ttn_hmt_ttn(t, ranks, spec):
    if spec.kind != "khatri_rao":
        raise ValueError("TTN-HMT on a tree tensor network uses khatri_rao maps")
    o = orthogonalize(t)
    rmax = max(ranks.values())
    fx = {i: mode_factor(spec, t.shape, i, "X", rmax) for i in range(1, t.tree.d + 1)}
    down = _down_messages(o, _up_messages(o, fx), rmax)
    ws = {a: _pad(orth(down[a][:, : ranks[a]]), ranks[a], a) for a in t.tree.non_root()}
    return _assemble_frames(o, ws)


def ttn_svd(t, tree=None, ranks=None, bases=None):
    """TTN-SVD of a dense tensor or a tree tensor network.

    ``bases`` may hold precomputed singular vectors with at least the requested
    number of columns (they are nested, so a wider basis is truncated).
    """
    if isinstance(t, TtnTensor):
        return _ttn_svd_ttn(t, resolve_ranks(t.tree, ranks))
    tree.check()
    ranks = resolve_ranks(tree, ranks)
    if bases is None:
        bases = svd_bases(t, tree, ranks)
    return assemble(t, tree, {a: bases[a][:, : ranks[a]] for a in tree.non_root()})


def ttn_hmt(t, tree=None, ranks=None, spec=None, bases=None):
    """TTN-HMT: range-finder bases from the TTNN right sketches."""
    spec = DrmSpec() if spec is None else spec
    if isinstance(t, TtnTensor):
        return _ttn_hmt_ttn(t, resolve_ranks(t.tree, ranks), spec)
    tree.check()
    ranks = resolve_ranks(tree, ranks)
    if bases is None:
        bases = hmt_bases(t, tree, ranks, spec)
    return assemble(t, tree, {a: bases[a][:, : ranks[a]] for a in tree.non_root()})
