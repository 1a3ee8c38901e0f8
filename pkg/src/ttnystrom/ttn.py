"""Tree tensor network values.

Core layout for a node with children ``c_1..c_m``:

* root: ``(r_{c_1}, ..., r_{c_m})``
* internal node: ``(r_v, r_{c_1}, ..., r_{c_m})``
* leaf: ``(r_v, n_I)`` where ``n_I`` is the product of the leaf's mode sizes
"""

from dataclasses import dataclass

import numpy as np

from .kernels import economy_qr, haar_orthogonal
from .tensor import frobenius_norm, mode_contract
from .tree import ROOT

__all__ = [
    "TtnTensor",
    "core_shape",
    "to_dense",
    "inner",
    "norm",
    "rel_error",
    "diff_norm",
    "dense_diff_norm",
    "random_ttn",
    "zeros_ttn",
    "leading_block",
    "ttn_storage",
    "ttn_ranks",
    "orthogonalize",
    "DECAYS",
]

DECAYS = ("quadratic", "cubic", "exponential", "none")


def core_shape(tree, shape, ranks, addr):
    rec = tree[addr]
    kids = tuple(ranks[c] for c in rec.children)
    if addr == ROOT:
        return kids
    if rec.is_leaf:
        return (ranks[addr], int(np.prod([shape[a] for a in rec.axes])))
    return (ranks[addr],) + kids


@dataclass
class TtnTensor:
    tree: object
    shape: tuple
    cores: dict

    def __post_init__(self):
        self.shape = tuple(int(n) for n in self.shape)
        if len(self.shape) != self.tree.d:
            raise ValueError(f"shape has {len(self.shape)} modes, tree has d={self.tree.d}")
        if self.tree.depth < 1:
            raise ValueError("a tree tensor network needs at least one level below the root")
        missing = [a for a in self.tree.order() if a not in self.cores]
        if missing:
            raise ValueError(f"missing cores for nodes {missing}")
        ranks = self.ranks
        for addr in self.tree.order():
            want = core_shape(self.tree, self.shape, ranks, addr)
            got = np.shape(self.cores[addr])
            if tuple(got) != want:
                raise ValueError(f"core {addr} has shape {got}, expected {want}")

    @property
    def ranks(self):
        return {a: int(np.shape(self.cores[a])[0]) for a in self.tree.non_root()}

    @property
    def root(self):
        return self.cores[ROOT]

    def copy(self):
        return TtnTensor(self.tree, self.shape, {a: np.array(c) for a, c in self.cores.items()})

    def scaled(self, lam):
        cores = dict(self.cores)
        cores[ROOT] = lam * cores[ROOT]
        return TtnTensor(self.tree, self.shape, cores)


def ttn_ranks(t):
    return t.ranks


def ttn_storage(t):
    return int(sum(np.size(c) for c in t.cores.values()))


def _subtree_dense(t, addr):
    """Node frame as a tensor over the node's modes (sorted) plus a trailing
    rank mode; for the root, the full tensor."""
    tree = t.tree
    rec = tree[addr]
    core = t.cores[addr]
    if rec.is_leaf:
        sizes = [t.shape[a] for a in rec.axes]
        return core.T.reshape(sizes + [core.shape[0]], order="F")
    # child rank modes first, parent rank mode last
    cur = np.asfortranarray(core if addr == ROOT else np.moveaxis(core, 0, -1))
    labels = []
    for c in rec.children:
        sub = _subtree_dense(t, c)
        pos = len(labels)
        cur = mode_contract(cur, (pos,), np.moveaxis(sub, -1, 0))
        labels.extend(tree[c].axes)
    if labels != sorted(labels):
        order = list(np.argsort(labels))
        cur = np.asfortranarray(cur.transpose(order + list(range(len(labels), cur.ndim))))
    return cur


def to_dense(t):
    return _subtree_dense(t, ROOT)


def dense_diff_norm(dense, t, block=None):
    """``||dense - to_dense(t)||_F`` evaluated in column blocks.

    With ``T = F_1 M`` split at the root's first child, ``M`` is formed once
    and ``dense - F_1 M`` is reduced block by block, so the approximant is
    never held in full.
    """
    dense = np.asarray(dense)
    tree = t.tree
    kids = tree.children(ROOT)
    modes = [m for c in kids for m in tree[c].axes]
    first = _subtree_dense(t, kids[0])
    n1 = int(np.prod(first.shape[:-1]))
    contiguous = modes == list(range(tree.d)) and dense.flags.f_contiguous
    if not contiguous or len(kids) < 2 or n1 * 4 < first.shape[-1] * 64:
        return frobenius_norm(dense - to_dense(t))
    f1 = first.reshape(n1, -1, order="F")
    cur = np.asfortranarray(t.cores[ROOT])
    pos = 1
    for c in kids[1:]:
        cur = mode_contract(cur, (pos,), np.moveaxis(_subtree_dense(t, c), -1, 0))
        pos += len(tree[c].axes)
    m = cur.reshape(cur.shape[0], -1, order="F")
    h = dense.reshape(n1, -1, order="F")
    block = max(1, 2**16 // n1) if block is None else block
    total = 0.0
    for lo in range(0, h.shape[1], block):
        e = h[:, lo : lo + block] - f1 @ m[:, lo : lo + block]
        e = e.ravel(order="K")
        total += float(e @ e)
    return float(np.sqrt(total))


def _gram_up(a, b, addr):
    tree = a.tree
    rec = tree[addr]
    if rec.is_leaf:
        return a.cores[addr] @ b.cores[addr].T
    ca = a.cores[addr]
    off = 0 if addr == ROOT else 1
    m = ca
    for c in rec.children:
        g = _gram_up(a, b, c)
        # the next child's mode of ``a`` is always at position ``off``
        m = np.tensordot(m, g, axes=([off], [0]))
    cb = b.cores[addr]
    kids = list(range(off, cb.ndim))
    return np.tensordot(m, cb, axes=(kids, kids))


def _check_pair(a, b):
    if a.tree != b.tree or tuple(a.shape) != tuple(b.shape):
        raise ValueError("tree tensor networks must share tree and shape")


def inner(a, b):
    """Frobenius inner product by bottom-up Gram messages."""
    _check_pair(a, b)
    return float(_gram_up(a, b, ROOT))


def norm(t):
    if isinstance(t, TtnTensor):
        return frobenius_norm(orthogonalize(t).root)
    return frobenius_norm(t)


def orthogonalize(t):
    """Equivalent network whose non-root node frames have orthonormal columns.

    Leaves-up QR sweep; the root core carries the norm.  Ranks shrink to the
    QR sizes where a frame is rank deficient by shape.
    """
    tree = t.tree
    cores = {}
    pend = {}
    for addr in sorted(tree.order(), reverse=True):
        rec = tree[addr]
        core = np.asarray(t.cores[addr], dtype=np.float64)
        off = 0 if addr == ROOT else 1
        for j, c in enumerate(rec.children):
            core = np.moveaxis(np.tensordot(pend.pop(c), core, axes=([1], [off + j])), 0, off + j)
        if addr == ROOT:
            cores[addr] = core
        elif rec.is_leaf:
            q, r = economy_qr(core.T)
            cores[addr] = q.T
            pend[addr] = r
        else:
            kid_shape = core.shape[1:]
            mat = np.moveaxis(core, 0, -1).reshape(-1, core.shape[0], order="F")
            q, r = economy_qr(mat)
            cores[addr] = np.moveaxis(q.reshape(kid_shape + (q.shape[1],), order="F"), -1, 0)
            pend[addr] = r
    return TtnTensor(tree, t.shape, cores)


def _direct_sum(a, b, sign=-1.0):
    """Network representing ``a + sign * b`` with block-diagonal cores."""
    _check_pair(a, b)
    tree = a.tree
    ra, rb = a.ranks, b.ranks
    cores = {}
    for addr in tree.order():
        rec = tree[addr]
        ca, cb = a.cores[addr], b.cores[addr]
        if rec.is_leaf:
            cores[addr] = np.vstack([ca, cb])
            continue
        kids_a = [ra[c] for c in rec.children]
        kids_b = [rb[c] for c in rec.children]
        if addr == ROOT:
            out = np.zeros([x + y for x, y in zip(kids_a, kids_b)])
            out[tuple(slice(0, x) for x in kids_a)] = ca
            out[tuple(slice(x, None) for x in kids_a)] = sign * cb
        else:
            out = np.zeros([ra[addr] + rb[addr]] + [x + y for x, y in zip(kids_a, kids_b)])
            out[(slice(0, ra[addr]),) + tuple(slice(0, x) for x in kids_a)] = ca
            out[(slice(ra[addr], None),) + tuple(slice(x, None) for x in kids_a)] = cb
        cores[addr] = out
    return TtnTensor(tree, a.shape, cores)


def diff_norm(a, b):
    """``||a - b||_F`` for two networks without Gram cancellation."""
    return norm(_direct_sum(a, b))


def rel_error(ref, approx, method="auto"):
    """``||ref - approx||_F / ||ref||_F`` for dense arrays or networks.

    ``method="gram"`` evaluates ``||a||^2 - 2<a,b> + ||b||^2`` (clamped at 0),
    which loses accuracy below about ``1e-8``.  The default for two networks
    orthogonalizes their direct sum instead.
    """
    a_ttn = isinstance(ref, TtnTensor)
    b_ttn = isinstance(approx, TtnTensor)
    if not a_ttn or not b_ttn:
        sa = ref.shape if a_ttn else np.shape(ref)
        sb = approx.shape if b_ttn else np.shape(approx)
        if tuple(sa) != tuple(sb):
            raise ValueError(f"shape mismatch {sa} vs {sb}")
        den = norm(ref) if a_ttn else frobenius_norm(ref)
        if b_ttn:
            num = dense_diff_norm(ref, approx)
        elif a_ttn:
            num = dense_diff_norm(approx, ref)
        else:
            num = frobenius_norm(np.asarray(ref) - np.asarray(approx))
    elif method == "gram":
        aa, bb, ab = inner(ref, ref), inner(approx, approx), inner(ref, approx)
        den = np.sqrt(max(aa, 0.0))
        num = np.sqrt(max(aa - 2 * ab + bb, 0.0))
    else:
        den = norm(ref)
        num = diff_norm(ref, approx)
    if den == 0:
        return 0.0 if num == 0 else float("inf")
    return float(num / den)


def zeros_ttn(tree, shape, ranks):
    if isinstance(ranks, int):
        ranks = {a: ranks for a in tree.non_root()}
    cores = {a: np.zeros(core_shape(tree, shape, ranks, a)) for a in tree.order()}
    return TtnTensor(tree, shape, cores)


def leading_block(t, ranks):
    """Network keeping the leading ``ranks[v]`` slices of every rank mode.

    For networks built from nested bases this is the network at the smaller
    ranks.
    """
    tree = t.tree
    if isinstance(ranks, int):
        ranks = {a: ranks for a in tree.non_root()}
    cores = {}
    for a in tree.order():
        kids = tuple(slice(0, ranks[c]) for c in tree.children(a))
        core = t.cores[a]
        if a == ROOT:
            cores[a] = core[kids]
        elif tree[a].is_leaf:
            cores[a] = core[: ranks[a]]
        else:
            cores[a] = core[(slice(0, ranks[a]),) + kids]
    return TtnTensor(tree, t.shape, cores)


def decay_weights(decay, k):
    i = np.arange(1, k + 1, dtype=np.float64)
    if decay == "quadratic":
        return 1.0 / i**2
    if decay == "cubic":
        return 1.0 / i**3
    if decay == "exponential":
        return 0.5**i
    if decay == "none":
        return np.ones(k)
    raise ValueError(f"unknown decay {decay!r}; expected one of {DECAYS}")


def random_ttn(tree, shape, ranks, decay="none", seed=0):
    """Random network with orthogonal-CP cores and Haar orthonormal leaves.

    Each core is a superdiagonal tensor with weights ``σ_i`` (per ``decay``)
    multiplied along every mode by an independent Haar orthogonal matrix.
    """
    tree.check()
    shape = tuple(int(n) for n in shape)
    if isinstance(ranks, int):
        ranks = {a: ranks for a in tree.non_root()}
    cores = {}
    for addr in tree.order():
        cs = core_shape(tree, shape, ranks, addr)
        ell, k = addr
        if tree[addr].is_leaf:
            r, n = cs
            if r > n:
                raise ValueError(f"leaf {addr}: rank {r} exceeds physical size {n}")
            cores[addr] = haar_orthogonal(n, r, label=("haar", seed, ell, k, 0)).T
            continue
        k_diag = min(cs)
        w = decay_weights(decay, k_diag)
        core = np.zeros(cs)
        idx = np.arange(k_diag)
        core[(idx,) * len(cs)] = w
        for j, nj in enumerate(cs):
            h = haar_orthogonal(nj, nj, label=("haar", seed, ell, k, j + 1))
            core = mode_contract(core, (j,), h.T)
        cores[addr] = core
    return TtnTensor(tree, shape, cores)
