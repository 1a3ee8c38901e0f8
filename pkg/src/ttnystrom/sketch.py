"""Dimension reduction maps and per-node sketches.

For a non-root node ``v`` with modes ``I`` and complement ``C``:

* ``X_v`` is ``n_C x r_v`` and ``Y_v`` is ``n_I x (r_v + p_v)``;
* ``Ω_v = Y_v^T T^{I} X_v``;
* ``Ψ_v`` is ``T^{I} X_v`` for a leaf, and for an internal node the same
  product with every child's mode group contracted against ``Y_child``.  It is
  stored as a tensor of shape ``(r_c1+p_c1, ..., r_cm+p_cm, r_v)``;
* the root's ``Ψ`` is the tensor contracted with each child's ``Y``, of shape
  ``(r_c1+p_c1, ..., r_cm+p_cm)``.
"""

from dataclasses import dataclass, field, replace

import numpy as np

from .rng import gaussian
from .tensor import as_tensor, kr_rows, mode_contract, unfold_matmul
from .tree import ROOT, LevelEntry

__all__ = [
    "DrmSpec",
    "SketchState",
    "resolve_ranks",
    "drm",
    "mode_factor",
    "sketch_dense",
    "sketch_ttn",
    "accumulate",
    "zero_state",
    "contract_groups",
    "restrict_state",
]

KINDS = ("gaussian", "khatri_rao")


@dataclass(frozen=True)
class DrmSpec:
    """Which random maps to draw.  ``(spec, node, side)`` fixes the matrix.

    ``cache`` optionally holds earlier draws so that rank sweeps reuse the
    column prefixes of one wide draw; it never changes the values.
    """

    kind: str = "gaussian"
    seed: int = 0
    cache: object = field(default=None, compare=False, repr=False)

    def __post_init__(self):
        if self.kind not in KINDS:
            raise ValueError(f"unknown DRM kind {self.kind!r}")

    def without_cache(self):
        return replace(self, cache=None)


def resolve_ranks(tree, value, name="rank"):
    """Expand an integer or partial mapping to a full per-node dict."""
    if isinstance(value, dict):
        out = {tuple(a): int(v) for a, v in value.items()}
        missing = [a for a in tree.non_root() if a not in out]
        if missing:
            raise ValueError(f"{name} missing for nodes {missing}")
        return {a: out[a] for a in tree.non_root()}
    return {a: int(value) for a in tree.non_root()}


def _sizes(shape, axes):
    return int(np.prod([shape[a] for a in axes]))


def _uniform(ranks, overs):
    rs, ps = set(ranks.values()), set(overs.values())
    if len(rs) != 1 or len(ps) != 1:
        raise ValueError("khatri_rao sketches require uniform r and p across nodes")
    return rs.pop(), ps.pop()


def mode_factor(spec, shape, mode, side, cols):
    """Per-mode Khatri-Rao factor for 1-based ``mode``."""
    return gaussian(("mode", spec.seed, mode, side), shape[mode - 1], cols, spec.cache)


def drm(spec, tree, shape, node, side, ranks, overs, label_tail=()):
    """Random map of node ``node`` (an address or a :class:`LevelEntry`).

    ``side`` is ``"X"`` (complement side, ``r`` columns) or ``"Y"`` (node side,
    ``r + p`` columns).  Dummy entries map to the identity.
    """
    if side not in ("X", "Y"):
        raise ValueError("side must be 'X' or 'Y'")
    if isinstance(node, LevelEntry):
        if node.dummy:
            n = _sizes(shape, [i - 1 for i in node.indices])
            return np.eye(n)
        node = node.origin
    node = tuple(node)
    if node == ROOT:
        raise ValueError("the root has no random maps")
    ranks = resolve_ranks(tree, ranks)
    overs = resolve_ranks(tree, overs, "oversample")
    r, p = ranks[node], overs[node]
    cols = r if side == "X" else r + p
    if spec.kind == "gaussian":
        axes = tree.complement_axes(node) if side == "X" else tree.axes(node)
        ell, k = node
        return gaussian(("node", spec.seed, ell, k, side) + tuple(label_tail),
                        _sizes(shape, axes), cols, spec.cache)
    _uniform(ranks, overs)
    modes = tree.indices(node)
    if side == "X":
        modes = tuple(i for i in range(1, tree.d + 1) if i not in modes)
    return kr_rows([mode_factor(spec, shape, i, side, cols) for i in modes])


@dataclass
class SketchState:
    tree: object
    shape: tuple
    ranks: dict
    overs: dict
    spec: DrmSpec
    omega: dict
    psi: dict

    def compatible(self, other):
        return (
            self.tree == other.tree
            and tuple(self.shape) == tuple(other.shape)
            and self.ranks == other.ranks
            and self.overs == other.overs
            and self.spec.without_cache() == other.spec.without_cache()
        )

    def psi_matrix(self, addr):
        """Ψ of ``addr`` in matrix form (root: a single column)."""
        p = self.psi[addr]
        if addr == ROOT:
            return p.reshape(-1, 1, order="F")
        return p.reshape(-1, p.shape[-1], order="F")

    def arrays(self):
        """All (kind, node, array) triples in level-major order."""
        out = [("psi", ROOT, self.psi[ROOT])]
        for a in self.tree.non_root():
            out.append(("omega", a, self.omega[a]))
            out.append(("psi", a, self.psi[a]))
        return out

    def is_zero(self):
        return all(not np.any(x) for _, _, x in self.arrays())


def _psi_shape(tree, shape, ranks, overs, addr):
    kids = tuple(ranks[c] + overs[c] for c in tree.children(addr))
    if addr == ROOT:
        return kids
    if tree[addr].is_leaf:
        return (_sizes(shape, tree.axes(addr)), ranks[addr])
    return kids + (ranks[addr],)


def zero_state(tree, shape, ranks, overs, spec):
    ranks = resolve_ranks(tree, ranks)
    overs = resolve_ranks(tree, overs, "oversample")
    omega = {a: np.zeros((ranks[a] + overs[a], ranks[a])) for a in tree.non_root()}
    psi = {a: np.zeros(_psi_shape(tree, shape, ranks, overs, a)) for a in tree.order()}
    return SketchState(tree, tuple(shape), ranks, overs, spec, omega, psi)


def contract_groups(arr, labels, groups, flops=None):
    """Contract groups of labelled axes against matrices.

    ``labels`` names each axis of ``arr``; ``groups`` is a list of
    ``(label_tuple, matrix)``.  Each group's axes (in increasing label order)
    are contracted with the matrix rows.  The result has one axis per group,
    in group order, followed by the untouched axes in their original order.
    Larger groups are contracted first, which shrinks dense inputs fastest.
    """
    labels = list(labels)
    order = sorted(range(len(groups)), key=lambda j: -np.prod([arr.shape[labels.index(x)] for x in groups[j][0]]))
    for j in order:
        names, mat = groups[j]
        axes = sorted(labels.index(x) for x in names)
        arr = mode_contract(arr, axes, mat, flops)
        pos = axes[0]
        labels = [x for i, x in enumerate(labels) if i not in axes]
        labels.insert(pos, ("group", j))
    front = [labels.index(("group", j)) for j in range(len(groups))]
    rest = [i for i, x in enumerate(labels) if not (isinstance(x, tuple) and x[:1] == ("group",))]
    return np.asfortranarray(arr.transpose(front + rest))


def _internal_psi(tx, tree, shape, addr, ys, flops=None):
    """Contract each child's mode group of ``tx = T^{I} X`` with its ``Y``."""
    modes = tree.indices(addr)
    sizes = [shape[i - 1] for i in modes]
    arr = tx.reshape(sizes + [tx.shape[1]], order="F")
    groups = [(tree.indices(c), ys[c]) for c in tree.children(addr)]
    return contract_groups(arr, list(modes) + ["rank"], groups, flops)


def _root_psi(t, tree, ys, flops=None):
    groups = [(tree.indices(c), ys[c]) for c in tree.children(ROOT)]
    return contract_groups(t, list(range(1, tree.d + 1)), groups, flops)


def sketch_dense(t, tree, ranks, overs, spec, flops=None, record=None):
    """Sketch state of a dense tensor.

    ``record``, if a dict, receives ``T^{I} X`` per non-root node.
    """
    t = as_tensor(t)
    tree.check()
    if t.ndim != tree.d:
        raise ValueError(f"tensor has {t.ndim} modes, tree has d={tree.d}")
    ranks = resolve_ranks(tree, ranks)
    overs = resolve_ranks(tree, overs, "oversample")
    if spec.kind == "khatri_rao":
        _uniform(ranks, overs)
    shape = t.shape
    ys = {a: drm(spec, tree, shape, a, "Y", ranks, overs) for a in tree.non_root()}
    omega, psi = {}, {}
    for a in tree.non_root():
        x = drm(spec, tree, shape, a, "X", ranks, overs)
        tx = unfold_matmul(t, tree.axes(a), x, flops)
        omega[a] = ys[a].T @ tx
        if flops is not None:
            flops.add(tx.size * ys[a].shape[1])
        if record is not None:
            record[a] = tx
        if tree[a].is_leaf:
            psi[a] = tx
        else:
            psi[a] = _internal_psi(tx, tree, shape, a, ys, flops)
    psi[ROOT] = _root_psi(t, tree, ys, flops)
    return SketchState(tree, shape, ranks, overs, spec, omega, psi)


def _hcontract(m, axis, msg):
    """Contract ``axis`` of ``m`` (last axis = sketch column) with ``msg``
    (``k x c``), keeping the column index shared."""
    m = np.moveaxis(m, axis, -2)
    return np.einsum("...kc,kc->...c", m, msg, optimize=True)


def _up_messages(t, factors):
    """``F_v^T (⊙_{i in I_v} factor_i)`` for every non-root node."""
    tree = t.tree
    up = {}
    for a in sorted(tree.non_root(), reverse=True):
        core = t.cores[a]
        if tree[a].is_leaf:
            up[a] = core @ kr_rows([factors[i] for i in tree.indices(a)])
            continue
        kids = tree.children(a)
        m = np.tensordot(core, up[kids[0]], axes=([1], [0]))
        for c in kids[1:]:
            m = _hcontract(m, 1, up[c])
        up[a] = m
    return up


def _down_messages(t, up_x, cols):
    """``G_v^T X_v`` for every non-root node, where ``T^{I_v} = F_v G_v^T``."""
    tree = t.tree
    down = {}
    for a in tree.order():
        rec = tree[a]
        if rec.is_leaf:
            continue
        core = t.cores[a]
        if a == ROOT:
            base = np.repeat(core[..., None], cols, axis=-1)
        else:
            base = np.tensordot(core, down[a], axes=([0], [0]))
        kids = rec.children
        for j, c in enumerate(kids):
            m = base
            # remove siblings from the highest axis down so positions stay valid
            for s in reversed(range(len(kids))):
                if s != j:
                    m = _hcontract(m, s, up_x[kids[s]])
            down[c] = m
    return down


def sketch_ttn(t, ranks, overs, spec):
    """Khatri-Rao sketch state of a tree tensor network, never densified.

    Per-leaf factor products travel up the tree through the cores (``up``
    messages), and complement products travel down (``down`` messages).  Cost
    is linear in the mode sizes.
    """
    if spec.kind != "khatri_rao":
        raise ValueError("sketching a tree tensor network requires a khatri_rao spec")
    tree = t.tree
    ranks = resolve_ranks(tree, ranks)
    overs = resolve_ranks(tree, overs, "oversample")
    r, p = _uniform(ranks, overs)
    shape = t.shape
    fx = {i: mode_factor(spec, shape, i, "X", r) for i in range(1, tree.d + 1)}
    fy = {i: mode_factor(spec, shape, i, "Y", r + p) for i in range(1, tree.d + 1)}
    up_x = _up_messages(t, fx)
    up_y = _up_messages(t, fy)
    down = _down_messages(t, up_x, r)
    omega, psi = {}, {}
    for a in tree.non_root():
        omega[a] = up_y[a].T @ down[a]
        core = t.cores[a]
        if tree[a].is_leaf:
            psi[a] = core.T @ down[a]
            continue
        m = np.tensordot(core, down[a], axes=([0], [0]))
        for j, c in enumerate(tree.children(a)):
            m = mode_contract(m, (j,), up_y[c])
        psi[a] = m
    m = t.cores[ROOT]
    for j, c in enumerate(tree.children(ROOT)):
        m = mode_contract(m, (j,), up_y[c])
    psi[ROOT] = np.asfortranarray(m)
    return SketchState(tree, shape, ranks, overs, spec, omega, psi)


def accumulate(state, other, lam=1.0):
    """``state + lam * other`` entrywise; both must share tree, ranks and spec."""
    if not state.compatible(other):
        raise ValueError("sketch states differ in tree, shape, ranks, oversamples or spec")
    omega = {a: state.omega[a] + lam * other.omega[a] for a in state.omega}
    psi = {a: state.psi[a] + lam * other.psi[a] for a in state.psi}
    return SketchState(state.tree, state.shape, state.ranks, state.overs, state.spec, omega, psi)


def restrict_state(state, ranks, overs=None):
    """State for smaller ranks cut out of a wider one.

    Random maps are column-nested, so the sketch at ``(r, p)`` is the leading
    block of the sketch at ``(R, P)`` whenever ``r <= R`` and
    ``r + p <= R + P``.  The result equals sketching from scratch up to
    rounding in the products.
    """
    tree = state.tree
    ranks = resolve_ranks(tree, ranks)
    overs = dict(state.overs) if overs is None else resolve_ranks(tree, overs, "oversample")
    for a in tree.non_root():
        if ranks[a] > state.ranks[a] or ranks[a] + overs[a] > state.ranks[a] + state.overs[a]:
            raise ValueError(f"node {a}: cannot restrict to r={ranks[a]}, p={overs[a]}")
    if state.spec.kind == "khatri_rao":
        _uniform(ranks, overs)
    w = {a: ranks[a] + overs[a] for a in tree.non_root()}
    omega = {a: state.omega[a][: w[a], : ranks[a]] for a in tree.non_root()}
    psi = {}
    for a in tree.order():
        kids = tuple(slice(0, w[c]) for c in tree.children(a))
        if a == ROOT:
            psi[a] = state.psi[a][kids]
        elif tree[a].is_leaf:
            psi[a] = state.psi[a][:, : ranks[a]]
        else:
            psi[a] = state.psi[a][kids + (slice(0, ranks[a]),)]
    return SketchState(tree, state.shape, ranks, overs, state.spec, omega, psi)
