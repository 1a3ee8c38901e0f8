"""Computable audits of the TTNN and STTNN error bounds.

For a non-root node ``v`` with unfolding ``A = T^{I_v}``, sketches ``X, Y``,
``Q = orth(A X)`` and ``V̂`` the leading ``r̂`` right singular vectors of ``A``:

* ``ρ = sqrt(1 + ||V̂⊥^T X (V̂^T X)^†||²)``
* ``τ = sqrt(1 + ||(Y^T Q)^† Y^T Q⊥||²)``
* ``η = 1 + ||(Y^T Q)^† Y^T Q⊥||``
* ``tail = sqrt(Σ_{i>r̂} σ_i(A)²)``

The per-node deterministic bound is ``Σ_v ρ_v τ_v tail_v Π_{w after v} η_w``
with nodes ordered level-major.  Complements are never formed: a product with
``M⊥`` has the norm of the same product with ``I - M M^T``.
"""

import json
from dataclasses import asdict, dataclass, field

import numpy as np

from .kernels import EPS, orth, truncated_svd
from .rng import generator
from .sketch import DrmSpec, drm, resolve_ranks
from .sttnn import reuse_plan, sequential_sketch
from .tensor import as_tensor, frobenius_norm, matricize, unfold_matmul
from .ttn import rel_error
from .ttnn import TtnnConfig, compress_dense, recover, resolve_config

__all__ = [
    "PreconditionError",
    "NodeBound",
    "BoundReport",
    "ExpectedReport",
    "LemmaCheck",
    "node_spectra",
    "node_constants",
    "effective_x",
    "deterministic_audit",
    "expected_audit",
    "expected_constants",
    "lemma_projection_check",
    "matrix_bounds",
    "matrix_expected_rhs",
    "trial_seed",
]


class PreconditionError(ValueError):
    """A hypothesis of the audited bound does not hold."""


def _norm2(m):
    if m.size == 0:
        return 0.0
    return float(np.linalg.svd(m, compute_uv=False)[0])


def _full_column_rank(m):
    if m.shape[0] < m.shape[1]:
        return False
    s = np.linalg.svd(m, compute_uv=False)
    return bool(s.size and s[-1] > max(m.shape) * EPS * s[0])


def _rho_norm(v, x):
    """``||V⊥^T X (V^T X)^†||`` for orthonormal ``v``."""
    vx = v.T @ x
    resid = x - v @ vx
    return _norm2(resid @ np.linalg.pinv(vx))


def _tau_norm(q, y):
    """``||(Y^T Q)^† Y^T Q⊥||`` for orthonormal ``q``."""
    yq = y.T @ q
    resid = y.T - yq @ q.T
    return _norm2(np.linalg.pinv(yq) @ resid)


@dataclass
class NodeBound:
    node: tuple
    rho: float
    tau: float
    eta: float
    tail: float
    downstream: float = 1.0
    term: float = 0.0
    full_rank: bool = True


@dataclass
class BoundReport:
    method: str
    nodes: list
    error: float
    norm: float
    rhs_node: float
    rhs_global_max: float
    rhs_global_sum: float
    slack: float
    preconditions: bool
    flags: list = field(default_factory=list)

    @property
    def passed(self):
        return self.error <= self.rhs_node + self.slack

    @property
    def global_passed(self):
        return self.error <= self.rhs_global_max + self.slack

    def to_dict(self):
        out = asdict(self)
        out["nodes"] = [dict(asdict(n), node=list(n.node)) for n in self.nodes]
        out["passed"] = self.passed
        out["global_passed"] = self.global_passed
        return out

    def to_json(self):
        return json.dumps(self.to_dict(), default=_json_default)


def _json_default(x):
    if isinstance(x, float) and not np.isfinite(x):
        return str(x)
    if isinstance(x, (np.floating, np.integer)):
        return x.item()
    raise TypeError(f"not serializable: {type(x)}")


def _rhat(tree, ranks, rhat):
    if rhat is None:
        return {a: max(ranks[a] - 2, 0) for a in tree.non_root()}
    return resolve_ranks(tree, rhat, "rhat")


def _snap(tail, m):
    # a tail at rounding level means the unfolding has exact rank r̂
    return 0.0 if tail <= 64 * EPS * frobenius_norm(m) else float(tail)


def node_spectra(t, tree, rhat):
    """Per node, the leading ``r̂`` right singular vectors of ``T^{I_v}``
    (as columns) and the tail beyond them.  Independent of the sketches."""
    t = as_tensor(t)
    rhat = resolve_ranks(tree, rhat, "rhat")
    out = {}
    for a in tree.non_root():
        m = matricize(t, tree.axes(a))
        if rhat[a] == 0:
            out[a] = (np.zeros((m.shape[1], 0)), frobenius_norm(m))
            continue
        _, _, vt, tail = truncated_svd(m, rhat[a])
        out[a] = (vt.T, _snap(tail, m))
    return out


def node_constants(t, tree, ranks, rhat, xs, ys, spectra=None):
    """Per-node ``ρ, τ, η`` and tails for given (effective) sketches.

    ``xs[v]`` is the ``n_C x r`` map applied to ``T^{I_v}``; ``ys[v]`` the
    ``n_I x (r+p)`` map.  A node whose ``Y^T T X`` is rank deficient gets
    infinite constants and ``full_rank = False``.  ``spectra`` may hold the
    output of :func:`node_spectra` for reuse across draws.
    """
    t = as_tensor(t)
    ranks = resolve_ranks(tree, ranks)
    rhat = _rhat(tree, ranks, rhat)
    for a in tree.non_root():
        if not 0 <= rhat[a] < ranks[a]:
            raise PreconditionError(f"node {a}: need 0 <= r̂ < r, got r̂={rhat[a]}, r={ranks[a]}")
    spectra = node_spectra(t, tree, rhat) if spectra is None else spectra
    out = {}
    for a in tree.non_root():
        v, tail = spectra[a]
        v = v[:, : rhat[a]]
        tx = unfold_matmul(t, tree.axes(a), xs[a])
        if not _full_column_rank(ys[a].T @ tx):
            out[a] = NodeBound(a, np.inf, np.inf, np.inf, tail, full_rank=False)
            continue
        q = orth(tx)
        rho = np.sqrt(1.0 + _rho_norm(v, xs[a]) ** 2) if v.shape[1] else 1.0
        g = _tau_norm(q, ys[a])
        out[a] = NodeBound(a, float(rho), float(np.sqrt(1.0 + g**2)), float(1.0 + g), float(tail))
    return out


def _finish(method, tree, consts, error, norm, slack):
    order = tree.non_root()
    flags = [f"node {a}: Y^T T X is rank deficient" for a in order if not consts[a].full_rank]
    nodes = []
    for i, a in enumerate(order):
        c = consts[a]
        c.downstream = float(np.prod([consts[w].eta for w in order[i + 1 :]]))
        c.term = c.rho * c.tau * c.tail * c.downstream if c.tail else 0.0
        nodes.append(c)
    rhs = float(sum(n.term for n in nodes))
    rho = max(n.rho for n in nodes)
    tau = max(n.tau for n in nodes)
    eta = max(n.eta for n in nodes)
    geo = float(sum(eta**s for s in range(len(nodes))))
    tails = np.array([n.tail for n in nodes])
    scale = rho * tau * geo
    gmax = float(scale * tails.max()) if tails.max() else 0.0
    gsum = float(scale * np.sqrt(np.sum(tails**2))) if tails.max() else 0.0
    return BoundReport(method, nodes, float(error), float(norm), rhs, gmax, gsum, slack, not flags, flags)


def effective_x(tree, shape, entry, ys):
    """Map ``X_eff`` with ``T_S^{I_v} X' = T^{I_v} X_eff`` for a sequential sketch.

    ``entry`` is the per-node record of :func:`sequential_sketch`:
    ``(source, rest_labels, rest_sizes, X')``.
    """
    _, rest, sizes, xs = entry
    arr = xs.reshape(list(sizes) + [xs.shape[1]], order="F")
    labels = list(rest) + ["col"]
    for lab in list(rest):
        if not isinstance(lab, tuple):
            continue
        s = lab[1]
        ax = labels.index(lab)
        arr = np.tensordot(ys[s], arr, axes=([1], [ax]))
        modes = list(tree.indices(s))
        arr = arr.reshape([shape[i - 1] for i in modes] + list(arr.shape[1:]), order="F")
        labels = modes + [x for x in labels if x != lab]
    perm = sorted(range(len(labels) - 1), key=lambda j: labels[j]) + [len(labels) - 1]
    arr = arr.transpose(perm)
    return arr.reshape(-1, xs.shape[1], order="F")


def deterministic_audit(t, tree, cfg, rhat=None, method="ttnn", slack=1e-12, spectra=None):
    """Per-draw bound check for TTNN (``method="ttnn"``) or STTNN (``"sttnn"``).

    Compresses ``t`` with ``cfg``, evaluates the constants with the drawn
    sketches and compares the measured error against the per-node bound plus
    ``slack * ||T||``.
    """
    t = as_tensor(t)
    tree.check()
    if cfg.spec.kind != "gaussian":
        raise ValueError("bound audits use Gaussian maps")
    ranks, overs = resolve_config(cfg, tree, t.shape)
    ys = {a: drm(cfg.spec, tree, t.shape, a, "Y", ranks, overs) for a in tree.non_root()}
    if method == "ttnn":
        approx = compress_dense(t, tree, cfg)
        xs = {a: drm(cfg.spec, tree, t.shape, a, "X", ranks, overs) for a in tree.non_root()}
    elif method == "sttnn":
        record = {}
        state = sequential_sketch(t, tree, ranks, overs, cfg.spec, reuse_plan(tree), record=record)
        approx = recover(state, cfg.ls_mode)
        xs = {a: effective_x(tree, t.shape, record[a], ys) for a in tree.non_root()}
    else:
        raise ValueError(f"unknown method {method!r}")
    consts = node_constants(t, tree, ranks, rhat, xs, ys, spectra)
    norm = frobenius_norm(t)
    err = rel_error(t, approx) * norm
    return _finish(method, tree, consts, err, norm, slack * norm)


@dataclass
class ExpectedReport:
    nodes: list
    errors: list
    mean_error: float
    rhs: float
    rhs_simplified: float
    slack: float = 0.0

    @property
    def margin(self):
        return self.rhs - self.mean_error

    @property
    def passed(self):
        return self.mean_error <= self.rhs + self.slack

    def to_dict(self):
        out = asdict(self)
        out["nodes"] = [dict(n, node=list(n["node"])) for n in self.nodes]
        out["margin"] = self.margin
        out["passed"] = self.passed
        return out

    def to_json(self):
        return json.dumps(self.to_dict(), default=_json_default)


def expected_constants(r, rhat, p):
    """``(c, c')`` of the Gaussian expectation bound."""
    if p < 2 or rhat >= r - 1:
        raise PreconditionError(f"need p >= 2 and r̂ < r - 1, got r={r}, r̂={rhat}, p={p}")
    c = 1.0 + np.sqrt(r / (p - 1))
    cp = np.sqrt(1.0 + r / (p - 1)) * np.sqrt(1.0 + rhat / (r - rhat - 1))
    return float(c), float(cp)


def trial_seed(master, trial):
    """Seed of one Monte-Carlo trial, derived from ``(master, trial)``."""
    return int(generator("misc", master, trial).integers(0, 2**31 - 1))


def expected_audit(t, tree, ranks, rhat, overs, trials, seed=0, ls_mode="fast", slack=1e-12):
    """Monte-Carlo mean TTNN error against the Gaussian expectation bound,
    with ``slack * ||T||`` allowed for rounding."""
    t = as_tensor(t)
    tree.check()
    cfg = TtnnConfig(ranks, overs, DrmSpec("gaussian", seed), ls_mode)
    ranks, overs = resolve_config(cfg, tree, t.shape)
    rhat = _rhat(tree, ranks, rhat)
    order = tree.non_root()
    cs = {a: expected_constants(ranks[a], rhat[a], overs[a]) for a in order}
    nodes, rhs, weights = [], 0.0, 0.0
    for i, a in enumerate(order):
        m = matricize(t, tree.axes(a))
        tail = _snap(truncated_svd(m, rhat[a], compute_v=False)[3], m) if rhat[a] else frobenius_norm(t)
        down = float(np.prod([cs[w][0] for w in order[i + 1 :]]))
        term = down * cs[a][1] * tail
        rhs += term
        weights += down * cs[a][1]
        nodes.append({"node": a, "r": ranks[a], "rhat": rhat[a], "p": overs[a], "c": cs[a][0],
                      "c_prime": cs[a][1], "tail": float(tail), "downstream": down, "term": float(term)})
    norm = frobenius_norm(t)
    errors = []
    for k in range(trials):
        spec = DrmSpec("gaussian", trial_seed(seed, k))
        approx = compress_dense(t, tree, TtnnConfig(ranks, overs, spec, ls_mode))
        errors.append(rel_error(t, approx) * norm)
    tails = np.array([n["tail"] for n in nodes])
    simplified = weights * float(np.sqrt(np.sum(tails**2)))
    return ExpectedReport(nodes, errors, float(np.mean(errors)), float(rhs), float(simplified), slack * norm)


@dataclass(frozen=True)
class LemmaCheck:
    full_rank: bool
    lhs: float
    rhs: float

    @property
    def holds(self):
        return self.full_rank and self.lhs <= self.rhs * (1 + 1e-12)

    def __bool__(self):
        return self.holds


def lemma_projection_check(a, b, x, y):
    """``||P B|| <= ||B|| (1 + ||(Y^T Q)^† Y^T Q⊥||)`` for
    ``P = A X (Y^T A X)^† Y^T``; skipped when ``Y^T A X`` is rank deficient."""
    a, b, x, y = (np.asarray(m, dtype=np.float64) for m in (a, b, x, y))
    core = y.T @ a @ x
    if not _full_column_rank(core):
        return LemmaCheck(False, float("nan"), float("nan"))
    ax = a @ x
    pb = ax @ np.linalg.lstsq(core, y.T @ b, rcond=None)[0]
    q = orth(ax)
    rhs = frobenius_norm(b) * (1.0 + _tau_norm(q, y))
    return LemmaCheck(True, frobenius_norm(pb), float(rhs))


def matrix_bounds(a, x, y, rhat):
    """Per-draw HMT and GN errors with their deterministic bounds.

    ``rho`` and ``tau`` are the ``sqrt(1 + g²)`` factors; the ``*_plain``
    entries are the bare norms ``g``.
    """
    a = np.asarray(a, dtype=np.float64)
    u, s, vt = np.linalg.svd(a, full_matrices=False)
    e_svd = float(np.sqrt(np.sum(s[rhat:] ** 2)))
    ax = a @ x
    q = orth(ax)
    e_hmt = frobenius_norm(a - q @ (q.T @ a))
    core = y.T @ ax
    e_gn = frobenius_norm(a - ax @ np.linalg.lstsq(core, y.T @ a, rcond=None)[0])
    g_rho = _rho_norm(vt[:rhat].T, x)
    g_tau = _tau_norm(q, y)
    return {
        "e_svd": e_svd,
        "e_hmt": float(e_hmt),
        "e_gn": float(e_gn),
        "rho": float(np.sqrt(1 + g_rho**2)),
        "tau": float(np.sqrt(1 + g_tau**2)),
        "rho_plain": float(g_rho),
        "tau_plain": float(g_tau),
    }


def matrix_expected_rhs(e_svd, r, rhat, p):
    """Gaussian expectation bounds ``(HMT, GN)`` for the matrix case."""
    if p < 2 or rhat >= r - 1:
        raise PreconditionError(f"need p >= 2 and r̂ < r - 1, got r={r}, r̂={rhat}, p={p}")
    hmt = e_svd * np.sqrt(1 + rhat / (r - rhat - 1))
    return float(hmt), float(hmt * np.sqrt(1 + r / (p - 1)))

