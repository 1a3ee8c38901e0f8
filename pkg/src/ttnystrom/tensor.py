"""Dense tensor primitives.

Tensors are plain ``numpy.ndarray`` objects.  Storage and every reshape use
first-index-fastest (Fortran) order, so the mode-I matricization of a tensor is
``transpose(I + complement).reshape(n_I, n_C, order="F")``.

Mode subsets passed to the functions here are 0-based numpy axes.  Tree nodes
carry 1-based mode indices and expose ``axes`` for the conversion.
"""

import numpy as np

__all__ = [
    "as_tensor",
    "complement",
    "matricize",
    "fold",
    "mode_contract",
    "unfold_matmul",
    "kron",
    "khatri_rao",
    "kr_rows",
    "frobenius_norm",
    "hilbert_tensor",
    "FlopCounter",
]


class FlopCounter:
    """Accumulates multiply-add counts of the dense kernels."""

    def __init__(self):
        self.count = 0

    def add(self, n):
        self.count += int(n)


def as_tensor(t):
    t = np.asarray(t, dtype=np.float64)
    if t.ndim < 1 or 0 in t.shape:
        raise ValueError(f"tensor must have d >= 1 and positive mode sizes, got shape {t.shape}")
    return t


def _check_axes(axes, d):
    axes = tuple(int(a) for a in axes)
    if not axes:
        raise ValueError("index subset must be nonempty")
    for a in axes:
        if a < 0 or a >= d:
            raise ValueError(f"axis {a} out of range for a {d}-mode tensor")
    if len(set(axes)) != len(axes):
        raise ValueError(f"duplicate axis in {axes}")
    return axes


def complement(axes, d):
    s = set(axes)
    return tuple(a for a in range(d) if a not in s)


def matricize(t, axes):
    """Mode-``axes`` unfolding: rows over ``axes``, columns over the rest, both
    in increasing order with the smallest mode varying fastest."""
    t = np.asarray(t)
    axes = tuple(sorted(_check_axes(axes, t.ndim)))
    comp = complement(axes, t.ndim)
    n_rows = int(np.prod([t.shape[a] for a in axes]))
    return t.transpose(axes + comp).reshape(n_rows, -1, order="F")


def fold(m, axes, shape):
    """Inverse of :func:`matricize`."""
    shape = tuple(shape)
    axes = tuple(sorted(_check_axes(axes, len(shape))))
    comp = complement(axes, len(shape))
    perm = axes + comp
    t = np.asarray(m).reshape([shape[a] for a in perm], order="F")
    return t.transpose(np.argsort(perm))


def _run(axes):
    """(start, stop) if sorted axes form a contiguous run, else None."""
    if axes[-1] - axes[0] + 1 == len(axes):
        return axes[0], axes[-1] + 1
    return None


def _block_view(t, start, stop):
    sh = t.shape
    left = int(np.prod(sh[:start]))
    mid = int(np.prod(sh[start:stop]))
    right = int(np.prod(sh[stop:]))
    return t.reshape((left, mid, right), order="F"), left, mid, right


def unfold_matmul(t, axes, m, flops=None):
    """``matricize(t, axes) @ m`` without forming the unfolding.

    Contracts the complement of ``axes`` against the rows of ``m``; returns the
    ``n_axes x c`` product ``t^{axes} @ m``.
    """
    axes = tuple(sorted(_check_axes(axes, t.ndim)))
    comp = complement(axes, t.ndim)
    m = np.asarray(m)
    n_rows = int(np.prod([t.shape[a] for a in axes]))
    n_cols = t.size // n_rows
    if m.ndim != 2 or m.shape[0] != n_cols:
        raise ValueError(f"matrix with {n_cols} rows expected, got shape {m.shape}")
    if flops is not None:
        flops.add(t.size * m.shape[1])
    if not comp:
        return t.reshape(n_rows, 1, order="F") @ m
    run = _run(axes)
    if run is None or not t.flags.f_contiguous:
        return matricize(t, axes) @ m
    tv, left, mid, right = _block_view(t, *run)
    c = m.shape[1]
    if left == 1:
        return tv.reshape(mid, right, order="F") @ m
    if right == 1:
        return tv.reshape(left, mid, order="F").T @ m
    m3 = m.reshape((left, right, c), order="F")
    if right <= left:
        out = np.zeros((mid, c))
        for b in range(right):
            out += tv[:, :, b].T @ m3[:, b, :]
        return out
    return np.matmul(tv.transpose(2, 1, 0), m3.transpose(1, 0, 2)).sum(axis=0)


def mode_contract(t, axes, u, flops=None):
    """Contract the ``axes`` modes of ``t`` with the leading modes of ``u``.

    ``u`` is either a tensor whose leading modes have the sizes of ``axes`` (in
    increasing order) or a matrix whose row count is their product.  The
    remaining modes of ``u`` replace the contracted block at position
    ``min(axes)``; the other modes of ``t`` keep their relative order.
    """
    t = np.asarray(t)
    axes = tuple(sorted(_check_axes(axes, t.ndim)))
    u = np.asarray(u)
    sizes = tuple(t.shape[a] for a in axes)
    n_i = int(np.prod(sizes))
    if u.shape[: len(axes)] == sizes:
        trail = u.shape[len(axes):]
    elif u.ndim == 2 and u.shape[0] == n_i:
        trail = u.shape[1:]
    else:
        raise ValueError(f"leading modes of u {u.shape} do not match {sizes}")
    mat = u.reshape((n_i, -1), order="F")
    c = mat.shape[1]
    if flops is not None:
        flops.add(t.size * c)
    pos = axes[0]
    rest = [t.shape[a] for a in complement(axes, t.ndim)]
    out_shape = tuple(rest[:pos]) + tuple(trail) + tuple(rest[pos:])
    run = _run(axes)
    if run is not None and t.flags.f_contiguous:
        tv, left, mid, right = _block_view(t, *run)
        # each product is arranged so its result is already Fortran-ordered
        if left == 1:
            out = (tv.reshape(mid, right, order="F").T @ mat).T
        elif right == 1:
            out = (mat.T @ tv.reshape(left, mid, order="F").T).T
        else:
            out = np.matmul(mat.T, tv.transpose(2, 1, 0)).transpose(2, 1, 0)
        return np.asfortranarray(out.reshape(out_shape, order="F"))
    # general path: bring the contracted block to the front
    comp = complement(axes, t.ndim)
    tm = t.transpose(axes + comp).reshape(n_i, -1, order="F")
    out = mat.T @ tm
    out = out.reshape(tuple(trail) + tuple(rest), order="F")
    k = len(trail)
    perm = list(range(k, k + pos)) + list(range(k)) + list(range(k + pos, k + len(rest)))
    return np.asfortranarray(out.transpose(perm))


def kron(a, b):
    return np.kron(np.atleast_2d(a), np.atleast_2d(b))


def khatri_rao(a, b):
    """Column-wise Kronecker product: column j is ``kron(a[:, j], b[:, j])``."""
    a = np.atleast_2d(a)
    b = np.atleast_2d(b)
    if a.shape[1] != b.shape[1]:
        raise ValueError(f"column counts differ: {a.shape[1]} vs {b.shape[1]}")
    return (a[:, None, :] * b[None, :, :]).reshape(a.shape[0] * b.shape[0], a.shape[1])


def kr_rows(factors):
    """Row-indexed Khatri-Rao product in first-index-fastest order.

    Row ``i_1 + n_1 i_2 + ...`` of the result is the entrywise product of row
    ``i_k`` of each factor, i.e. ``khatri_rao(f_s, ..., f_1)``.
    """
    out = np.asarray(factors[0])
    for f in factors[1:]:
        out = khatri_rao(f, out)
    return out


def frobenius_norm(t):
    return float(np.linalg.norm(np.ravel(t, order="K")))


def hilbert_tensor(d, n):
    """Tensor with entries ``1 / (1 + i_1 + ... + i_d)`` for 1-based indices."""
    if d < 1 or n < 1:
        raise ValueError("d and n must be positive")
    idx = np.arange(1, n + 1, dtype=np.float64)
    # built in C order over reversed modes so the transpose is Fortran-contiguous
    s = np.full((n,) * d, 1.0)
    for k in range(d):
        shape = [1] * d
        shape[k] = n
        s += idx.reshape(shape)
    np.reciprocal(s, out=s)
    return s.T
