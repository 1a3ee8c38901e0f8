"""Matrix-level randomized approximation kernels."""

import warnings
from dataclasses import dataclass

import numpy as np
import scipy.linalg as sla

from .rng import gaussian, generator

__all__ = [
    "LowRankFactors",
    "GnConfig",
    "SingularCoreError",
    "economy_qr",
    "orth",
    "truncated_svd",
    "eps_pinv_apply",
    "stabilized_ls_solve",
    "hmt",
    "gn",
    "haar_orthogonal",
    "EPS",
]

EPS = np.finfo(np.float64).eps


class SingularCoreError(np.linalg.LinAlgError):
    """Raised by the fast least-squares path on an exactly singular factor."""


@dataclass(frozen=True)
class LowRankFactors:
    left: np.ndarray
    right: np.ndarray

    def dense(self):
        return self.left @ self.right


@dataclass(frozen=True)
class GnConfig:
    rank: int
    oversample: int = 3
    mode: str = "fast"
    seed: int = 0

    def __post_init__(self):
        if self.rank < 1:
            raise ValueError("rank must be >= 1")
        if self.oversample < 0:
            raise ValueError("oversample must be >= 0")
        if self.mode not in ("fast", "stabilized"):
            raise ValueError(f"unknown mode {self.mode!r}")


def economy_qr(a):
    """Economy QR; ``Q`` has ``min(m, n)`` orthonormal columns."""
    a = np.asarray(a, dtype=np.float64)
    if a.size == 0:
        m, n = a.shape
        return np.zeros((m, 0)), np.zeros((0, n))
    return sla.qr(a, mode="economic", check_finite=False)


def orth(a):
    return economy_qr(a)[0]


# above this size the leading subspace is found by certified subspace iteration
_DIRECT_SVD_LIMIT = 2500


def _svd_direct(a, compute_v=True):
    m, n = a.shape
    # strongly rectangular: reduce by QR first, then decompose the square factor
    if n > 4 * m:
        if not compute_v:
            r = sla.qr(a.T, mode="r", check_finite=False)[0][: min(m, n)]
            u, s, _ = sla.svd(r.T, full_matrices=False, check_finite=False)
            return u, s, None
        q, r = economy_qr(a.T)
        u, s, wt = sla.svd(r.T, full_matrices=False, check_finite=False)
        return u, s, wt @ q.T
    if m > 4 * n:
        q, r = economy_qr(a)
        w, s, vt = sla.svd(r, full_matrices=False, check_finite=False)
        return q @ w, s, vt
    return sla.svd(a, full_matrices=False, check_finite=False, lapack_driver="gesdd")


def _svd_subspace(a, k, max_iter=30):
    """Leading singular triplets via block subspace iteration.

    Returns ``None`` unless the captured subspace leaves a residual within
    rounding error of ``a``, in which case the triplets agree with a full SVD
    to working accuracy.
    """
    m, n = a.shape
    b = min(min(m, n), max(2 * k, k + 20))
    g = generator("misc", 0, m, n)
    q = orth(a @ g.standard_normal((n, b)))
    anorm = np.linalg.norm(a)
    prev = None
    for _ in range(max_iter):
        w = orth(a.T @ q)
        q = orth(a @ w)
        s = np.linalg.svd(q.T @ a, compute_uv=False)
        if prev is not None and np.allclose(s[:k], prev[:k], rtol=0, atol=4 * EPS * s[0]):
            break
        prev = s
    small = q.T @ a
    u, s, vt = np.linalg.svd(small, full_matrices=False)
    resid = np.linalg.norm(a - q @ small)
    if resid > 50 * EPS * anorm * np.sqrt(b):
        return None
    return q @ u, s, vt, resid


def truncated_svd(a, r, compute_v=True):
    """Leading ``r`` singular triplets and the Frobenius tail beyond ``r``.

    Returns ``(U, s, Vt, tail)`` with ``U`` of shape ``m x r``; ``Vt`` may be
    ``None`` when ``compute_v`` is false.
    """
    a = np.asarray(a, dtype=np.float64)
    m, n = a.shape
    if r > min(m, n):
        warnings.warn(f"rank {r} clamped to {min(m, n)}", stacklevel=2)
        r = min(m, n)
    res = None
    if min(m, n) > _DIRECT_SVD_LIMIT and r < min(m, n) // 4:
        res = _svd_subspace(a, r)
    if res is None:
        u, s, vt = _svd_direct(a, compute_v)
        tail = float(np.sqrt(np.sum(s[r:] ** 2)))
        return u[:, :r], s[:r], None if vt is None else vt[:r], tail
    u, s, vt, resid = res
    # beyond the captured block the residual is at rounding level
    tail = float(np.sqrt(np.sum(s[r:] ** 2) + resid**2))
    return u[:, :r], s[:r], vt[:r], tail


def eps_pinv_apply(m, eps=0.0):
    """ε-pseudoinverse ``V1 Σ1^{-1} U1^T`` keeping singular values above ``eps``."""
    m = np.asarray(m, dtype=np.float64)
    u, s, vt = np.linalg.svd(m, full_matrices=False)
    keep = s > eps
    return (vt[keep].T / s[keep]) @ u[:, keep].T


def stabilized_ls_solve(r, b, mode="fast"):
    """``argmin_X ||B - X R||_F`` for a square upper-triangular ``R``."""
    r = np.asarray(r, dtype=np.float64)
    b = np.asarray(b, dtype=np.float64)
    if mode == "fast":
        if r.size and np.any(np.diag(r) == 0.0):
            raise SingularCoreError("triangular factor is exactly singular; use stabilized mode")
        if r.size == 0:
            return np.zeros((b.shape[0], r.shape[0]))
        x = sla.solve_triangular(r, b.T, trans="T", lower=False, check_finite=False).T
        if not np.all(np.isfinite(x)):
            raise SingularCoreError("triangular solve overflowed; use stabilized mode")
        return x
    if mode == "stabilized":
        if r.size == 0:
            return np.zeros((b.shape[0], r.shape[0]))
        eps = 10 * EPS * (np.linalg.norm(r, 2) if r.size else 0.0)
        return b @ eps_pinv_apply(r, eps)
    raise ValueError(f"unknown least-squares mode {mode!r}")


def hmt(a, r, seed=0, x=None):
    """Randomized range finder: ``Q = orth(A X)``, approximant ``Q (Q^T A)``."""
    a = np.asarray(a, dtype=np.float64)
    if x is None:
        x = gaussian(("misc", seed, 1, 0), a.shape[1], r)
    q = orth(a @ x)
    return LowRankFactors(q, q.T @ a)


def gn(a, cfg, x=None, y=None):
    """Generalized Nyström approximant ``A X (Y^T A X)^† Y^T A``.

    Fast mode factors as ``(A X R^{-1}, Q^T Y^T A)`` with ``Q R = Y^T A X``.
    Stabilized mode applies the ε-pseudoinverse of the core.
    """
    a = np.asarray(a, dtype=np.float64)
    m, n = a.shape
    r, p = cfg.rank, cfg.oversample
    if r > n or r + p > m:
        raise ValueError(f"need r <= n and r + p <= m, got r={r}, p={p}, shape={a.shape}")
    if x is None:
        x = gaussian(("misc", cfg.seed, 1, 0), n, r)
    if y is None:
        y = gaussian(("misc", cfg.seed, 1, 1), m, r + p)
    ax = a @ x
    yta = y.T @ a
    core = yta @ x
    if not np.any(core):
        return LowRankFactors(np.zeros((m, r)), np.zeros((r, n)))
    if cfg.mode == "fast":
        q, rf = economy_qr(core)
        return LowRankFactors(stabilized_ls_solve(rf, ax, "fast"), q.T @ yta)
    eps = 10 * EPS * np.linalg.norm(core, 2)
    return LowRankFactors(ax @ eps_pinv_apply(core, eps), yta)


def haar_orthogonal(n, k=None, seed=0, label=None):
    """``n x k`` Haar-distributed matrix with orthonormal columns."""
    k = n if k is None else k
    if k > n:
        raise ValueError("k must not exceed n")
    lab = ("haar", seed, n, k) if label is None else label
    z = gaussian(lab, n, n)
    q, r = economy_qr(z)
    q = q * np.sign(np.where(np.diag(r) == 0, 1.0, np.diag(r)))
    return q[:, :k]
