import numpy as np
import pytest

from oracles import hosvd
from ttnystrom.baselines import hmt_bases, svd_bases, ttn_hmt, ttn_svd
from ttnystrom.sketch import DrmSpec
from ttnystrom.tensor import hilbert_tensor
from ttnystrom.tree import balanced_binary_tree, toy_tree, tucker_tree
from ttnystrom.ttn import random_ttn, rel_error, to_dense


def test_tucker_tree_svd_is_hosvd(rng):
    t = rng.standard_normal((5, 6, 7))
    np.testing.assert_allclose(to_dense(ttn_svd(t, tucker_tree(3), 3)), hosvd(t, 3), atol=1e-12)


@pytest.mark.parametrize("seed", range(3))
def test_exact_rank_recovery(seed):
    tree = toy_tree()
    t = to_dense(random_ttn(tree, (5,) * 6, 2, "none", seed))
    assert rel_error(t, ttn_svd(t, tree, 2)) <= 1e-10
    assert rel_error(t, ttn_hmt(t, tree, 2, DrmSpec("gaussian", seed))) <= 1e-10


def test_bases_orthonormal():
    h = hilbert_tensor(4, 6)
    tree = balanced_binary_tree(4)
    for bases in (svd_bases(h, tree, 3), hmt_bases(h, tree, 3, DrmSpec())):
        for u in bases.values():
            np.testing.assert_allclose(u.T @ u, np.eye(u.shape[1]), atol=1e-12)


def test_svd_error_within_hierarchical_bound():
    h = hilbert_tensor(6, 6)
    tree = toy_tree()
    err = rel_error(h, ttn_svd(h, tree, 3)) * np.linalg.norm(h)
    tails = []
    for a in tree.non_root():
        s = np.linalg.svd(h.transpose(list(tree.axes(a)) + list(tree.complement_axes(a))).reshape(
            int(np.prod([6] * len(tree.axes(a)))), -1, order="F"), compute_uv=False)
        tails.append(np.sum(s[3:] ** 2))
    assert err <= np.sqrt(np.sum(tails)) * (1 + 1e-10)


def test_network_input_matches_dense_path():
    tree = toy_tree()
    t = random_ttn(tree, (4,) * 6, 3, "quadratic", 5)
    d = to_dense(t)
    a, b = to_dense(ttn_svd(t, None, 2)), to_dense(ttn_svd(d, tree, 2))
    assert np.linalg.norm(a - b) <= 1e-10 * np.linalg.norm(b)
    spec = DrmSpec("khatri_rao", 1)
    a, b = to_dense(ttn_hmt(t, None, 2, spec)), to_dense(ttn_hmt(d, tree, 2, spec))
    assert np.linalg.norm(a - b) <= 1e-10 * np.linalg.norm(b)
    with pytest.raises(ValueError):
        ttn_hmt(t, None, 2, DrmSpec("gaussian"))


def test_rank_beyond_available_pads_with_warning():
    t = np.random.default_rng(0).standard_normal((2, 3, 2))
    with pytest.warns(UserWarning):
        out = ttn_svd(t, tucker_tree(3), 3)
    assert rel_error(t, out) <= 1e-12


def test_svd_deterministic():
    h = hilbert_tensor(4, 5)
    tree = balanced_binary_tree(4)
    a, b = ttn_svd(h, tree, 2), ttn_svd(h, tree, 2)
    assert all(np.array_equal(a.cores[k], b.cores[k]) for k in a.cores)
