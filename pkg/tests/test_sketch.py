import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from oracles import group_unfold, kr_dense
from ttnystrom.rng import DrawCache
from ttnystrom.sketch import (
    DrmSpec,
    accumulate,
    drm,
    mode_factor,
    resolve_ranks,
    restrict_state,
    sketch_dense,
    sketch_ttn,
    zero_state,
)
from ttnystrom.tree import ROOT, balanced_binary_tree, toy_tree
from ttnystrom.ttn import random_ttn, to_dense


def rel(a, b):
    return np.linalg.norm(a - b) / max(np.linalg.norm(b), 1e-300)


def test_dense_sketch_matches_definitions(rng):
    tree = toy_tree()
    t = rng.standard_normal((3, 2, 3, 2, 3, 2))
    spec = DrmSpec("gaussian", 5)
    ranks = resolve_ranks(tree, 2)
    overs = resolve_ranks(tree, 1)
    s = sketch_dense(t, tree, ranks, overs, spec)
    x = {a: drm(spec, tree, t.shape, a, "X", ranks, overs) for a in tree.non_root()}
    y = {a: drm(spec, tree, t.shape, a, "Y", ranks, overs) for a in tree.non_root()}
    for a in tree.non_root():
        tx = group_unfold(t, tree.axes(a)) @ x[a]
        np.testing.assert_allclose(s.omega[a], y[a].T @ tx, atol=1e-12)
        if tree[a].is_leaf:
            np.testing.assert_allclose(s.psi[a], tx, atol=1e-12)
    # internal node (1,1): children {1,2} and {3}
    tx = (group_unfold(t, (0, 1, 2)) @ x[(1, 1)]).reshape(3, 2, 3, -1, order="F")
    y21 = y[(2, 1)].reshape(3, 2, -1, order="F")
    want = np.einsum("abcr,abi,cj->ijr", tx, y21, y[(2, 2)])
    np.testing.assert_allclose(s.psi[(1, 1)], want, atol=1e-12)
    # root: children {1,2,3}, {4}, {5,6}
    y11 = y[(1, 1)].reshape(3, 2, 3, -1, order="F")
    y13 = y[(1, 3)].reshape(3, 2, -1, order="F")
    want = np.einsum("abcdef,abci,dj,efk->ijk", t, y11, y[(1, 2)], y13)
    np.testing.assert_allclose(s.psi[ROOT], want, atol=1e-12)


def test_drm_shapes_and_kr_structure():
    tree = toy_tree()
    shape = (2, 3, 2, 3, 2, 3)
    spec = DrmSpec("khatri_rao", 1)
    x = drm(spec, tree, shape, (1, 1), "X", 3, 2)
    y = drm(spec, tree, shape, (1, 1), "Y", 3, 2)
    assert x.shape == (18, 3) and y.shape == (12, 5)
    np.testing.assert_allclose(x, kr_dense([mode_factor(spec, shape, i, "X", 3) for i in (4, 5, 6)]))
    np.testing.assert_allclose(y, kr_dense([mode_factor(spec, shape, i, "Y", 5) for i in (1, 2, 3)]))
    with pytest.raises(ValueError):
        drm(spec, tree, shape, ROOT, "X", 3, 2)
    with pytest.raises(ValueError):
        drm(spec, tree, shape, (1, 1), "Z", 3, 2)
    with pytest.raises(ValueError):
        DrmSpec("uniform")


def test_kr_requires_uniform_ranks():
    tree = toy_tree()
    t = random_ttn(tree, (3,) * 6, 2)
    ranks = {a: 2 for a in tree.non_root()}
    ranks[(1, 2)] = 1
    with pytest.raises(ValueError):
        sketch_ttn(t, ranks, 1, DrmSpec("khatri_rao"))
    with pytest.raises(ValueError):
        sketch_ttn(t, 2, 1, DrmSpec("gaussian"))


@given(st.integers(0, 1000), st.integers(1, 3), st.integers(0, 2))
@settings(max_examples=15, deadline=None)
def test_ttn_sketch_equals_dense_path(seed, r, p):
    tree = toy_tree()
    t = random_ttn(tree, (3,) * 6, 2, "quadratic", seed)
    spec = DrmSpec("khatri_rao", seed)
    a = sketch_ttn(t, r, p, spec)
    b = sketch_dense(to_dense(t), tree, r, p, spec)
    for (_, _, u), (_, _, v) in zip(a.arrays(), b.arrays()):
        assert rel(u, v) <= 1e-10


@pytest.mark.parametrize("kind", ["gaussian", "khatri_rao"])
def test_restrict_equals_fresh_sketch(rng, kind):
    tree = balanced_binary_tree(4)
    t = rng.standard_normal((4, 5, 4, 5))
    spec = DrmSpec(kind, 3, DrawCache())
    big = sketch_dense(t, tree, 4, 3, spec)
    small = restrict_state(big, 2, 2)
    fresh = sketch_dense(t, tree, 2, 2, spec.without_cache())
    for (_, _, u), (_, _, v) in zip(small.arrays(), fresh.arrays()):
        np.testing.assert_allclose(u, v, rtol=1e-12, atol=1e-12 * np.abs(v).max())
    with pytest.raises(ValueError):
        restrict_state(big, 5, 0)


def test_accumulate_is_linear(rng):
    tree = balanced_binary_tree(3)
    spec = DrmSpec("gaussian", 0)
    a, b = rng.standard_normal((3, 4, 5)), rng.standard_normal((3, 4, 5))
    sa = sketch_dense(a, tree, 2, 1, spec)
    sb = sketch_dense(b, tree, 2, 1, spec)
    sab = sketch_dense(a - 2.5 * b, tree, 2, 1, spec)
    acc = accumulate(sa, sb, -2.5)
    for (_, _, u), (_, _, v) in zip(acc.arrays(), sab.arrays()):
        np.testing.assert_allclose(u, v, atol=1e-12)
    z = zero_state(tree, (3, 4, 5), 2, 1, spec)
    assert z.is_zero()
    assert accumulate(z, sa).compatible(sa)
    with pytest.raises(ValueError):
        accumulate(sa, sketch_dense(a, tree, 2, 1, DrmSpec("gaussian", 1)))


def test_sketch_rejects_wrong_order(rng):
    with pytest.raises(ValueError):
        sketch_dense(rng.standard_normal((3, 3)), toy_tree(), 2, 1, DrmSpec())
