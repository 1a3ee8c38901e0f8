import warnings

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from oracles import ttnn_cascade
from ttnystrom.kernels import SingularCoreError
from ttnystrom.sketch import DrmSpec, sketch_dense
from ttnystrom.tensor import hilbert_tensor
from ttnystrom.tree import balanced_binary_tree, toy_tree, tt_tree, tucker_tree
from ttnystrom.ttn import random_ttn, rel_error, to_dense
from ttnystrom.ttnn import StreamCompressor, TtnnConfig, compress_dense, compress_ttn, recover, resolve_config


def rel(a, b):
    return np.linalg.norm(a - b) / np.linalg.norm(b)


@given(st.integers(0, 10_000), st.sampled_from(["gaussian", "khatri_rao"]), st.sampled_from(["fast", "stabilized"]))
@settings(max_examples=20, deadline=None)
def test_exact_rank_input_recovered(seed, kind, mode):
    tree = toy_tree()
    t = to_dense(random_ttn(tree, (5,) * 6, 2, "none", seed))
    approx = compress_dense(t, tree, TtnnConfig(3, 2, DrmSpec(kind, seed), mode))
    assert rel_error(t, approx) <= 1e-8


@pytest.mark.filterwarnings("ignore:infeasible ranks clamped")
@pytest.mark.parametrize("tree", [balanced_binary_tree(4), tt_tree(4), tucker_tree(4)], ids=["binary", "tt", "tucker"])
@pytest.mark.parametrize("seed", range(3))
def test_matches_projector_cascade(tree, seed):
    t = np.random.default_rng(seed).standard_normal((5, 4, 5, 4))
    cfg = TtnnConfig(3, 2, DrmSpec("gaussian", seed))
    ranks, overs = resolve_config(cfg, tree, t.shape)
    assert rel(to_dense(compress_dense(t, tree, cfg)), ttnn_cascade(t, tree, ranks, overs, cfg.spec)) <= 1e-9


def test_error_decreases_with_rank_on_hilbert():
    h = hilbert_tensor(6, 8)
    errs = [rel_error(h, compress_dense(h, toy_tree(), TtnnConfig(r, 3, DrmSpec("gaussian", 0))))
            for r in (1, 2, 3, 4)]
    assert all(b < a for a, b in zip(errs, errs[1:]))
    assert errs[-1] < 1e-3


def test_resolve_config_clamps_with_warning():
    tree = tucker_tree(3)
    with pytest.warns(UserWarning, match="clamped"):
        ranks, overs = resolve_config(TtnnConfig(6, 3), tree, (4, 4, 4))
    assert set(ranks.values()) == {4} and set(overs.values()) == {0}
    with pytest.raises(ValueError):
        resolve_config(TtnnConfig(6, 3, DrmSpec("khatri_rao")), tree, (4, 4, 4))
    with pytest.raises(ValueError):
        resolve_config(TtnnConfig(0, 3), tree, (4, 4, 4))
    with pytest.raises(ValueError):
        TtnnConfig(2, 1, DrmSpec(), "slow")


def test_zero_input_fast_mode_raises_stabilized_gives_zero():
    tree = balanced_binary_tree(3)
    z = np.zeros((4, 4, 4))
    with pytest.raises(SingularCoreError):
        compress_dense(z, tree, TtnnConfig(2, 1, DrmSpec(), "fast"))
    out = compress_dense(z, tree, TtnnConfig(2, 1, DrmSpec(), "stabilized"))
    assert not np.any(to_dense(out))


def test_compress_ttn_needs_kr_and_matches_dense():
    tree = toy_tree()
    t = random_ttn(tree, (4,) * 6, 3, "cubic", 2)
    with pytest.raises(ValueError):
        compress_ttn(t, TtnnConfig(2, 2, DrmSpec("gaussian")))
    cfg = TtnnConfig(2, 2, DrmSpec("khatri_rao", 2))
    a = to_dense(compress_ttn(t, cfg))
    b = to_dense(compress_dense(to_dense(t), tree, cfg))
    assert rel(a, b) <= 1e-9
    assert rel_error(t, compress_ttn(t, TtnnConfig(3, 2, DrmSpec("khatri_rao", 2)))) <= 1e-8


def _terms(seed, n=5):
    rng = np.random.default_rng(seed)
    tree = toy_tree()
    hs = [to_dense(random_ttn(tree, (5,) * 6, 2, "quadratic", seed * 10 + i)) for i in range(n)]
    lams = rng.standard_normal(n)
    return tree, hs, lams


@pytest.mark.parametrize("kind", ["gaussian", "khatri_rao"])
def test_stream_matches_single_shot(kind):
    tree, hs, lams = _terms(1)
    cfg = TtnnConfig(3, 2, DrmSpec(kind, 9))
    acc = StreamCompressor(tree, hs[0].shape, cfg)
    for h, lam in zip(hs, lams):
        acc.ingest(h, lam)
    total = sum(lam * h for h, lam in zip(hs, lams))
    ranks, overs = resolve_config(cfg, tree, total.shape)
    ref = sketch_dense(total, tree, ranks, overs, cfg.spec)
    for (_, _, u), (_, _, v) in zip(acc.state.arrays(), ref.arrays()):
        assert rel(u, v) <= 1e-12
    assert rel(to_dense(acc.finalize()), to_dense(recover(ref))) <= 1e-9


def test_stream_accepts_network_terms_and_cancels():
    tree = toy_tree()
    t = random_ttn(tree, (4,) * 6, 2, "none", 3)
    cfg = TtnnConfig(2, 1, DrmSpec("khatri_rao", 0))
    acc = StreamCompressor(tree, t.shape, cfg).ingest(t).ingest(t, -1.0)
    assert not np.any(to_dense(acc.finalize()))
    assert not np.any(to_dense(StreamCompressor(tree, t.shape, cfg).finalize()))
    with pytest.raises(ValueError):
        acc.ingest(np.zeros((4,) * 5))


def test_stream_resume_from_state():
    tree, hs, lams = _terms(2, 3)
    cfg = TtnnConfig(3, 2, DrmSpec("gaussian", 1))
    a = StreamCompressor(tree, hs[0].shape, cfg).ingest(hs[0], lams[0])
    b = StreamCompressor(tree, hs[0].shape, cfg, a.state)
    for h, lam in zip(hs[1:], lams[1:]):
        b.ingest(h, lam)
    ref = StreamCompressor(tree, hs[0].shape, cfg)
    for h, lam in zip(hs, lams):
        ref.ingest(h, lam)
    np.testing.assert_allclose(to_dense(b.finalize()), to_dense(ref.finalize()), atol=1e-10)
    with pytest.raises(ValueError):
        StreamCompressor(tree, hs[0].shape, TtnnConfig(2, 2, cfg.spec), a.state)


def test_deterministic_given_seed():
    h = hilbert_tensor(4, 6)
    tree = balanced_binary_tree(4)
    cfg = TtnnConfig(3, 2, DrmSpec("gaussian", 4))
    with warnings.catch_warnings():
        warnings.simplefilter("error")
        a, b = compress_dense(h, tree, cfg), compress_dense(h, tree, cfg)
    for k in a.cores:
        assert np.array_equal(a.cores[k], b.cores[k])
