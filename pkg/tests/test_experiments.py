import numpy as np
import pytest

from ttnystrom.experiments import ExperimentConfig, hilbert_config, resolve_tree, rounding_config, run_hilbert, run_rounding
from ttnystrom.tree import toy_tree, tree_to_json


def test_config_validation():
    with pytest.raises(ValueError):
        hilbert_config(trials=0)
    with pytest.raises(ValueError):
        hilbert_config(ranks=(4, 2))
    with pytest.raises(ValueError):
        ExperimentConfig(name="other")
    cfg = rounding_config()
    assert cfg.overs == 10 and cfg.n == 100 and cfg.ranks == (4, 8, 16, 24, 32)


def test_resolve_tree_from_json(tmp_path):
    p = tmp_path / "t.json"
    p.write_text(tree_to_json(toy_tree()))
    assert resolve_tree(str(p), 6) == toy_tree()
    assert resolve_tree(toy_tree(), 6) == toy_tree()
    with pytest.raises(ValueError):
        resolve_tree("weird", 6)


def test_small_hilbert_sweep():
    res = run_hilbert(hilbert_config(n=8, ranks=(2, 3, 4), trials=2, timing=False))
    med = {m: np.median(e, axis=0) for m, e in res["errors"].items()}
    assert np.all(np.diff(med["ttnn"]) < 0)
    assert np.all(med["svd"] <= med["hmt"] * (1 + 1e-12))
    assert np.all(res["flops"]["sttnn"].mean(0) < res["flops"]["ttnn"].mean(0))
    assert all(row[5:] == [0.0] * 4 for row in res["rows"])


def test_small_rounding_sweep():
    res = run_rounding(rounding_config(n=20, ranks=(8, 10, 12), trials=2, stored_rank=16))
    assert set(res) == {"quadratic", "cubic", "exponential"}
    for m in ("ttnn", "svd"):
        exp = res["exponential"]["errors"][m].mean(0)
        quad = res["quadratic"]["errors"][m].mean(0)
        assert np.all(exp <= quad)
    e = np.median(res["exponential"]["errors"]["ttnn"], axis=0)
    assert np.all(np.diff(e) < 0)
