import csv
import json
import subprocess
import sys

import numpy as np
import pytest

from ttnystrom import io
from ttnystrom.cli import main, parse_ranks, parse_synthetic
from ttnystrom.experiments import HILBERT_COLUMNS, ROUNDING_COLUMNS
from ttnystrom.tree import toy_tree
from ttnystrom.ttn import TtnTensor, random_ttn, rel_error, to_dense


def run(capsys, *argv):
    code = main([str(a) for a in argv])
    out = capsys.readouterr().out
    return code, out


def test_parse_helpers():
    assert parse_ranks("2:12:2") == (2, 4, 6, 8, 10, 12)
    assert parse_ranks("3,5") == (3, 5)
    assert parse_synthetic("hilbert:d=3,n=4").shape == (4, 4, 4)
    t = parse_synthetic("randttn:tree=toy,n=3,r=2,decay=cubic")
    assert isinstance(t, TtnTensor) and t.shape == (3,) * 6


def test_compress_report(tmp_path, capsys):
    code, out = run(capsys, "compress", "hilbert:d=6,n=8", "--rank", 4, "--oversample", 3, "--out", tmp_path / "o")
    rep = json.loads(out)
    assert code == 0 and 0 < rep["rel_error"] < 1e-2
    assert {"sketch", "recover", "total"} <= set(rep["time"])
    assert (tmp_path / "o" / "manifest.json").exists()


def test_compress_svd_deterministic(tmp_path, capsys):
    for name in ("a", "b"):
        run(capsys, "compress", "hilbert:d=4,n=6", "--tree", "binary", "--method", "ttn-svd", "--rank", 3,
            "--out", tmp_path / name)
    a, b = io.read_ttn(tmp_path / "a"), io.read_ttn(tmp_path / "b")
    assert all(np.array_equal(a.cores[k], b.cores[k]) for k in a.cores)


@pytest.mark.parametrize("method", ["sttnn", "ttn-hmt"])
def test_compress_other_methods_on_file(tmp_path, capsys, method):
    t = to_dense(random_ttn(toy_tree(), (5,) * 6, 2, "none", 1))
    io.write_tensor(tmp_path / "t.ttnt", t)
    code, out = run(capsys, "compress", tmp_path / "t.ttnt", "--method", method, "--rank", 2)
    assert code == 0 and json.loads(out)["rel_error"] < 1e-8


def test_exit_codes(tmp_path, capsys):
    assert main(["compress", str(tmp_path / "nope.ttnt")]) == 2
    assert main(["compress", "bogus:x=1"]) == 2
    assert main(["audit", "hilbert:d=4,n=5", "--tree", "binary", "--rank", "3", "--rhat", "3"]) == 3
    with pytest.raises(SystemExit) as exc:
        main(["compress", "x", "--method", "magic"])
    assert exc.value.code == 2
    proc = subprocess.run([sys.executable, "-m", "ttnystrom.cli", "compress", str(tmp_path / "missing")],
                          capture_output=True, text=True)
    assert proc.returncode == 2 and "not found" in proc.stderr


def test_round(tmp_path, capsys):
    t = random_ttn(toy_tree(), (6,) * 6, 3, "none", 0)
    io.write_ttn(tmp_path / "in", t)
    code, out = run(capsys, "round", tmp_path / "in", "--rank", 3, "--oversample", 2, "--out", tmp_path / "o")
    assert code == 0 and json.loads(out)["rel_error"] <= 1e-8
    errs = []
    for r in (2, 4, 8):
        _, out = run(capsys, "round", "randttn:tree=toy,n=20,r=12,decay=quadratic", "--rank", r)
        errs.append(json.loads(out)["rel_error"])
    assert errs[0] > errs[1] > errs[2]
    assert main(["round", "hilbert:d=6,n=3"]) == 2


def _manifest(tmp_path, terms):
    entries = []
    for i, (t, lam) in enumerate(terms):
        name = f"h{i}.ttnt"
        io.write_tensor(tmp_path / name, t)
        entries.append({"path": name, "lambda": lam})
    (tmp_path / "m.json").write_text(json.dumps({"terms": entries}))
    return tmp_path / "m.json"


def test_stream_single_term_equals_compress(tmp_path, capsys):
    t = np.random.default_rng(0).standard_normal((4,) * 6)
    m = _manifest(tmp_path, [(t, 1.0)])
    run(capsys, "stream", m, "--rank", 2, "--oversample", 1, "--out", tmp_path / "s")
    run(capsys, "compress", tmp_path / "h0.ttnt", "--rank", 2, "--oversample", 1, "--out", tmp_path / "c")
    a, b = io.read_ttn(tmp_path / "s"), io.read_ttn(tmp_path / "c")
    assert all(np.array_equal(a.cores[k], b.cores[k]) for k in a.cores)


def test_stream_cancellation_and_sum(tmp_path, capsys):
    rng = np.random.default_rng(1)
    t = rng.standard_normal((4,) * 6)
    m = _manifest(tmp_path, [(t, 1.0), (t, -1.0)])
    run(capsys, "stream", m, "--rank", 2, "--oversample", 1, "--out", tmp_path / "z")
    assert not np.any(to_dense(io.read_ttn(tmp_path / "z")))

    hs = [to_dense(random_ttn(toy_tree(), (5,) * 6, 2, "quadratic", i)) for i in range(5)]
    lams = rng.standard_normal(5)
    d = tmp_path / "five"
    d.mkdir()
    m = _manifest(d, list(zip(hs, lams)))
    run(capsys, "stream", m, "--rank", 3, "--oversample", 2, "--out", d / "s", "--checkpoint", d / "ck")
    io.write_tensor(d / "sum.ttnt", sum(lam * h for h, lam in zip(hs, lams)))
    run(capsys, "compress", d / "sum.ttnt", "--rank", 3, "--oversample", 2, "--out", d / "c")
    assert rel_error(to_dense(io.read_ttn(d / "c")), io.read_ttn(d / "s")) <= 1e-9
    assert (d / "ck" / "manifest.json").exists()
    assert main(["stream", str(tmp_path / "none.json")]) == 2


def test_audit_commands(capsys):
    code, out = run(capsys, "audit", "randttn:tree=toy,n=5,r=2,decay=none", "--rank", 2, "--rhat", 1)
    assert code == 0
    code, out = run(capsys, "audit", "hilbert:d=6,n=10", "--rank", 6, "--rhat", 4, "--oversample", 3)
    rep = json.loads(out)
    assert code == 0 and rep["passed"]
    code, out = run(capsys, "audit", "hilbert:d=4,n=6", "--tree", "binary", "--method", "expected",
                    "--rank", 4, "--rhat", 2, "--oversample", 2, "--trials", 3)
    assert code == 0 and json.loads(out)["passed"]


def test_plan(capsys):
    code, out = run(capsys, "plan", "--tree", "toy")
    assert code == 0 and json.loads(out)["sources"]["2,4"] == [[1, 1], [1, 2], [2, 3]]


def _read(path):
    with open(path) as f:
        return list(csv.reader(f))


def test_experiment_hilbert_csv(tmp_path, capsys):
    out = tmp_path / "h.csv"
    args = ["experiment", "hilbert", "--n", "8", "--ranks", "2:4:2", "--trials", "2", "--no-timing", "--out", out]
    assert run(capsys, *args)[0] == 0
    rows = _read(out)
    assert rows[0] == HILBERT_COLUMNS and len(rows) == 3
    first = out.read_bytes()
    run(capsys, *args)
    assert out.read_bytes() == first
    run(capsys, *args[:-3], "--seed", "5", "--no-timing", "--out", tmp_path / "h2.csv")
    assert [r[4] for r in _read(tmp_path / "h2.csv")] == [r[4] for r in rows]


def test_experiment_rounding_csvs(tmp_path, capsys):
    out = tmp_path / "r.csv"
    code, printed = run(capsys, "experiment", "rounding", "--n", "8", "--ranks", "2,4", "--trials", "1",
                        "--stored-rank", "6", "--out", out)
    assert code == 0
    for decay in ("quadratic", "cubic", "exponential"):
        rows = _read(tmp_path / f"r_{decay}.csv")
        assert rows[0] == ROUNDING_COLUMNS and len(rows) == 3
