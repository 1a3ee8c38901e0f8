"""File formats.

* Dense tensor: magic ``TTNT``, u32 ``d``, u64 ``shape[d]``, then the values
  as little-endian f64, first index fastest.
* Tree tensor network: a directory with ``manifest.json`` (tree, shape, ranks,
  per-core offsets) and ``cores.bin`` (cores level-major, each first index
  fastest).
* Sketch state checkpoint: the same layout, holding every Ω and Ψ.
"""

import json
import os
import struct

import numpy as np

from .sketch import DrmSpec, SketchState
from .tree import ROOT, tree_from_json, tree_to_json
from .ttn import TtnTensor

__all__ = [
    "write_tensor",
    "read_tensor",
    "write_ttn",
    "read_ttn",
    "write_state",
    "read_state",
]

MAGIC = b"TTNT"


def write_tensor(path, t):
    t = np.asarray(t, dtype="<f8")
    with open(path, "wb") as f:
        f.write(MAGIC)
        f.write(struct.pack("<I", t.ndim))
        f.write(struct.pack(f"<{t.ndim}Q", *t.shape))
        f.write(np.asfortranarray(t).tobytes(order="F"))


def read_tensor(path):
    with open(path, "rb") as f:
        head = f.read(8)
        if len(head) < 8 or head[:4] != MAGIC:
            raise ValueError(f"{path}: not a dense tensor file")
        (d,) = struct.unpack("<I", head[4:])
        raw = f.read(8 * d)
        if len(raw) < 8 * d:
            raise ValueError(f"{path}: truncated header")
        shape = struct.unpack(f"<{d}Q", raw)
        count = int(np.prod(shape))
        data = np.fromfile(f, dtype="<f8", count=count)
    if data.size != count:
        raise ValueError(f"{path}: expected {count} values, found {data.size}")
    return data.astype(np.float64).reshape(shape, order="F")


def _key(addr):
    return f"{addr[0]},{addr[1]}"


def _unkey(s):
    a, b = s.split(",")
    return int(a), int(b)


def _write_blobs(path, manifest, blobs):
    os.makedirs(path, exist_ok=True)
    offsets = []
    pos = 0
    with open(os.path.join(path, "cores.bin"), "wb") as f:
        for name, arr in blobs:
            arr = np.asarray(arr, dtype="<f8")
            f.write(np.asfortranarray(arr).tobytes(order="F"))
            offsets.append({"name": name, "offset": pos, "shape": list(arr.shape)})
            pos += arr.size
    manifest["blobs"] = offsets
    with open(os.path.join(path, "manifest.json"), "w") as f:
        json.dump(manifest, f, indent=1)


def _read_blobs(path):
    mpath = os.path.join(path, "manifest.json")
    if not os.path.isfile(mpath):
        raise FileNotFoundError(f"{path}: missing manifest.json")
    with open(mpath) as f:
        manifest = json.load(f)
    data = np.fromfile(os.path.join(path, "cores.bin"), dtype="<f8")
    out = {}
    for b in manifest["blobs"]:
        n = int(np.prod(b["shape"]))
        chunk = data[b["offset"] : b["offset"] + n]
        if chunk.size != n:
            raise ValueError(f"{path}: cores.bin is truncated")
        out[b["name"]] = chunk.astype(np.float64).reshape(b["shape"], order="F")
    return manifest, out


def write_ttn(path, t):
    manifest = {
        "kind": "ttn",
        "tree": json.loads(tree_to_json(t.tree)),
        "shape": list(t.shape),
        "ranks": {_key(a): r for a, r in t.ranks.items()},
    }
    _write_blobs(path, manifest, [(_key(a), t.cores[a]) for a in t.tree.order()])


def read_ttn(path):
    manifest, blobs = _read_blobs(path)
    if manifest.get("kind") != "ttn":
        raise ValueError(f"{path}: not a tree tensor network")
    tree = tree_from_json(json.dumps(manifest["tree"]))
    cores = {a: blobs[_key(a)] for a in tree.order()}
    return TtnTensor(tree, manifest["shape"], cores)


def write_state(path, state, extra=None):
    manifest = {
        "kind": "sketch",
        "tree": json.loads(tree_to_json(state.tree)),
        "shape": list(state.shape),
        "ranks": {_key(a): r for a, r in state.ranks.items()},
        "overs": {_key(a): p for a, p in state.overs.items()},
        "spec": {"kind": state.spec.kind, "seed": state.spec.seed},
        "extra": extra or {},
    }
    blobs = [(f"{kind}:{_key(a)}", arr) for kind, a, arr in state.arrays()]
    _write_blobs(path, manifest, blobs)


def read_state(path):
    """Sketch state and the free-form ``extra`` dict stored with it."""
    manifest, blobs = _read_blobs(path)
    if manifest.get("kind") != "sketch":
        raise ValueError(f"{path}: not a sketch checkpoint")
    tree = tree_from_json(json.dumps(manifest["tree"]))
    ranks = {_unkey(k): int(v) for k, v in manifest["ranks"].items()}
    overs = {_unkey(k): int(v) for k, v in manifest["overs"].items()}
    spec = DrmSpec(manifest["spec"]["kind"], int(manifest["spec"]["seed"]))
    omega = {a: blobs[f"omega:{_key(a)}"] for a in tree.non_root()}
    psi = {a: blobs[f"psi:{_key(a)}"] for a in tree.order()}
    if ROOT not in psi:
        raise ValueError(f"{path}: missing root sketch")
    state = SketchState(tree, tuple(manifest["shape"]), ranks, overs, spec, omega, psi)
    return state, manifest.get("extra", {})
