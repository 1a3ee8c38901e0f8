"""Label-addressed Gaussian streams.

Every random matrix is a pure function of an integer label tuple.  Columns are
drawn one after the other from a single stream, so the first ``c`` columns of a
wider draw equal a draw with ``c`` columns.  Rank sweeps therefore see nested
sketches.
"""

import numpy as np

__all__ = ["generator", "gaussian", "DrawCache"]

# domain tags keep unrelated label families apart
_TAGS = {"node": 1, "mode": 2, "seq": 3, "haar": 4, "core": 5, "misc": 6}
_SIDES = {"X": 0, "Y": 1}


def _encode(label):
    out = []
    for x in label:
        if isinstance(x, str):
            if x in _TAGS:
                out.append(_TAGS[x])
            elif x in _SIDES:
                out.append(_SIDES[x])
            else:
                raise ValueError(f"unknown label token {x!r}")
        else:
            out.append(int(x))
    return out


def generator(*label):
    return np.random.Generator(np.random.SFC64(np.random.SeedSequence(_encode(label))))


def gaussian(label, rows, cols, cache=None):
    """Standard normal ``rows x cols`` matrix (Fortran order) for ``label``."""
    key = (tuple(label), int(rows))
    if cache is not None:
        hit = cache.get(key)
        if hit is not None and hit.shape[1] >= cols:
            return hit[:, :cols]
    m = generator(*label).standard_normal((int(cols), int(rows))).T
    if cache is not None:
        cache.put(key, m)
    return m


class DrawCache:
    """Keeps the widest draw per label; narrower requests are column prefixes."""

    def __init__(self):
        self._store = {}

    def get(self, key):
        return self._store.get(key)

    def put(self, key, m):
        old = self._store.get(key)
        if old is None or old.shape[1] < m.shape[1]:
            self._store[key] = m

    def clear(self):
        self._store.clear()
