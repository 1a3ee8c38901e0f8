"""Index trees with (level, position) addressing.

Mode indices are 1-based, as in the tree JSON format.  Node addresses are
``(level, position)`` tuples with the root at ``(0, 1)`` and positions counted
from 1 within each level, left to right.
"""

import json
from dataclasses import dataclass

__all__ = [
    "Node",
    "NodeRecord",
    "LevelEntry",
    "IndexTree",
    "validate",
    "extended_levels",
    "tucker_tree",
    "tt_tree",
    "balanced_binary_tree",
    "toy_tree",
    "tree_to_json",
    "tree_from_json",
    "named_tree",
    "ROOT",
]

ROOT = (0, 1)


@dataclass(frozen=True)
class Node:
    """Nested tree description used to build an :class:`IndexTree`."""

    indices: tuple
    children: tuple = ()

    def __post_init__(self):
        object.__setattr__(self, "indices", tuple(int(i) for i in self.indices))
        object.__setattr__(self, "children", tuple(self.children))


@dataclass(frozen=True)
class NodeRecord:
    indices: tuple
    parent: tuple | None
    children: tuple = ()

    @property
    def is_leaf(self):
        return not self.children

    @property
    def axes(self):
        """0-based tensor axes of the node's modes."""
        return tuple(i - 1 for i in self.indices)


@dataclass(frozen=True)
class LevelEntry:
    """One slot of an extended level: a real node or a dummy pass-through."""

    indices: tuple
    origin: tuple
    dummy: bool = False

    @property
    def address(self):
        return None if self.dummy else self.origin


def _sorted_tuple(xs):
    return tuple(sorted(int(i) for i in xs))


class IndexTree:
    """Rooted tree of mode subsets.

    Construction never fails on structural problems so that :func:`validate`
    can report them; algorithms call :meth:`check` before use.
    """

    def __init__(self, d, root):
        self.d = int(d)
        self.root_spec = root
        nodes = {}
        level = [(root, None)]
        ell = 0
        while level:
            nxt = []
            for k, (spec, parent) in enumerate(level, start=1):
                addr = (ell, k)
                first = len(nxt) + 1
                kids = tuple((ell + 1, first + j) for j in range(len(spec.children)))
                nodes[addr] = NodeRecord(_sorted_tuple(spec.indices), parent, kids)
                nxt.extend((c, addr) for c in spec.children)
            level = nxt
            ell += 1
        self.nodes = nodes
        self.depth = ell - 1
        self.level_counts = tuple(
            sum(1 for a in nodes if a[0] == lv) for lv in range(self.depth + 1)
        )
        self._raw_indices = {a: tuple(s.indices) for a, s in self._walk_specs()}

    def _walk_specs(self):
        level = [self.root_spec]
        ell = 0
        while level:
            nxt = []
            for k, spec in enumerate(level, start=1):
                yield (ell, k), spec
                nxt.extend(spec.children)
            level = nxt
            ell += 1

    def __eq__(self, other):
        return isinstance(other, IndexTree) and self.d == other.d and self.nodes == other.nodes

    def __hash__(self):
        return hash((self.d, tuple(sorted(self.nodes.items()))))

    def __repr__(self):
        return f"IndexTree(d={self.d}, nodes={len(self.nodes)}, depth={self.depth})"

    def __getitem__(self, addr):
        return self.nodes[tuple(addr)]

    def __contains__(self, addr):
        return tuple(addr) in self.nodes

    def order(self):
        """All nodes, level-major and position-minor."""
        return sorted(self.nodes)

    def non_root(self):
        return [a for a in self.order() if a != ROOT]

    def leaves(self):
        return [a for a in self.order() if self.nodes[a].is_leaf]

    def internal(self):
        return [a for a in self.non_root() if not self.nodes[a].is_leaf]

    def level(self, ell):
        return [a for a in self.order() if a[0] == ell]

    def indices(self, addr):
        return self.nodes[tuple(addr)].indices

    def axes(self, addr):
        return self.nodes[tuple(addr)].axes

    def complement_axes(self, addr):
        s = set(self.axes(addr))
        return tuple(a for a in range(self.d) if a not in s)

    def children(self, addr):
        return self.nodes[tuple(addr)].children

    def parent(self, addr):
        return self.nodes[tuple(addr)].parent

    def check(self):
        problems = validate(self)
        if problems:
            raise ValueError("invalid index tree: " + "; ".join(problems))
        return self


def validate(tree):
    """Return a list of violated invariants (empty when the tree is valid)."""
    out = []
    full = tuple(range(1, tree.d + 1))
    if tree.d < 1:
        out.append("d must be positive")
    if tree.indices(ROOT) != full or len(tree._raw_indices[ROOT]) != tree.d:
        out.append(f"root (0, 1): index set must be {{1..{tree.d}}}")
    for addr in tree.order():
        raw = tree._raw_indices[addr]
        rec = tree.nodes[addr]
        if not raw:
            out.append(f"node {addr}: empty index set")
        if len(set(raw)) != len(raw):
            out.append(f"node {addr}: duplicate indices")
        if any(i < 1 or i > tree.d for i in raw):
            out.append(f"node {addr}: index out of range 1..{tree.d}")
        if rec.children:
            seen = []
            for c in rec.children:
                seen.extend(tree._raw_indices[c])
            if len(set(seen)) != len(seen):
                out.append(f"node {addr}: children are not disjoint")
            elif set(seen) != set(raw):
                out.append(f"node {addr}: children do not partition the node's indices")
    return out


def extended_levels(tree):
    """Levels ``0..L`` of the extended tree.

    Leaves above level ``L`` are continued downward by dummy entries carrying
    the leaf's indices and address (``origin``).
    """
    levels = [[LevelEntry(tree.indices(ROOT), ROOT)]]
    for ell in range(1, tree.depth + 1):
        row = []
        for e in levels[-1]:
            if e.dummy or tree[e.origin].is_leaf:
                row.append(LevelEntry(e.indices, e.origin, dummy=True))
            else:
                for c in tree.children(e.origin):
                    row.append(LevelEntry(tree.indices(c), c))
        levels.append(row)
    return levels


def tucker_tree(d):
    return IndexTree(d, Node(range(1, d + 1), [Node((i,)) for i in range(1, d + 1)]))


def tt_tree(d):
    """Caterpillar tree: ``{1..k}`` has children ``{1..k-1}`` and ``{k}``."""
    if d == 1:
        return IndexTree(1, Node((1,)))
    node = Node((1,))
    for k in range(2, d + 1):
        node = Node(range(1, k + 1), [node, Node((k,))])
    return IndexTree(d, node)


def balanced_binary_tree(d):
    def build(lo, hi):
        if hi - lo == 1:
            return Node((lo,))
        mid = lo + (hi - lo + 1) // 2
        return Node(range(lo, hi), [build(lo, mid), build(mid, hi)])

    return IndexTree(d, build(1, d + 1))


def toy_tree():
    """Six-mode example tree: {1,2,3},{4},{5,6} under the root."""
    n123 = Node((1, 2, 3), [Node((1, 2), [Node((1,)), Node((2,))]), Node((3,))])
    n56 = Node((5, 6), [Node((5,)), Node((6,))])
    return IndexTree(6, Node(range(1, 7), [n123, Node((4,)), n56]))


def named_tree(name, d):
    """Resolve ``toy``, ``tucker``, ``tt`` or ``binary`` to a tree on ``d`` modes."""
    if name == "toy":
        if d != 6:
            raise ValueError("the toy tree has d = 6")
        return toy_tree()
    builders = {"tucker": tucker_tree, "tt": tt_tree, "binary": balanced_binary_tree}
    if name not in builders:
        raise ValueError(f"unknown tree name {name!r}")
    return builders[name](d)


def _node_to_obj(tree, addr):
    return {
        "indices": list(tree.indices(addr)),
        "children": [_node_to_obj(tree, c) for c in tree.children(addr)],
    }


def tree_to_json(tree):
    return json.dumps({"d": tree.d, "root": _node_to_obj(tree, ROOT)})


def _obj_to_node(obj, path):
    if not isinstance(obj, dict):
        raise ValueError(f"{path}: node must be an object")
    extra = set(obj) - {"indices", "children"}
    if extra:
        raise ValueError(f"{path}: unknown field(s) {sorted(extra)}")
    if "indices" not in obj:
        raise ValueError(f"{path}: missing 'indices'")
    ind = obj["indices"]
    kids = obj.get("children", [])
    if not isinstance(ind, list) or not all(isinstance(i, int) for i in ind):
        raise ValueError(f"{path}: 'indices' must be a list of integers")
    if not isinstance(kids, list):
        raise ValueError(f"{path}: 'children' must be a list")
    return Node(tuple(ind), tuple(_obj_to_node(c, f"{path}.children[{j}]") for j, c in enumerate(kids)))


def tree_from_json(text):
    """Parse the tree JSON format; raises ``ValueError`` on malformed input."""
    try:
        obj = json.loads(text)
    except json.JSONDecodeError as exc:
        raise ValueError(f"malformed tree JSON: {exc}") from exc
    if not isinstance(obj, dict):
        raise ValueError("tree JSON must be an object")
    extra = set(obj) - {"d", "root"}
    if extra:
        raise ValueError(f"unknown field(s) {sorted(extra)}")
    if not isinstance(obj.get("d"), int) or "root" not in obj:
        raise ValueError("tree JSON needs integer 'd' and 'root'")
    return IndexTree(obj["d"], _obj_to_node(obj["root"], "root"))
