"""Rooted-tree model for manuscript stemmata.

A stemma here is a plain rooted tree over opaque string node ids: exactly one
root, every other node with exactly one parent, no cycles, no contamination
(a witness copied from two exemplars would make the graph a DAG, which this
model rejects).  Distances between witnesses are edge counts on the unique
undirected path, precomputed for all pairs.
"""

from __future__ import annotations

from .errors import DataError

import numpy as np


class CycleDetected(DataError):
    pass


class MultipleRoots(DataError):
    pass


class Disconnected(DataError):
    pass


class DuplicateEdge(DataError):
    pass


class ContaminationDetected(DataError):
    """A node with two or more parents: copy history is not a tree."""


class DegenerateTree(DataError):
    """Fewer than two nodes: no witness pairs can be derived."""


class NotALeaf(DataError):
    pass


class UnknownNode(DataError):
    pass


class Stemma:
    """Validated rooted tree. Immutable after construction.

    Attributes
    ----------
    nodes : tuple of node ids, sorted
    edges : tuple of (parent, child) pairs, sorted
    root : node id with in-degree 0
    """

    __slots__ = ("nodes", "edges", "root", "_children", "_parent")

    def __init__(self, edges):
        edge_list = [(str(p), str(c)) for p, c in edges]
        self._validate_ids(edge_list)

        seen = set()
        parent = {}
        children = {}
        for p, c in edge_list:
            if (p, c) in seen:
                raise DuplicateEdge(f"edge {p!r} -> {c!r} listed twice")
            seen.add((p, c))
            if p == c:
                raise CycleDetected(f"self-loop on node {c!r}")
            if c in parent:
                raise ContaminationDetected(
                    f"node {c!r} has parents {parent[c]!r} and {p!r}; "
                    "contaminated (non-tree) traditions are not supported"
                )
            parent[c] = p
            children.setdefault(p, []).append(c)
            children.setdefault(c, [])

        nodes = set(children)
        if len(nodes) < 2:
            raise DegenerateTree(
                f"{len(nodes)} node(s); at least one edge is required"
            )

        roots = sorted(nodes - set(parent))
        if not roots:
            raise CycleDetected(
                "no root: cycle through " + " -> ".join(self._find_cycle(parent, next(iter(nodes))))
            )
        if len(roots) > 1:
            raise MultipleRoots(f"nodes {roots} all lack a parent")
        root = roots[0]

        reached = {root}
        frontier = [root]
        while frontier:
            nxt = []
            for u in frontier:
                for v in children[u]:
                    if v not in reached:
                        reached.add(v)
                        nxt.append(v)
            frontier = nxt
        if len(reached) != len(nodes):
            stray = sorted(nodes - reached)
            # every stray node has a parent, so the stray part must cycle
            cycle = self._find_cycle(parent, stray[0], limit=len(nodes) + 1)
            if cycle:
                raise CycleDetected("cycle through " + " -> ".join(cycle))
            raise Disconnected(f"nodes {stray} unreachable from root {root!r}")

        self.nodes = tuple(sorted(nodes))
        self.edges = tuple(sorted(seen))
        self.root = root
        self._children = {u: tuple(sorted(children[u])) for u in nodes}
        self._parent = parent

    @staticmethod
    def _validate_ids(edge_list):
        for p, c in edge_list:
            for name in (p, c):
                if not name or name != name.strip() or "\t" in name or "\n" in name:
                    raise DataError(f"invalid node id {name!r}")

    @staticmethod
    def _find_cycle(parent, start, limit=None):
        """Walk parent pointers from `start`; return the first cycle found."""
        path = [start]
        pos = {start: 0}
        steps = limit if limit is not None else len(parent) + 2
        u = start
        for _ in range(steps):
            if u not in parent:
                return []
            u = parent[u]
            if u in pos:
                return path[pos[u]:] + [u]
            pos[u] = len(path)
            path.append(u)
        return []

    # --- queries ------------------------------------------------------

    def children(self, node):
        try:
            return self._children[node]
        except KeyError:
            raise UnknownNode(f"unknown node {node!r}") from None

    def parent(self, node):
        """Parent id, or None for the root."""
        if node not in self._children:
            raise UnknownNode(f"unknown node {node!r}")
        return self._parent.get(node)

    def is_leaf(self, node):
        return not self.children(node)

    def leaves(self):
        return tuple(n for n in self.nodes if not self._children[n])

    def internal_nodes(self):
        return tuple(n for n in self.nodes if self._children[n])

    def __contains__(self, node):
        return node in self._children

    def __len__(self):
        return len(self.nodes)

    def __eq__(self, other):
        return isinstance(other, Stemma) and self.edges == other.edges

    def __hash__(self):
        return hash(self.edges)

    def __repr__(self):
        return f"Stemma({len(self.nodes)} nodes, root={self.root!r})"

    # --- surgery ------------------------------------------------------

    def remove_leaf(self, q):
        """Backbone tree without leaf `q`.

        The former parent of `q` is kept even if it loses its last child:
        the attachment point must stay addressable for placement.
        """
        if q not in self._children:
            raise UnknownNode(f"unknown node {q!r}")
        if self._children[q]:
            raise NotALeaf(f"node {q!r} has children {self._children[q]}")
        remaining = [(p, c) for p, c in self.edges if c != q]
        if not remaining:
            raise DegenerateTree(f"removing {q!r} leaves a single node")
        return Stemma(remaining)

    # --- serialization ------------------------------------------------

    def to_edge_list_text(self):
        return "".join(f"{p}\t{c}\n" for p, c in self.edges)

    def to_newick(self):
        """Newick string with internal labels; export only."""

        def quote(name):
            if name and all(ch.isalnum() or ch in "_.|-" for ch in name):
                return name
            return "'" + name.replace("'", "''") + "'"

        def render(node):
            kids = self._children[node]
            if not kids:
                return quote(node)
            return "(" + ",".join(render(k) for k in kids) + ")" + quote(node)

        return render(self.root) + ";"


def load_stemma(edge_list_text):
    """Parse an edge-list file: one ``parent<TAB>child`` per line.

    Blank lines and lines starting with ``#`` are ignored.
    """
    edges = []
    for lineno, raw in enumerate(edge_list_text.splitlines(), start=1):
        line = raw.strip()
        if not line or line.startswith("#"):
            continue
        parts = line.split("\t")
        if len(parts) != 2:
            raise DataError(
                f"line {lineno}: expected 'parent<TAB>child', got {raw!r}"
            )
        edges.append((parts[0].strip(), parts[1].strip()))
    if not edges:
        raise DegenerateTree("no edges in input")
    return Stemma(edges)


def leaves(s: Stemma):
    """All nodes with out-degree 0, in canonical (sorted) order."""
    return s.leaves()


def remove_leaf(s: Stemma, q):
    return s.remove_leaf(q)


class DistanceMatrix:
    """All-pairs edge distances of a stemma.

    `order` is the sorted node-id tuple; `d[i, j]` is the number of edges on
    the undirected path between `order[i]` and `order[j]`.
    """

    __slots__ = ("order", "d", "_index")

    def __init__(self, order, d):
        self.order = tuple(order)
        self.d = d
        self._index = {name: i for i, name in enumerate(self.order)}

    def index_of(self, node):
        try:
            return self._index[node]
        except KeyError:
            raise UnknownNode(f"unknown node {node!r}") from None

    def get(self, a, b):
        return int(self.d[self.index_of(a), self.index_of(b)])

    def max_distance(self, among=None):
        """Largest pairwise distance, optionally restricted to `among` ids."""
        if among is None:
            return int(self.d.max())
        idx = [self.index_of(n) for n in among]
        return int(self.d[np.ix_(idx, idx)].max())


def distance_matrix(s: Stemma) -> DistanceMatrix:
    """All-pairs path lengths (edge counts) of the tree.

    Nodes are visited top-down from the root; each node's distance row is its
    parent's row plus one, valid because no earlier-visited node can lie in
    the subtree below it.  Equivalent to a breadth-first sweep per node, but
    one vectorized row per node instead of n traversals.
    """
    order = s.nodes
    index = {name: i for i, name in enumerate(order)}
    n = len(order)
    d = np.zeros((n, n), dtype=np.int32)

    filled = np.empty(n, dtype=np.intp)
    filled[0] = index[s.root]
    count = 1
    frontier = [s.root]
    while frontier:
        nxt = []
        for u in frontier:
            for v in s.children(u):
                vi = index[v]
                pi = index[u]
                prev = filled[:count]
                d[vi, prev] = d[pi, prev] + 1
                d[prev, vi] = d[vi, prev]
                filled[count] = vi
                count += 1
                nxt.append(v)
        frontier = nxt
    return DistanceMatrix(order, d)
