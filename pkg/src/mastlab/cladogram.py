"""Leaf-labelled unrooted binary trees (cladograms).

A cladogram on n >= 2 leaves is a finite tree in which every vertex has
degree 1 or 3, with the n degree-1 vertices carrying distinct integer
labels.  This module provides:

* exact counting via the double factorial (2n-5)!!,
* exact-uniform sampling by stepwise leaf attachment,
* exhaustive enumeration for small n (the oracle behind several tests),
* induced subtrees, canonical forms, Newick serialisation,
* regions obtained by blowing up at most two internal nodes, and the
  count of branch points whose three sides are all large.

Degenerate sizes follow the usual conventions: size 1 is a single labelled
vertex with no edge, size 0 is the empty tree.

Cladogram instances are treated as immutable after construction and are
safe to share across threads; all samplers are pure functions of the
caller-supplied generator.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import Iterable, Iterator

import numpy as np

from .errors import DomainError, InvariantError

__all__ = [
    "Cladogram",
    "Region",
    "count_cladograms",
    "sample_uniform",
    "enumerate_cladograms",
    "induced_subtree",
    "canonical_form",
    "to_newick",
    "from_newick",
    "region",
    "count_large_branch_points",
    "caterpillar",
    "quartet",
]


class Cladogram:
    """An unrooted binary tree with labelled leaves.

    Attributes
    ----------
    adjacency : dict[int, tuple[int, ...]]
        Neighbour lists keyed by node id.  Node ids are arbitrary ints.
    leaf_labels : dict[int, int]
        Map from degree-1 node id to its (distinct) integer label.
    n : int
        Number of leaves.
    """

    __slots__ = ("adjacency", "leaf_labels", "n", "_edges", "_label_to_node")

    def __init__(self, adjacency: dict, leaf_labels: dict, validate: bool = True):
        self.adjacency = {u: tuple(vs) for u, vs in adjacency.items()}
        self.leaf_labels = dict(leaf_labels)
        self.n = len(self.leaf_labels)
        self._edges = None
        self._label_to_node = None
        if validate:
            self.validate()

    # -- basic accessors -------------------------------------------------

    @property
    def labels(self) -> frozenset:
        return frozenset(self.leaf_labels.values())

    @property
    def edges(self) -> tuple:
        """Deterministically ordered tuple of undirected edges (u, v), u < v."""
        if self._edges is None:
            es = sorted(
                (min(u, v), max(u, v))
                for u in self.adjacency
                for v in self.adjacency[u]
                if u < v
            )
            self._edges = tuple(es)
        return self._edges

    def node_of_label(self, label: int) -> int:
        if self._label_to_node is None:
            self._label_to_node = {lab: node for node, lab in self.leaf_labels.items()}
        return self._label_to_node[label]

    def internal_nodes(self) -> list:
        return [u for u, vs in self.adjacency.items() if len(vs) == 3]

    def degree(self, u: int) -> int:
        return len(self.adjacency[u])

    def __eq__(self, other) -> bool:
        if not isinstance(other, Cladogram):
            return NotImplemented
        return canonical_form(self) == canonical_form(other)

    def __hash__(self) -> int:
        return hash(canonical_form(self))

    def __repr__(self) -> str:
        return f"Cladogram(n={self.n}, labels={sorted(self.labels)})"

    # -- invariants ------------------------------------------------------

    def validate(self) -> None:
        """Check the degree, count, connectivity and labelling invariants."""
        adj = self.adjacency
        n = self.n
        if n == 0:
            if adj:
                raise InvariantError("empty tree must have no nodes")
            return
        degs = sorted(len(vs) for vs in adj.values())
        n_nodes = len(adj)
        if n == 1:
            if n_nodes != 1 or degs != [0]:
                raise InvariantError("size-1 tree must be a single isolated vertex")
        else:
            leaves = [u for u in adj if len(adj[u]) == 1]
            internal = [u for u in adj if len(adj[u]) == 3]
            if len(leaves) != n or len(internal) != n_nodes - n:
                raise InvariantError("every node must have degree 1 or 3")
            if n_nodes != 2 * n - 2:
                raise InvariantError(f"expected {2 * n - 2} nodes, found {n_nodes}")
            n_edges = sum(len(vs) for vs in adj.values()) // 2
            if n_edges != 2 * n - 3:
                raise InvariantError(f"expected {2 * n - 3} edges, found {n_edges}")
            if set(self.leaf_labels) != set(leaves):
                raise InvariantError("leaf_labels must cover exactly the degree-1 nodes")
        labs = list(self.leaf_labels.values())
        if len(set(labs)) != len(labs):
            raise InvariantError("leaf labels must be distinct")
        # connectivity + symmetry
        for u, vs in adj.items():
            for v in vs:
                if u not in adj[v]:
                    raise InvariantError("adjacency must be symmetric")
        if n_nodes:
            seen = {next(iter(adj))}
            stack = list(seen)
            while stack:
                u = stack.pop()
                for v in adj[u]:
                    if v not in seen:
                        seen.add(v)
                        stack.append(v)
            if len(seen) != n_nodes:
                raise InvariantError("tree must be connected")

    def newick(self) -> str:
        return to_newick(self)


# -- construction helpers -------------------------------------------------


def _two_leaf(labels=(1, 2)) -> Cladogram:
    a, b = labels
    return Cladogram({0: (1,), 1: (0,)}, {0: a, 1: b}, validate=False)


def caterpillar(labels: Iterable[int]) -> Cladogram:
    """The caterpillar cladogram whose spine carries ``labels`` in order.

    For labels (l1, ..., ln) the cherry {l1, l2} sits at one end, then l3,
    l4, ..., with {l(n-1), ln} forming the far cherry.
    """
    labs = list(labels)
    n = len(labs)
    if n == 0:
        return Cladogram({}, {})
    if n == 1:
        return Cladogram({0: ()}, {0: labs[0]})
    if n == 2:
        return _two_leaf(labs)
    adj: dict = {i: [] for i in range(n)}
    leaf_labels = {i: labs[i] for i in range(n)}
    spine = list(range(n, n + n - 2))
    for s in spine:
        adj[s] = []

    def link(u, v):
        adj[u].append(v)
        adj[v].append(u)

    link(0, spine[0])
    link(1, spine[0])
    for i, s in enumerate(spine[1:], start=2):
        link(i, s)
    link(n - 1, spine[-1])
    for s, t in zip(spine, spine[1:]):
        link(s, t)
    return Cladogram(adj, leaf_labels)


def quartet(pair1, pair2) -> Cladogram:
    """The 4-leaf cladogram with cherries ``pair1`` | ``pair2``."""
    a, b = pair1
    c, d = pair2
    return caterpillar([a, b, c, d])


# -- counting and sampling -------------------------------------------------


def count_cladograms(n: int) -> int:
    """Number of cladograms on n labelled leaves: (2n-5)!! for n >= 3.

    Exact arbitrary-precision integer; equals 1 for n in {0, 1, 2, 3}.
    """
    if n < 0:
        raise DomainError("n must be non-negative")
    out = 1
    for k in range(4, n + 1):
        out *= 2 * k - 5
    return out


def sample_uniform(n: int, rng: np.random.Generator) -> Cladogram:
    """Sample a uniform cladogram on labels {1, ..., n}.

    Stepwise construction: start from the 2-leaf tree and attach leaf k to a
    uniformly chosen edge (subdividing it) for k = 3, ..., n.  Every target
    tree has exactly one construction history per sequence of edge choices
    and the number of choices at step k is 2k-5, whose product is the
    cardinality of the whole family, so the output law is exactly uniform.
    O(n) time, no rejection.
    """
    if n < 2:
        raise DomainError("sample_uniform requires n >= 2")
    # leaves 0..n-1 carry labels 1..n; internal nodes are n..2n-3
    adj: dict = {0: [1], 1: [0]}
    edge_list = [(0, 1)]
    next_internal = n
    for k in range(3, n + 1):
        eidx = int(rng.integers(0, len(edge_list)))
        u, v = edge_list[eidx]
        w = next_internal
        next_internal += 1
        leaf = k - 1
        adj[u].remove(v)
        adj[v].remove(u)
        adj[u].append(w)
        adj[v].append(w)
        adj[w] = [u, v, leaf]
        adj[leaf] = [w]
        edge_list[eidx] = (u, w)
        edge_list.append((v, w))
        edge_list.append((leaf, w))
    labels = {i: i + 1 for i in range(n)}
    return Cladogram(adj, labels, validate=False)


def enumerate_cladograms(n: int) -> Iterator[Cladogram]:
    """Yield every cladogram on labels {1, ..., n} exactly once.

    Recursive leaf attachment: each tree on k leaves arises from exactly one
    tree on k-1 leaves (delete the leaf labelled k) and one edge choice, so
    the recursion is duplicate-free.  Guarded to 2 <= n <= 8 against the
    double-factorial blow-up.
    """
    if not 2 <= n <= 8:
        raise DomainError("enumerate_cladograms supports 2 <= n <= 8")

    def attach(t: Cladogram, eidx: int, label: int, node_leaf: int, node_int: int) -> Cladogram:
        u, v = t.edges[eidx]
        adj = {x: list(vs) for x, vs in t.adjacency.items()}
        adj[u].remove(v)
        adj[v].remove(u)
        adj[u].append(node_int)
        adj[v].append(node_int)
        adj[node_int] = [u, v, node_leaf]
        adj[node_leaf] = [node_int]
        labels = dict(t.leaf_labels)
        labels[node_leaf] = label
        return Cladogram(adj, labels, validate=False)

    def rec_ids(k: int) -> Iterator[Cladogram]:
        if k == 2:
            yield _two_leaf()
            return
        for t in rec_ids(k - 1):
            next_int = max(t.adjacency) + 1 if len(t.adjacency) > 2 else 2
            for eidx in range(len(t.edges)):
                yield attach(t, eidx, k, next_int, next_int + 1)

    return rec_ids(n)


# -- induced subtrees and canonical form -----------------------------------


def induced_subtree(t: Cladogram, I) -> Cladogram:
    """The subtree of ``t`` induced by the label set ``I``.

    Keeps only the paths joining the selected leaves and contracts the
    degree-2 vertices that appear, preserving the original labels.  An empty
    ``I`` gives the empty tree; a singleton gives the one-leaf tree.
    """
    I = frozenset(I)
    if not I <= t.labels:
        raise DomainError(f"labels {sorted(I - t.labels)} not present in tree")
    if len(I) == 0:
        return Cladogram({}, {})
    if len(I) == 1:
        (lab,) = I
        return Cladogram({0: ()}, {0: lab}, validate=False)

    keep_nodes = {t.node_of_label(lab) for lab in I}
    adj = {u: list(vs) for u, vs in t.adjacency.items()}
    # iteratively prune non-kept leaves of the current forest
    degree = {u: len(vs) for u, vs in adj.items()}
    stack = [u for u in adj if degree[u] == 1 and u not in keep_nodes]
    removed = set()
    while stack:
        u = stack.pop()
        removed.add(u)
        (v,) = [x for x in adj[u] if x not in removed]
        adj[v].remove(u)
        degree[v] -= 1
        if degree[v] == 1 and v not in keep_nodes:
            stack.append(v)
    for u in removed:
        del adj[u]
    # contract remaining degree-2 vertices
    for u in list(adj):
        if len(adj[u]) == 2 and u not in keep_nodes:
            a, b = adj[u]
            adj[a] = [x if x != u else b for x in adj[a]]
            adj[b] = [x if x != u else a for x in adj[b]]
            del adj[u]
    labels = {u: t.leaf_labels[u] for u in keep_nodes}
    return Cladogram(adj, labels, validate=False)


def _encode(t: Cladogram, node: int, parent: int) -> bytes:
    """Canonical byte encoding of the subtree hanging below ``node``."""
    out = {}
    stack = [(node, parent, False)]
    while stack:
        u, p, expanded = stack.pop()
        children = [v for v in t.adjacency[u] if v != p]
        if not children:
            out[(u, p)] = str(t.leaf_labels[u]).encode()
        elif expanded:
            encs = sorted(out[(c, u)] for c in children)
            out[(u, p)] = b"(" + b",".join(encs) + b")"
        else:
            stack.append((u, p, True))
            for c in children:
                stack.append((c, u, False))
    return out[(node, parent)]


def canonical_form(t: Cladogram) -> bytes:
    """A byte string equal for two cladograms iff they coincide as
    leaf-labelled trees.

    The tree is rooted at its minimum label and child encodings are sorted
    recursively, which removes any dependence on node-id assignment.
    """
    if t.n == 0:
        return b";"
    if t.n == 1:
        (lab,) = t.labels
        return str(lab).encode() + b";"
    root_label = min(t.labels)
    root = t.node_of_label(root_label)
    (top,) = t.adjacency[root]
    return str(root_label).encode() + b"|" + _encode(t, top, root) + b";"


# -- Newick serialisation ---------------------------------------------------


def to_newick(t: Cladogram) -> str:
    """Serialise rooted at the minimum label; leaf names are decimal labels.

    Children are ordered by their minimum descendant label, so the output is
    canonical: parse/print round-trips are bit-exact on this form.
    """
    if t.n == 0:
        return ";"
    if t.n == 1:
        (lab,) = t.labels
        return f"{lab};"
    root_label = min(t.labels)
    root = t.node_of_label(root_label)
    (top,) = t.adjacency[root]

    min_lab: dict = {}

    def fill_min(node: int, parent: int) -> int:
        order = []
        stack = [(node, parent)]
        while stack:
            u, p = stack.pop()
            order.append((u, p))
            for v in t.adjacency[u]:
                if v != p:
                    stack.append((v, u))
        for u, p in reversed(order):
            kids = [v for v in t.adjacency[u] if v != p]
            if not kids:
                min_lab[(u, p)] = t.leaf_labels[u]
            else:
                min_lab[(u, p)] = min(min_lab[(v, u)] for v in kids)
        return min_lab[(node, parent)]

    fill_min(top, root)

    parts: dict = {}
    stack = [(top, root, False)]
    while stack:
        u, p, expanded = stack.pop()
        kids = sorted(
            (v for v in t.adjacency[u] if v != p), key=lambda v: min_lab[(v, u)]
        )
        if not kids:
            parts[(u, p)] = str(t.leaf_labels[u])
        elif expanded:
            parts[(u, p)] = "(" + ",".join(parts[(v, u)] for v in kids) + ")"
        else:
            stack.append((u, p, True))
            for v in kids:
                stack.append((v, u, False))

    return f"({root_label},{parts[(top, root)]});"


def from_newick(s: str) -> Cladogram:
    """Parse the Newick form produced by :func:`to_newick`.

    Accepts general binary Newick with integer leaf names; the artificial
    degree-2 root introduced by rooting at a leaf is contracted away.
    """
    text = s.strip()
    if not text.endswith(";"):
        raise DomainError("Newick string must end with ';'")
    text = text[:-1]
    if text == "":
        return Cladogram({}, {})
    next_id = 0
    adj: dict = {}
    labels: dict = {}

    def new_node() -> int:
        nonlocal next_id
        u = next_id
        next_id += 1
        adj[u] = []
        return u

    open_stack: list = []
    root = None
    pos = 0
    while pos < len(text):
        ch = text[pos]
        if ch == "(":
            u = new_node()
            if open_stack:
                p = open_stack[-1]
                adj[p].append(u)
                adj[u].append(p)
            open_stack.append(u)
            pos += 1
        elif ch == ")":
            if not open_stack:
                raise DomainError("unbalanced parentheses in Newick string")
            root = open_stack.pop()
            pos += 1
        elif ch == ",":
            pos += 1
        else:
            start = pos
            while pos < len(text) and text[pos] not in ",()":
                pos += 1
            token = text[start:pos]
            try:
                lab = int(token)
            except ValueError:
                raise DomainError(f"leaf names must be decimal integers, got {token!r}")
            u = new_node()
            labels[u] = lab
            if open_stack:
                p = open_stack[-1]
                adj[p].append(u)
                adj[u].append(p)
            else:
                root = u
    if open_stack:
        raise DomainError("unbalanced parentheses in Newick string")
    if root is None:
        raise DomainError("empty Newick string")
    # contract the degree-2 root (and any other degree-2 node) introduced by rooting
    for u in list(adj):
        if len(adj[u]) == 2 and u not in labels:
            a, b = adj[u]
            adj[a] = [x if x != u else b for x in adj[a]]
            adj[b] = [x if x != u else a for x in adj[b]]
            del adj[u]
        elif len(adj[u]) == 0 and u == root and u not in labels:
            del adj[u]
    return Cladogram(adj, labels)


# -- regions ----------------------------------------------------------------


@dataclass(frozen=True)
class Region:
    """A connected component of the forest obtained by blowing up at most
    two internal nodes of a cladogram.

    ``edge_indices`` index into ``parent.edges``; ``labels`` are the original
    leaf labels inside; ``size`` counts them.  The blown-up boundary copies
    act as up to two unlabelled leaves of the region.
    """

    parent: Cladogram
    edge_indices: frozenset
    boundary_nodes: tuple
    labels: frozenset = field(compare=False)

    @property
    def size(self) -> int:
        return len(self.labels)

    def nodes(self) -> set:
        """Node ids of the parent covered by this region (boundary included)."""
        out = set()
        for ei in self.edge_indices:
            u, v = self.parent.edges[ei]
            out.add(u)
            out.add(v)
        return out


def region(t: Cladogram, boundary, component_selector: int | None = None) -> Region:
    """The region of ``t`` delimited by ``boundary`` containing the selected edge.

    ``boundary`` is a set of 0, 1 or 2 internal (degree-3) node ids;
    ``component_selector`` is an index into ``t.edges`` choosing the
    component (it may be omitted when the boundary is empty).
    """
    boundary = tuple(sorted(set(boundary)))
    if len(boundary) > 2:
        raise DomainError("a region is delimited by at most two nodes")
    for b in boundary:
        if b not in t.adjacency:
            raise DomainError(f"boundary node {b} not in tree")
        if t.degree(b) != 3:
            raise DomainError("boundary nodes must be internal (degree-3) nodes")
    edges = t.edges
    if not boundary:
        labels = t.labels
        return Region(t, frozenset(range(len(edges))), boundary, labels)
    if component_selector is None:
        raise DomainError("component_selector is required for a non-empty boundary")
    if not 0 <= component_selector < len(edges):
        raise DomainError("component_selector must index an edge of the tree")

    bset = set(boundary)
    edge_index = {e: i for i, e in enumerate(edges)}
    su, sv = edges[component_selector]
    comp_edges = {component_selector}
    # walk the forest without passing through blown-up nodes
    seen = {x for x in (su, sv) if x not in bset}
    stack = list(seen)
    while stack:
        u = stack.pop()
        for v in t.adjacency[u]:
            comp_edges.add(edge_index[(min(u, v), max(u, v))])
            if v not in bset and v not in seen:
                seen.add(v)
                stack.append(v)
    labels = frozenset(
        t.leaf_labels[u] for u in seen if t.degree(u) == 1
    )
    return Region(t, frozenset(comp_edges), boundary, labels)


def count_large_branch_points(t: Cladogram, reg: Region, m: int) -> int:
    """Count internal nodes of ``reg`` whose three sides each hold >= m
    labelled leaves of the region.

    For a region of size m0 the count is at most m0/m: cutting at all such
    nodes splits the region into parts of >= m leaves each.
    """
    if m < 1:
        raise DomainError("m must be >= 1")
    if reg.parent is not t:
        raise DomainError("region does not belong to the given tree")
    edges = t.edges
    reg_adj: dict = {}
    for ei in reg.edge_indices:
        u, v = edges[ei]
        reg_adj.setdefault(u, []).append(v)
        reg_adj.setdefault(v, []).append(u)
    bset = set(reg.boundary_nodes)
    count = 0
    for c in reg_adj:
        if c in bset or len(reg_adj[c]) != 3:
            continue
        smallest = None
        for start in reg_adj[c]:
            # leaves of the component of reg \ {c} containing `start`
            seen = {c, start}
            stack = [start]
            leaves = 1 if (t.degree(start) == 1 and start in t.leaf_labels) else 0
            while stack:
                u = stack.pop()
                for v in reg_adj.get(u, ()):
                    if v not in seen and v != c:
                        seen.add(v)
                        stack.append(v)
                        if t.degree(v) == 1 and v in t.leaf_labels:
                            leaves += 1
            smallest = leaves if smallest is None else min(smallest, leaves)
        if smallest is not None and smallest >= m:
            count += 1
    return count
