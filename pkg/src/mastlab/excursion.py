"""Discretised Brownian-excursion trees and the backbone gluing coupling.

An excursion e_0, ..., e_N on the grid (step 1/N, e_0 = e_N = 0) codes a
tree metric on grid indices:

    d(s, t) = e_s + e_t - 2 * min(e_u : u in [s ^ t, s v t]),

a pseudo-distance whose quotient is a tree.  The mass measure is uniform on
the grid cells (indices 0..N-1).  Sampling is a Gaussian bridge followed by
the cyclic shift at the minimum, which has the excursion law in the
continuum limit, is O(N) and needs no conditioning rejection.

``glue_coupling`` builds the n-marked tree obtained by sampling a uniform
cladogram backbone, Dirichlet(1/2,...,1/2) edge weights, and one bi-pointed
excursion piece per backbone edge with distances scaled by sqrt(weight).
Pieces are glued at their marked points along the backbone incidences, so
the glued object is again a tree and the distance between two marked leaves
is the sum of within-piece mark-to-mark distances along the unique backbone
path.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np
from numba import njit

from .cladogram import Cladogram, sample_uniform, to_newick
from .errors import BudgetError, DomainError
from .randkit import sample_dirichlet_array

__all__ = [
    "ExcursionTree",
    "sample_excursion",
    "tree_distance",
    "diameter",
    "CoupledTree",
    "glue_coupling",
    "GluedRegions",
    "leaf_region_counts",
    "region_census",
]

_MIN_LOG2, _MAX_LOG2 = 8, 20


class ExcursionTree:
    """A non-negative excursion on a regular grid with O(1) range minima.

    Attributes
    ----------
    values : float64[N+1]   e_0..e_N with e_0 = e_N = 0, all values >= 0.
    N      : int            number of grid cells; the mass measure puts
                            weight 1/N on each index 0..N-1.

    The sparse table for range-minimum queries costs O(N log N) and is built
    lazily on the first distance query; ``diameter`` does not need it.
    """

    __slots__ = ("values", "N", "_rmq")

    def __init__(self, values):
        v = np.asarray(values, dtype=float)
        if v.ndim != 1 or v.shape[0] < 2:
            raise DomainError("an excursion needs at least two grid values")
        if abs(v[0]) > 1e-12 or abs(v[-1]) > 1e-12:
            raise DomainError("excursion endpoints must be 0")
        if np.any(v < -1e-12):
            raise DomainError("excursion values must be non-negative")
        v = np.clip(v, 0.0, None)
        v[0] = 0.0
        v[-1] = 0.0
        self.values = v
        self.N = v.shape[0] - 1
        self._rmq = None

    # -- range minimum ----------------------------------------------------

    def _table(self):
        if self._rmq is None:
            levels = [self.values]
            size = self.values.shape[0]
            span = 1
            while 2 * span <= size:
                prev = levels[-1]
                levels.append(np.minimum(prev[:-span], prev[span:]))
                span *= 2
            self._rmq = levels
        return self._rmq

    def range_min(self, lo: int, hi: int) -> float:
        """min(values[lo..hi]) inclusive, O(1) after preprocessing."""
        if lo > hi:
            lo, hi = hi, lo
        tab = self._table()
        lvl = (hi - lo + 1).bit_length() - 1
        return min(tab[lvl][lo], tab[lvl][hi - (1 << lvl) + 1])

    def distance(self, s: int, t: int) -> float:
        """Tree distance between grid indices: e_s + e_t - 2 min over [s, t]."""
        N = self.N
        if not (0 <= s <= N and 0 <= t <= N):
            raise DomainError("grid index out of range")
        if s == t:
            return 0.0
        return float(self.values[s] + self.values[t] - 2.0 * self.range_min(s, t))

    def distance_many(self, s, t) -> np.ndarray:
        """Vectorised ``distance`` over index arrays of equal shape."""
        s = np.asarray(s, dtype=np.int64)
        t = np.asarray(t, dtype=np.int64)
        if np.any(s < 0) or np.any(t < 0) or np.any(s > self.N) or np.any(t > self.N):
            raise DomainError("grid index out of range")
        lo = np.minimum(s, t)
        hi = np.maximum(s, t)
        tab = self._table()
        length = hi - lo + 1
        lvl = np.int64(np.floor(np.log2(length)))
        left = np.empty(s.shape, dtype=float)
        right = np.empty(s.shape, dtype=float)
        for l in np.unique(lvl):
            m = lvl == l
            left[m] = tab[l][lo[m]]
            right[m] = tab[l][hi[m] - (1 << int(l)) + 1]
        mins = np.minimum(left, right)
        return self.values[s] + self.values[t] - 2.0 * mins

    def distances_from(self, s: int) -> np.ndarray:
        """d(s, t) for every grid index t, via running minima, O(N)."""
        v = self.values
        mins = np.empty_like(v)
        mins[s] = v[s]
        if s > 0:
            mins[:s] = np.minimum.accumulate(v[s - 1 :: -1])[::-1]
        if s < self.N:
            mins[s + 1 :] = np.minimum.accumulate(v[s + 1 :])
        return v[s] + v - 2.0 * np.minimum(mins, v[s])

    def diameter(self) -> float:
        """Exact max of d over all grid pairs via a single monotonic-stack scan."""
        return float(_diameter_scan(self.values))


@njit(cache=True)
def _diameter_scan(e):
    # Scan t left to right, maintaining for the current t a stack of
    # segments on which min(e[s..t]) is constant: minv = that minimum,
    # best = max e_s on the segment, run = running max of best - 2*minv up
    # the stack.  Then max_s (e_s - 2 min(e[s..t])) is run[top] and the
    # diameter is max_t (run[top] + e_t).  Amortised O(N).
    n = e.shape[0]
    minv = np.empty(n)
    best = np.empty(n)
    run = np.empty(n)
    top = -1
    out = 0.0
    for t in range(n):
        x = e[t]
        b = x
        while top >= 0 and minv[top] >= x:
            if best[top] > b:
                b = best[top]
            top -= 1
        top += 1
        minv[top] = x
        best[top] = b
        r = b - 2.0 * x
        if top > 0 and run[top - 1] > r:
            r = run[top - 1]
        run[top] = r
        d = r + x
        if d > out:
            out = d
    return out


def sample_excursion(N: int, rng: np.random.Generator) -> ExcursionTree:
    """Sample a discretised normalised excursion on N+1 grid points.

    N must be a power of two in [2^8, 2^20].  A Gaussian bridge is built
    from N increments of variance 1/N and cyclically shifted to start at its
    minimum; negative round-off is clipped at 0.
    """
    if N & (N - 1) or not (1 << _MIN_LOG2) <= N <= (1 << _MAX_LOG2):
        raise DomainError(f"N must be a power of two in [2^{_MIN_LOG2}, 2^{_MAX_LOG2}]")
    steps = rng.normal(0.0, 1.0 / np.sqrt(N), size=N)
    walk = np.empty(N + 1)
    walk[0] = 0.0
    np.cumsum(steps, out=walk[1:])
    bridge = walk - np.arange(N + 1) / N * walk[N]
    m = int(np.argmin(bridge[:N]))
    exc = np.empty(N + 1)
    exc[: N - m] = bridge[m:N] - bridge[m]
    exc[N - m :] = bridge[: m + 1] - bridge[m]
    return ExcursionTree(exc)


def tree_distance(e: ExcursionTree, s: int, t: int) -> float:
    """Module-level alias for :meth:`ExcursionTree.distance`."""
    return e.distance(s, t)


def diameter(e: ExcursionTree) -> float:
    """Module-level alias for :meth:`ExcursionTree.diameter`."""
    return e.diameter()


# -- the backbone gluing coupling --------------------------------------------


@dataclass(frozen=True)
class CoupledTree:
    """A glued n-marked tree: cladogram backbone, Dirichlet edge weights,
    one bi-pointed excursion piece per edge.

    ``edge_ends[i] = (v1, v2)`` are the backbone endpoints of edge i in the
    coupling enumeration: edges 0..n-1 are the leaf edges (edge i touches
    the leaf labelled i+1, listed as v1), internal edges follow.  Piece i
    carries mass ``weights[i]``; its distances scale by sqrt(weights[i]).
    ``marks[i] = (s1, s2)`` are the grid indices of the piece's two marked
    points, glued to v1 and v2 respectively.  The j-th marked leaf point of
    the coupling is mark 1 of piece j.
    """

    backbone: Cladogram
    edge_ends: tuple
    weights: np.ndarray
    pieces: tuple
    marks: np.ndarray

    @property
    def n(self) -> int:
        return self.backbone.n

    def piece_length(self, i: int) -> float:
        """Scaled distance between the two marked points of piece i."""
        s1, s2 = self.marks[i]
        return float(np.sqrt(self.weights[i]) * self.pieces[i].distance(int(s1), int(s2)))

    def metadata(self) -> dict:
        """JSON-ready backbone Newick + weights (the coupled-tree metadata)."""
        return {
            "n": self.n,
            "backbone_newick": to_newick(self.backbone),
            "weights": [float(w) for w in self.weights],
            "grid": int(self.pieces[0].N),
        }


def _edge_enumeration(t: Cladogram):
    """Order edges so edge i < n is the one incident to leaf label i+1
    (leaf endpoint first), then the internal edges in canonical order."""
    by_label = {}
    internal = []
    for u, v in t.edges:
        du, dv = t.degree(u), t.degree(v)
        if du == 1:
            by_label[t.leaf_labels[u]] = (u, v)
        elif dv == 1:
            by_label[t.leaf_labels[v]] = (v, u)
        else:
            internal.append((u, v))
    ends = [by_label[lab] for lab in sorted(by_label)] + internal
    return ends


def glue_coupling(n: int, rng: np.random.Generator, N: int = 1 << 14):
    """Sample a coupled tree on n marked leaves and its distance matrix.

    Returns ``(coupled, dist)`` where ``dist[i, j]`` is the glued-tree
    distance between marked leaf points i+1 and j+1 (symmetric, zero
    diagonal).  The backbone is a uniform cladogram on n labels, the 2n-3
    edge weights are Dirichlet(1/2, ..., 1/2), and the pieces are
    independent excursions with two uniform marked grid points each.
    """
    if not 3 <= n <= 512:
        raise DomainError("glue_coupling supports 3 <= n <= 512")
    if (2 * n - 3) * (N + 1) > 1 << 26:
        raise BudgetError(
            f"coupling would allocate {(2 * n - 3) * (N + 1):.2e} grid values; "
            "reduce n or N"
        )
    backbone = sample_uniform(n, rng)
    ends = _edge_enumeration(backbone)
    m = 2 * n - 3
    weights = sample_dirichlet_array([0.5] * m, 1, rng)[0]
    pieces = tuple(sample_excursion(N, rng) for _ in range(m))
    marks = rng.integers(0, N, size=(m, 2))
    coupled = CoupledTree(
        backbone=backbone,
        edge_ends=tuple(ends),
        weights=weights,
        pieces=pieces,
        marks=marks,
    )
    # lengths once per piece, then distances are path sums over the backbone
    lengths = np.array([coupled.piece_length(i) for i in range(m)])
    adj: dict = {}
    for i, (a, b) in enumerate(ends):
        adj.setdefault(a, []).append((b, i))
        adj.setdefault(b, []).append((a, i))
    leaf_node = {backbone.leaf_labels[u]: u for u in backbone.leaf_labels}
    dist = np.zeros((n, n))
    for lab in range(1, n + 1):
        src = leaf_node[lab]
        acc = {src: 0.0}
        stack = [src]
        while stack:
            u = stack.pop()
            for v, i in adj[u]:
                if v not in acc:
                    acc[v] = acc[u] + lengths[i]
                    stack.append(v)
        for lab2 in range(1, n + 1):
            dist[lab - 1, lab2 - 1] = acc[leaf_node[lab2]]
    np.fill_diagonal(dist, 0.0)
    return coupled, dist


# -- regions of the glued tree ------------------------------------------------


class GluedRegions:
    """Component decomposition of a coupled tree minus at most two cut points.

    A cut point is a (piece_index, grid_index) pair.  Removing the cuts
    splits the glued tree into components; per component this object exposes
    the count of marked leaf points inside and the grid mass inside
    (piece weights times grid-cell fractions).  Grid points at pseudo-metric
    distance ~0 from a cut form the boundary: they belong to no component
    and their (measure-zero in the continuum) mass is excluded.
    """

    def __init__(self, coupled: CoupledTree, cuts, tol: float = 1e-9):
        cuts = [(int(p), int(g)) for p, g in cuts]
        if len(cuts) > 2:
            raise DomainError("a region is delimited by at most two cut points")
        m = len(coupled.pieces)
        for p, g in cuts:
            if not 0 <= p < m:
                raise DomainError(f"cut piece index {p} out of range")
            if not 0 <= g <= coupled.pieces[p].N:
                raise DomainError(f"cut grid index {g} out of range")
        self.coupled = coupled
        self._parent: dict = {}
        self._labels: dict = {}  # cut piece -> int label per grid index 0..N
        cuts_by_piece: dict = {}
        for p, g in cuts:
            cuts_by_piece.setdefault(p, []).append(g)
        self._cut_pieces = cuts_by_piece

        for i in range(m):
            v1, v2 = coupled.edge_ends[i]
            self._find(("v", v1))
            self._find(("v", v2))
            if i not in cuts_by_piece:
                self._union(("v", v1), ("v", v2))
                continue
            piece = coupled.pieces[i]
            a, b = int(coupled.marks[i][0]), int(coupled.marks[i][1])
            t = tol * max(1.0, float(piece.values.max()))
            labels = np.zeros(piece.N + 1, dtype=np.int64)
            boundary = np.zeros(piece.N + 1, dtype=bool)
            for g in cuts_by_piece[i]:
                d_cut = piece.distances_from(g)
                code = np.zeros(piece.N + 1, dtype=np.int64)
                for bit, anchor in ((2, a), (1, b)):
                    d_anchor = piece.distances_from(anchor)
                    d_ca = piece.distance(g, anchor)
                    separated = np.abs(d_anchor - (d_cut + d_ca)) <= t
                    code += bit * separated.astype(np.int64)
                labels = labels * 4 + code
                boundary |= d_cut <= t
            labels[boundary] = -1
            self._labels[i] = labels
            for pid, anchor_vertex in ((labels[a], v1), (labels[b], v2)):
                if pid >= 0:
                    self._union(("part", i, int(pid)), ("v", anchor_vertex))
            for pid in np.unique(labels):
                if pid >= 0:
                    self._find(("part", i, int(pid)))

        self._census = self._build_census()

    # union-find ----------------------------------------------------------

    def _find(self, x):
        parent = self._parent
        while parent.setdefault(x, x) != x:
            parent[x] = parent[parent[x]]
            x = parent[x]
        return x

    def _union(self, x, y):
        rx, ry = self._find(x), self._find(y)
        if rx != ry:
            self._parent[rx] = ry

    # components ----------------------------------------------------------

    def component_of(self, piece: int, grid: int):
        """Representative key of the component containing a glued-tree point,
        or None when the point lies on the cut boundary."""
        coupled = self.coupled
        if not 0 <= piece < len(coupled.pieces):
            raise DomainError("piece index out of range")
        if not 0 <= grid <= coupled.pieces[piece].N:
            raise DomainError("grid index out of range")
        if piece in self._cut_pieces:
            pid = int(self._labels[piece][grid])
            if pid < 0:
                return None
            return self._find(("part", piece, pid))
        return self._find(("v", self.coupled.edge_ends[piece][0]))

    def _build_census(self) -> dict:
        coupled = self.coupled
        census: dict = {}

        def acc(rep, leaves, mass):
            lv, ms = census.get(rep, (0, 0.0))
            census[rep] = (lv + leaves, ms + mass)

        for i in range(len(coupled.pieces)):
            w = float(coupled.weights[i])
            if i not in self._cut_pieces:
                acc(self._find(("v", coupled.edge_ends[i][0])), 0, w)
            else:
                cells = self._labels[i][:-1]  # cells 0..N-1 carry the mass
                N = coupled.pieces[i].N
                for pid in np.unique(cells):
                    if pid < 0:
                        continue
                    frac = float((cells == pid).sum()) / N
                    acc(self._find(("part", i, int(pid))), 0, w * frac)
        # marked leaf j+1 sits at mark 1 of piece j
        for j in range(coupled.n):
            rep = self.component_of(j, int(coupled.marks[j][0]))
            if rep is not None:
                acc(rep, 1, 0.0)
        return census

    def census(self) -> list:
        """Sorted list of (marked_leaf_count, mass) over all components."""
        return sorted(self._census.values())

    def counts(self, select) -> tuple:
        """(marked_leaf_count, mass) of the component containing ``select``,
        a (piece, grid) point; (0, 0.0) when it lies on the cut boundary."""
        rep = self.component_of(int(select[0]), int(select[1]))
        if rep is None:
            return (0, 0.0)
        return self._census.get(rep, (0, 0.0))


def region_census(coupled: CoupledTree, cuts, tol: float = 1e-9) -> list:
    """Components of the glued tree minus <= 2 cuts as (leaf count, mass) rows."""
    return GluedRegions(coupled, cuts, tol=tol).census()


def leaf_region_counts(coupled: CoupledTree, cuts, select, tol: float = 1e-9) -> tuple:
    """(marked-leaf count, grid mass) of the component containing ``select``.

    ``cuts`` is a sequence of at most two (piece, grid) cut points and
    ``select`` a (piece, grid) point choosing the component.  With no cuts
    this is (n, 1.0); selecting a point on the cut boundary gives (0, 0.0).
    """
    return GluedRegions(coupled, cuts, tol=tol).counts(select)
