"""Exact Maximum Agreement Subtree computation.

``mast`` runs a dynamic program over all pairs of *directed edges* of the
two trees.  The subtree hanging below a directed edge (u -> v) is treated as
planted (rooted at the cut point next to v); for a pair of planted subtrees
the maximum agreement is the best of matching the two child pairs (2x2 case
analysis at binary nodes) or skipping one level on either side.  The
unrooted answer is recovered by joining the two planted answers across every
pair of edge orientations.  The table fill is a numba kernel: it is the
O(n^2) hot loop of the scaling experiments.

``mast_bruteforce`` is the independent oracle: it walks label subsets in
decreasing size (lexicographic within a size) and returns the first subset
whose induced subtrees coincide, which is exact by exhaustion and returns
the lexicographically smallest maximum witness.

The DP's witness is deterministic (fixed option order over a fixed edge
numbering) but is not guaranteed to be the lexicographically smallest one;
tests compare sizes and re-check witness validity via canonical forms.
"""

from __future__ import annotations

from dataclasses import dataclass
from itertools import combinations

import numpy as np
from numba import njit

from .cladogram import Cladogram, Region, canonical_form, induced_subtree
from .errors import DomainError, InvariantError

__all__ = ["MastResult", "mast", "mast_size", "mast_bruteforce", "mast_regions"]


@dataclass(frozen=True)
class MastResult:
    """Size of a maximum agreement subtree and one witness label set."""

    size: int
    witness: frozenset

    def __iter__(self):
        return iter((self.size, self.witness))


# -- preprocessing ----------------------------------------------------------


class _Directed:
    """Directed-edge arrays for one tree restricted to a common label set.

    Edge m of ``tree.edges`` yields directed ids 2m (u -> v) and 2m+1
    (v -> u).  ``leaf_code[d]`` is the dense common-label id if the head of
    d is a leaf carrying a common label, -2 for a leaf with a non-common
    label, and -1 for an internal head.  ``below[d, j]`` says whether common
    label j occurs below d.
    """

    __slots__ = ("m", "leaf_code", "c1", "c2", "topo", "below", "n_dir")

    def __init__(self, tree: Cladogram, common_ids: dict):
        edges = tree.edges
        n_dir = 2 * len(edges)
        self.n_dir = n_dir
        dir_id = {}
        head = np.empty(n_dir, dtype=np.int64)
        tail = np.empty(n_dir, dtype=np.int64)
        for m, (u, v) in enumerate(edges):
            dir_id[(u, v)] = 2 * m
            dir_id[(v, u)] = 2 * m + 1
            head[2 * m] = v
            tail[2 * m] = u
            head[2 * m + 1] = u
            tail[2 * m + 1] = v
        leaf_code = np.empty(n_dir, dtype=np.int64)
        c1 = np.full(n_dir, -1, dtype=np.int64)
        c2 = np.full(n_dir, -1, dtype=np.int64)
        pending = np.zeros(n_dir, dtype=np.int64)
        parents_of: dict = {d: [] for d in range(n_dir)}
        for d in range(n_dir):
            h = head[d]
            nbrs = tree.adjacency[h]
            if len(nbrs) == 1:
                lab = tree.leaf_labels[h]
                leaf_code[d] = common_ids.get(lab, -2)
            else:
                leaf_code[d] = -1
                kids = [dir_id[(h, w)] for w in nbrs if w != tail[d]]
                c1[d], c2[d] = kids
                pending[d] = 2
                parents_of[kids[0]].append(d)
                parents_of[kids[1]].append(d)
        # Kahn topological order: children before parents
        topo = np.empty(n_dir, dtype=np.int64)
        queue = [d for d in range(n_dir) if pending[d] == 0]
        k = 0
        while queue:
            nxt = []
            for d in queue:
                topo[k] = d
                k += 1
                for p in parents_of[d]:
                    pending[p] -= 1
                    if pending[p] == 0:
                        nxt.append(p)
            queue = nxt
        if k != n_dir:
            raise InvariantError("directed-edge order incomplete: malformed tree")
        n_common = len(common_ids)
        below = np.zeros((n_dir, max(n_common, 1)), dtype=np.bool_)
        for d in topo:
            lc = leaf_code[d]
            if lc >= 0:
                below[d, lc] = True
            elif lc == -1:
                np.logical_or(below[c1[d]], below[c2[d]], out=below[d])
        self.leaf_code = leaf_code
        self.c1 = c1
        self.c2 = c2
        self.topo = topo
        self.below = below


@njit(cache=True)
def _mast_table(topo_a, leaf_a, c1_a, c2_a, below_a, topo_b, leaf_b, c1_b, c2_b, below_b):
    na = leaf_a.shape[0]
    nb = leaf_b.shape[0]
    M = np.zeros((na, nb), dtype=np.int16)
    for ia in range(na):
        e = topo_a[ia]
        la = leaf_a[e]
        if la != -1:
            if la >= 0:
                for f in range(nb):
                    lb = leaf_b[f]
                    if lb == -1:
                        if below_b[f, la]:
                            M[e, f] = 1
                    elif lb == la:
                        M[e, f] = 1
        else:
            c1 = c1_a[e]
            c2 = c2_a[e]
            for ib in range(nb):
                f = topo_b[ib]
                lb = leaf_b[f]
                if lb != -1:
                    if lb >= 0 and below_a[e, lb]:
                        M[e, f] = 1
                else:
                    d1 = c1_b[f]
                    d2 = c2_b[f]
                    v = M[c1, d1] + M[c2, d2]
                    w = M[c1, d2] + M[c2, d1]
                    if w > v:
                        v = w
                    if M[c1, f] > v:
                        v = M[c1, f]
                    if M[c2, f] > v:
                        v = M[c2, f]
                    if M[e, d1] > v:
                        v = M[e, d1]
                    if M[e, d2] > v:
                        v = M[e, d2]
                    M[e, f] = v
    return M


@njit(cache=True)
def _mast_combine(M):
    na, nb = M.shape
    best = np.int64(-1)
    be = 0
    bf = 0
    for e in range(na):
        er = e ^ 1
        for f in range(nb):
            v = np.int64(M[e, f]) + np.int64(M[er, f ^ 1])
            if v > best:
                best = v
                be = e
                bf = f
    return best, be, bf


def _reconstruct(M, A: _Directed, B: _Directed, e0: int, f0: int) -> list:
    """Walk one deterministic argmax path through the table, collecting
    common-label ids.  Fixed option order: ids, cross matchings, then skips."""
    out = []
    stack = [(e0, f0)]
    while stack:
        e, f = stack.pop()
        v = int(M[e, f])
        if v == 0:
            continue
        la = A.leaf_code[e]
        lb = B.leaf_code[f]
        if la >= 0:
            out.append(int(la))
            continue
        if lb >= 0:
            out.append(int(lb))
            continue
        c1, c2 = int(A.c1[e]), int(A.c2[e])
        d1, d2 = int(B.c1[f]), int(B.c2[f])
        if int(M[c1, d1]) + int(M[c2, d2]) == v:
            stack.append((c1, d1))
            stack.append((c2, d2))
        elif int(M[c1, d2]) + int(M[c2, d1]) == v:
            stack.append((c1, d2))
            stack.append((c2, d1))
        elif int(M[c1, f]) == v:
            stack.append((c1, f))
        elif int(M[c2, f]) == v:
            stack.append((c2, f))
        elif int(M[e, d1]) == v:
            stack.append((e, d1))
        else:
            stack.append((e, d2))
    return out


# -- public operations -------------------------------------------------------


def mast_size(t: Cladogram, t2: Cladogram) -> int:
    """Size-only MAST; skips witness reconstruction (hot path for scaling runs)."""
    return _mast(t, t2, want_witness=False).size


def mast(t: Cladogram, t2: Cladogram, validate: bool = False) -> MastResult:
    """Maximum agreement subtree of two cladograms over their common labels.

    Returns the exact maximum size and a witness label set inducing equal
    leaf-labelled subtrees.  Disjoint label sets give size 0 with an empty
    witness.  With ``validate=True`` the witness is re-checked post hoc via
    canonical forms (used by test builds).
    """
    res = _mast(t, t2, want_witness=True)
    if validate:
        ind1 = canonical_form(induced_subtree(t, res.witness))
        ind2 = canonical_form(induced_subtree(t2, res.witness))
        if ind1 != ind2 or len(res.witness) != res.size:
            raise AssertionError("MAST witness failed canonical-form validation")
    return res


def _mast(t: Cladogram, t2: Cladogram, want_witness: bool) -> MastResult:
    common = sorted(t.labels & t2.labels)
    if len(common) == 0:
        return MastResult(0, frozenset())
    if len(common) == 1 or t.n < 2 or t2.n < 2:
        return MastResult(1, frozenset({common[0]}))
    ids = {lab: j for j, lab in enumerate(common)}
    A = _Directed(t, ids)
    B = _Directed(t2, ids)
    M = _mast_table(
        A.topo, A.leaf_code, A.c1, A.c2, A.below,
        B.topo, B.leaf_code, B.c1, B.c2, B.below,
    )
    best, be, bf = _mast_combine(M)
    size = int(best)
    if not want_witness:
        return MastResult(size, frozenset())
    picked = _reconstruct(M, A, B, be, bf) + _reconstruct(M, A, B, be ^ 1, bf ^ 1)
    witness = frozenset(common[j] for j in picked)
    return MastResult(size, witness)


def mast_bruteforce(t: Cladogram, t2: Cladogram) -> MastResult:
    """Exhaustive MAST oracle over subsets of the common labels.

    Iterates subsets in decreasing size (lexicographic within each size) and
    returns the first agreeing one, which is therefore the lexicographically
    smallest maximum witness.  Guarded to at most 20 common labels.
    """
    common = sorted(t.labels & t2.labels)
    if len(common) > 20:
        raise DomainError("brute force limited to 20 common labels")
    if len(common) == 0:
        return MastResult(0, frozenset())
    for s in range(len(common), 0, -1):
        for I in combinations(common, s):
            if canonical_form(induced_subtree(t, I)) == canonical_form(
                induced_subtree(t2, I)
            ):
                return MastResult(s, frozenset(I))
    return MastResult(0, frozenset())


def mast_regions(r: Region, r2: Region) -> MastResult:
    """MAST of two regions, restricted to the labels common to both.

    Paths between leaves of a region stay inside the region, so the induced
    subtrees can be taken in the parent trees after intersecting label sets.
    """
    L = r.labels & r2.labels
    if len(L) == 0:
        return MastResult(0, frozenset())
    sub1 = induced_subtree(r.parent, L)
    sub2 = induced_subtree(r2.parent, L)
    return mast(sub1, sub2)
