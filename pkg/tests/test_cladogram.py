"""Tests for cladogram combinatorics, serialisation and regions."""

import math

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from mastlab.cladogram import (
    Cladogram,
    canonical_form,
    caterpillar,
    count_cladograms,
    count_large_branch_points,
    enumerate_cladograms,
    from_newick,
    induced_subtree,
    quartet,
    region,
    sample_uniform,
    to_newick,
)
from mastlab.errors import DomainError
from mastlab.randkit import substream


# -- counting ------------------------------------------------------------


def test_count_small_values():
    assert [count_cladograms(n) for n in range(8)] == [1, 1, 1, 1, 3, 15, 105, 945]
    assert count_cladograms(5) == 15
    assert count_cladograms(6) == 105


def test_count_is_double_factorial():
    # independent oracle: (2n-5)!! = (2n-5)! / (2^(n-3) (n-3)!)
    for n in range(3, 30):
        expected = math.factorial(2 * n - 5) // (2 ** (n - 3) * math.factorial(n - 3))
        assert count_cladograms(n) == expected


def test_count_rejects_negative():
    with pytest.raises(DomainError):
        count_cladograms(-1)


# -- enumeration ---------------------------------------------------------


def test_enumerate_matches_count_and_is_duplicate_free():
    for n in range(3, 8):
        trees = list(enumerate_cladograms(n))
        forms = {canonical_form(t) for t in trees}
        assert len(trees) == count_cladograms(n)
        assert len(forms) == len(trees)
        for t in trees:
            t.validate()


def test_enumerate_base_case():
    assert len(list(enumerate_cladograms(3))) == 1


def test_enumerate_guards():
    with pytest.raises(DomainError):
        list(enumerate_cladograms(1))
    with pytest.raises(DomainError):
        list(enumerate_cladograms(9))


# -- sampling ------------------------------------------------------------


def test_sample_two_leaves_is_unique_tree():
    t = sample_uniform(2, substream(0, 0))
    assert t.n == 2
    assert canonical_form(t) == canonical_form(caterpillar([1, 2]))


def test_sample_determinism():
    a = sample_uniform(40, substream(9, 1))
    b = sample_uniform(40, substream(9, 1))
    assert canonical_form(a) == canonical_form(b)


def test_sample_rejects_small_n():
    with pytest.raises(DomainError):
        sample_uniform(1, substream(0, 0))


def test_sample_structural_invariants():
    rng = substream(9, 2)
    for n in (2, 3, 5, 17, 64):
        t = sample_uniform(n, rng)
        t.validate()
        degs = sorted(t.degree(u) for u in t.adjacency)
        assert degs == [1] * n + [3] * (n - 2)
        assert len(t.edges) == 2 * n - 3
        assert t.labels == frozenset(range(1, n + 1))


def test_sample_uniform_on_b4():
    # B_4 has 3 trees; each should appear with frequency 1/3 +- 0.01
    rng = substream(9, 3)
    counts = {}
    n_samples = 30_000
    for _ in range(n_samples):
        f = canonical_form(sample_uniform(4, rng))
        counts[f] = counts.get(f, 0) + 1
    assert len(counts) == 3
    for c in counts.values():
        assert abs(c / n_samples - 1.0 / 3.0) < 0.01


# -- induced subtrees ----------------------------------------------------


def test_induced_identity():
    t = sample_uniform(12, substream(9, 4))
    assert canonical_form(induced_subtree(t, t.labels)) == canonical_form(t)


def test_induced_three_labels_is_unique_shape():
    t = sample_uniform(10, substream(9, 5))
    sub = induced_subtree(t, {2, 5, 9})
    assert sub.n == 3
    assert canonical_form(sub) == canonical_form(caterpillar([2, 5, 9]))


def test_induced_on_quartet_cherry():
    # {1,2}|{3,4} restricted to {1,3,4}: contracting the degree-2 remnant of
    # the (1,2)-cherry node leaves the unique 3-leaf tree on {1,3,4}
    q = quartet((1, 2), (3, 4))
    sub = induced_subtree(q, {1, 3, 4})
    assert canonical_form(sub) == canonical_form(caterpillar([1, 3, 4]))


def test_induced_small_sets():
    t = sample_uniform(6, substream(9, 6))
    assert induced_subtree(t, set()).n == 0
    one = induced_subtree(t, {3})
    assert one.n == 1 and one.labels == frozenset({3})
    two = induced_subtree(t, {2, 5})
    assert two.n == 2 and len(two.edges) == 1


def test_induced_rejects_foreign_labels():
    t = sample_uniform(5, substream(9, 7))
    with pytest.raises(DomainError):
        induced_subtree(t, {1, 99})


def test_induced_composition_law_on_b5():
    # induced(induced(t, I), J) == induced(t, J) for J subset of I
    from itertools import combinations

    labels = (1, 2, 3, 4, 5)
    for t in enumerate_cladograms(5):
        for i_size in range(1, 6):
            for I in combinations(labels, i_size):
                ti = induced_subtree(t, I)
                for j_size in range(0, i_size + 1):
                    for J in combinations(I, j_size):
                        lhs = canonical_form(induced_subtree(ti, J))
                        rhs = canonical_form(induced_subtree(t, J))
                        assert lhs == rhs


# -- canonical form ------------------------------------------------------


def test_canonical_ignores_node_ids():
    a = Cladogram({0: (4,), 1: (4,), 4: (0, 1, 5), 2: (5,), 3: (5,), 5: (2, 3, 4)},
                  {0: 1, 1: 2, 2: 3, 3: 4})
    b = Cladogram({10: (40,), 11: (40,), 40: (10, 11, 50), 12: (50,), 13: (50,), 50: (12, 13, 40)},
                  {10: 1, 11: 2, 12: 3, 13: 4})
    assert canonical_form(a) == canonical_form(b)


def test_canonical_separates_quartets():
    assert canonical_form(quartet((1, 2), (3, 4))) != canonical_form(quartet((1, 3), (2, 4)))


def test_canonical_all_b5_distinct():
    forms = {canonical_form(t) for t in enumerate_cladograms(5)}
    assert len(forms) == 15


# -- Newick --------------------------------------------------------------


def test_newick_round_trip_bit_exact():
    rng = substream(9, 8)
    for n in (2, 3, 7, 30, 100):
        t = sample_uniform(n, rng)
        s = to_newick(t)
        assert to_newick(from_newick(s)) == s
        assert canonical_form(from_newick(s)) == canonical_form(t)


def test_newick_degenerate_sizes():
    assert to_newick(Cladogram({}, {})) == ";"
    assert to_newick(Cladogram({0: ()}, {0: 7})) == "7;"
    assert from_newick("7;").labels == frozenset({7})
    assert from_newick(";").n == 0


def test_newick_parse_errors():
    with pytest.raises(DomainError):
        from_newick("(1,2)")  # missing semicolon
    with pytest.raises(DomainError):
        from_newick("((1,2);")
    with pytest.raises(DomainError):
        from_newick("(a,b);")


def test_newick_deep_caterpillar():
    t = caterpillar(range(1, 1100))
    s = to_newick(t)
    assert to_newick(from_newick(s)) == s


@settings(max_examples=50, deadline=None)
@given(st.integers(2, 40), st.integers(0, 10_000))
def test_newick_round_trip_property(n, seed):
    t = sample_uniform(n, substream(seed, 0))
    s = to_newick(t)
    assert to_newick(from_newick(s)) == s


# -- regions -------------------------------------------------------------


def test_region_empty_boundary_is_whole_tree():
    t = sample_uniform(8, substream(9, 9))
    r = region(t, ())
    assert r.size == 8
    assert r.labels == t.labels
    assert len(r.edge_indices) == len(t.edges)


def test_region_quartet_one_node():
    q = quartet((1, 2), (3, 4))
    b = min(q.internal_nodes())
    components = {}
    for i in range(len(q.edges)):
        r = region(q, {b}, i)
        components[r.edge_indices] = r.size
    # blowing up one node of the quartet yields three components with leaf
    # sizes in {1, 2} summing to 4
    assert set(components.values()) <= {1, 2}
    assert len(components) == 3
    assert sum(components.values()) == 4


def test_region_caterpillar_middle():
    # spine v1..v4 of caterpillar(1..6); blowing up the two cherry-adjacent
    # spine nodes leaves the middle region with exactly leaves {3, 4}
    t = caterpillar([1, 2, 3, 4, 5, 6])
    internal = sorted(t.internal_nodes())
    v1, v4 = internal[0], internal[-1]
    # middle component: select the spine edge between v2 and v3
    v2, v3 = internal[1], internal[2]
    eidx = t.edges.index((min(v2, v3), max(v2, v3)))
    middle = region(t, {v1, v4}, eidx)
    assert middle.size == 2
    assert middle.labels == frozenset({3, 4})


def test_region_adjacent_boundary_bare_edge():
    t = caterpillar([1, 2, 3, 4, 5, 6])
    internal = sorted(t.internal_nodes())
    v2, v3 = internal[1], internal[2]
    eidx = t.edges.index((min(v2, v3), max(v2, v3)))
    bare = region(t, {v2, v3}, eidx)
    assert bare.size == 0
    assert len(bare.edge_indices) == 1


def test_region_rejects_leaf_boundary():
    t = caterpillar([1, 2, 3, 4])
    leaf = t.node_of_label(1)
    with pytest.raises(DomainError):
        region(t, {leaf}, 0)


def test_region_requires_selector_with_boundary():
    t = caterpillar([1, 2, 3, 4, 5])
    with pytest.raises(DomainError):
        region(t, {sorted(t.internal_nodes())[0]})


# -- large branch points ---------------------------------------------------


def test_count_large_branch_points_quartet():
    q = quartet((1, 2), (3, 4))
    whole = region(q, ())
    assert count_large_branch_points(q, whole, 1) == 2
    assert count_large_branch_points(q, whole, 4) == 0


def test_count_large_branch_points_bound_randomised():
    rng = substream(9, 10)
    for _ in range(1000):
        n = int(rng.integers(4, 30))
        t = sample_uniform(n, rng)
        internal = sorted(t.internal_nodes())
        n_boundary = int(rng.integers(0, 3))
        boundary = [internal[int(i)] for i in rng.choice(len(internal), size=n_boundary, replace=False)]
        reg = region(t, boundary, int(rng.integers(0, len(t.edges))))
        m0 = reg.size
        if m0 == 0:
            continue
        m = int(rng.integers(1, m0 + 1))
        cnt = count_large_branch_points(t, reg, m)
        assert cnt <= m0 // m
        # a node with all three sides >= m0 would need 3 m0 <= m0 leaves
        assert count_large_branch_points(t, reg, m0) == 0
