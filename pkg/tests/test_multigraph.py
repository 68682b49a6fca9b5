"""Enumeration, canonical forms, and automorphism counts for multigraphs."""

import itertools
import math

import numpy as np
import pytest

from tensorcumulants.multigraph import (
    CapacityError,
    Multigraph,
    OpenMultigraph,
    component_splits,
    count_assignments,
    decompose,
    disjoint_union,
    double_factorial,
    double_falling,
    enumerate_closed,
    enumerate_open,
    eaut_count,
    falling_factorial,
    load_graph,
    perfect_matchings,
)


def brute_force_isomorphic(a, b):
    """Oracle: exhaustive permutation search over all d! relabelings."""
    if a.d != b.d:
        return False
    for perm in itertools.permutations(range(a.d)):
        if all(
            a.adjacency[perm[i]][perm[j]] == b.adjacency[i][j]
            for i in range(a.d)
            for j in range(a.d)
        ):
            return True
    return False


def random_regular(rng, d, p):
    """A uniformly random labeled p-regular multigraph via half-edge pairing."""
    half_edges = np.repeat(np.arange(d), p)
    rng.shuffle(half_edges)
    edges = half_edges.reshape(-1, 2).tolist()
    return Multigraph.from_edges(p, d, edges)


def permuted(g, perm):
    adj = [[g.adjacency[perm[i]][perm[j]] for j in range(g.d)] for i in range(g.d)]
    return Multigraph(g.p, adj, tuple(g.degrees[perm[i]] for i in range(g.d)))


# -- small arithmetic helpers -------------------------------------------------


def test_falling_factorial():
    assert falling_factorial(5, 2) == 20
    assert falling_factorial(5, 0) == 1
    assert falling_factorial(3, 5) == 0
    assert falling_factorial(7, 7) == math.factorial(7)


def test_double_falling():
    assert double_falling(6, 2) == 24
    assert double_falling(6, 3) == 48
    assert double_falling(4, 2) == 8
    assert double_falling(5, 0) == 1


def test_double_factorial():
    assert [double_factorial(k) for k in (-1, 0, 1, 2, 3, 5, 7)] == [1, 1, 1, 2, 3, 15, 105]


def test_perfect_matchings_count():
    for m in range(5):
        assert sum(1 for _ in perfect_matchings(range(2 * m))) == double_factorial(2 * m - 1)
    assert list(perfect_matchings(range(3))) == []


# -- construction and formats --------------------------------------------------


def test_adjacency_validation():
    with pytest.raises(ValueError):
        Multigraph(2, ((0, 1), (0, 0)))  # not symmetric
    with pytest.raises(ValueError):
        Multigraph(2, ((0, 1), (1, 0)))  # degree 1, expected 2
    with pytest.raises(ValueError):
        Multigraph(2, ((1, 0, 0),))  # not square


def test_loop_degree_convention():
    g = Multigraph(2, ((1,),))
    assert g.num_edges == 1
    assert g.edges() == [(0, 0)]
    g4 = Multigraph(4, ((1, 2), (2, 1)))
    assert g4.num_edges == 4


def test_json_round_trip_closed():
    g = Multigraph.from_edges(3, 2, [[0, 1], [0, 1], [0, 1]])
    again = load_graph(g.to_json())
    assert isinstance(again, Multigraph)
    assert again == g
    assert again.edges() == g.edges()


def test_json_round_trip_open():
    g = OpenMultigraph(3, ((1,),), 0)
    again = load_graph(g.to_json())
    assert isinstance(again, OpenMultigraph)
    assert again == g
    assert again.open_vertex == 0


def test_canonical_string_format():
    g = Multigraph.frobenius_pair(3)
    assert g.canonical_string == "p3d2:0330"
    assert Multigraph.empty(2).canonical_string == "p2d0:"
    o = OpenMultigraph(3, ((1,),), 0)
    assert o.canonical_string == "p3d1o:1"


# -- canonical forms against the brute-force oracle ---------------------------


def test_canonical_key_matches_brute_force_small():
    for d, p in [(2, 2), (3, 2), (4, 2), (2, 3), (2, 4), (4, 3)]:
        if (d * p) % 2:
            continue
        reps = enumerate_closed(d, p)
        for a, b in itertools.combinations(reps, 2):
            assert not brute_force_isomorphic(a, b)
        for g in reps:
            assert g.canonical_adjacency == g.adjacency


def test_canonical_key_invariant_under_relabeling():
    rng = np.random.default_rng(20240817)
    for _ in range(60):
        d = int(rng.integers(1, 7))
        p = int(rng.integers(1, 5))
        if (d * p) % 2:
            p += 1
        g = random_regular(rng, d, p)
        perm = rng.permutation(d)
        assert permuted(g, perm).canonical_key == g.canonical_key


def test_distinct_graphs_get_distinct_keys():
    rng = np.random.default_rng(7)
    for _ in range(40):
        d = int(rng.integers(2, 7))
        p = int(rng.integers(1, 5))
        if (d * p) % 2:
            p += 1
        a = random_regular(rng, d, p)
        b = random_regular(rng, d, p)
        assert (a.canonical_key == b.canonical_key) == brute_force_isomorphic(a, b)


def test_component_guard():
    with pytest.raises(CapacityError):
        # a 9-cycle is one component of 9 vertices
        Multigraph.from_edges(2, 9, [[i, (i + 1) % 9] for i in range(9)]).canonical_key


# -- enumeration ---------------------------------------------------------------


def test_enumerate_closed_class_counts():
    # frozen counts, cross-checked by hand against the matching identity
    assert len(enumerate_closed(0, 3)) == 1
    assert len(enumerate_closed(1, 2)) == 1
    assert len(enumerate_closed(2, 3)) == 2
    assert len(enumerate_closed(3, 2)) == 3
    assert len(enumerate_closed(2, 4)) == 3
    assert len(enumerate_closed(4, 2)) == 5  # cycle-type partitions of 4


def test_enumerate_closed_rejects_odd():
    with pytest.raises(ValueError):
        enumerate_closed(3, 3)
    with pytest.raises(CapacityError):
        enumerate_closed(9, 2)


def test_matching_sum_identity_closed():
    # sum over classes of (labeled matchings realizing the class) = (pd-1)!!
    for d, p in [(2, 2), (3, 2), (4, 2), (2, 3), (4, 3), (2, 5), (6, 2), (2, 7), (1, 8)]:
        reps = enumerate_closed(d, p)
        total = math.factorial(p) ** d * math.factorial(d)
        assert sum(total // g.eaut for g in reps) == double_factorial(p * d - 1)


def test_eaut_formula_matches_matching_count():
    for d, p in [(2, 2), (3, 2), (4, 2), (2, 3), (4, 3), (2, 5), (6, 2)]:
        for g in enumerate_closed(d, p):
            assert eaut_count(g) == g.eaut


def test_eaut_frozen_values():
    assert eaut_count(Multigraph.frobenius_pair(3)) == 12
    assert eaut_count(Multigraph.frobenius_pair(2)) == 4
    assert eaut_count(Multigraph(2, ((1,),))) == 2
    assert eaut_count(Multigraph(4, ((2,),))) == 8
    two_frob = disjoint_union([Multigraph.frobenius_pair(3)] * 2)
    assert eaut_count(two_frob) == 288
    triangle = Multigraph.from_edges(2, 3, [[0, 1], [1, 2], [0, 2]])
    assert eaut_count(triangle) == 6  # all vertex permutations preserve it


def test_enumerate_open_small():
    reps = enumerate_open(1, 3)
    assert len(reps) == 1
    assert reps[0].chop().edges() == [(0, 0)]
    assert eaut_count(reps[0]) == 2
    with pytest.raises(ValueError):
        enumerate_open(2, 3)


def test_matching_sum_identity_open():
    for d, p in [(1, 3), (3, 3), (1, 5), (3, 5), (5, 3), (1, 7)]:
        reps = enumerate_open(d, p)
        total = (
            math.factorial(p) ** (d - 1) * math.factorial(p - 1) * math.factorial(d - 1)
        )
        assert sum(total // g.eaut for g in reps) == double_factorial(p * d - 2)
        for g in reps:
            assert eaut_count(g) == g.eaut


def test_open_graphs_unique_and_canonical():
    reps = enumerate_open(3, 3)
    keys = {g.canonical_key for g in reps}
    assert len(keys) == len(reps)
    for g in reps:
        assert g.chop().degrees.count(g.p - 1) == 1


# -- components ----------------------------------------------------------------


def test_decompose_and_union_round_trip():
    rng = np.random.default_rng(99)
    for _ in range(25):
        d = int(rng.integers(1, 7))
        p = int(rng.integers(1, 5))
        if (d * p) % 2:
            p += 1
        g = random_regular(rng, d, p)
        parts = []
        for entry in decompose(g):
            parts.extend([entry.component] * entry.multiplicity)
        assert disjoint_union(parts, p) == g


def test_decompose_flags():
    frob = Multigraph.frobenius_pair(3)
    loop = Multigraph(2, ((1,),))
    triangle = Multigraph.from_edges(2, 3, [[0, 1], [1, 2], [0, 2]])
    g = disjoint_union([frob, frob, loop, triangle])
    dec = decompose(g)
    assert dec.num_components == 4
    assert dec.frobenius_count == 2
    by_size = {e.size: e for e in dec}
    assert by_size[2].is_frobenius and by_size[2].multiplicity == 2
    assert by_size[1].has_loop
    assert not by_size[3].is_frobenius


def test_component_splits_weights():
    g = disjoint_union([Multigraph.frobenius_pair(2)] * 3)
    splits = list(component_splits(g))
    assert len(splits) == 4  # choose 0..3 copies for the A side
    assert sum(w for _, _, w in splits) == 2 ** 3
    for ga, gb, _ in splits:
        assert ga.d + gb.d == g.d
    assert count_assignments(g, 5) == 125


def test_empty_graph_conventions():
    empty = Multigraph.empty(4)
    assert empty.num_edges == 0
    assert decompose(empty).num_components == 0
    assert eaut_count(empty) == 1
    assert count_assignments(empty, 3) == 1
