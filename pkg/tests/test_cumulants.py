import numpy as np
import pytest
from fractions import Fraction

from tensorcumulants.contraction import distinct_moment
from tensorcumulants.cumulants import (
    additivity_reference,
    centered_cumulant_exact,
    centered_cumulant_mc,
    cumulant_exact,
    cumulant_functional,
    cumulant_inner,
    cumulant_mc,
    cumulant_normalizer,
    normalized_gram,
    normalized_open_gram,
    open_cumulant_exact,
    open_cumulant_inner,
    open_cumulant_mc,
    open_cumulant_normalizer,
    open_centered_cumulant_exact,
    open_centered_cumulant_mc,
    open_gaussian_inner,
    open_spike_cumulant,
    spike_cumulant,
    verify_additivity,
)
from tensorcumulants.ensembles import (
    SeededRng,
    conjugate_dense,
    rank_one,
    sample_haar,
    sample_wigner,
)
from tensorcumulants.multigraph import (
    CapacityError,
    Multigraph,
    OpenMultigraph,
    disjoint_union,
    enumerate_closed,
    enumerate_open,
    falling_factorial,
    glue_open,
)

SEEDS = SeededRng(20260817)


def frob(p: int) -> Multigraph:
    return Multigraph.frobenius_pair(p)


def loop_graph() -> Multigraph:
    return Multigraph(2, [[1]])


def open_mixed() -> OpenMultigraph:
    # one open vertex carrying a loop, plus a closed three-edge pair
    return OpenMultigraph(3, [[1, 0, 0], [0, 0, 3], [0, 3, 0]], 0)


def wigner_dense(p, n, rng):
    return sample_wigner(p, n, rng).dense()


def test_empty_graph_conventions():
    empty = Multigraph.empty(2)
    t = wigner_dense(2, 4, SEEDS.generator("empty"))
    assert cumulant_exact(empty, t) == 1.0
    assert cumulant_mc(empty, t, 10, SEEDS.generator("empty-mc")) == (1.0, 0.0)
    assert cumulant_inner(empty, empty, 7) == 1


def test_single_loop_cumulant_is_trace():
    # the order-1 contraction is rotation invariant, so the Haar average
    # keeps the trace exactly
    t = wigner_dense(2, 5, SEEDS.generator("loop"))
    assert cumulant_exact(loop_graph(), t) == pytest.approx(np.trace(t), rel=1e-12)


def direct_closed_estimate(graph, dense, trials, rng):
    """Definition-level estimator: distinct moment of the rotated tensor."""
    vals = np.empty(trials)
    for i in range(trials):
        q = sample_haar(dense.shape[0], rng)
        vals[i] = distinct_moment(graph, conjugate_dense(q, dense))
    return vals.mean(), vals.std(ddof=1) / np.sqrt(trials)


def test_exact_matches_direct_definition_mc():
    t = wigner_dense(2, 5, SEEDS.generator("direct"))
    mean, se = direct_closed_estimate(frob(2), t, 4000, SEEDS.generator("direct-q"))
    exact = cumulant_exact(frob(2), t)
    assert abs(mean - exact) <= 5 * se


def test_fixed_labeling_estimator_matches_direct_estimator():
    t = wigner_dense(2, 5, SEEDS.generator("collapse"))
    d_mean, d_se = direct_closed_estimate(frob(2), t, 4000, SEEDS.generator("collapse-q"))
    m_mean, m_se = cumulant_mc(frob(2), t, 40000, SEEDS.generator("collapse-mc"))
    assert abs(d_mean - m_mean) <= 5 * np.hypot(d_se, m_se)


@pytest.mark.parametrize("p,n", [(2, 6), (3, 7)])
def test_exact_matches_mc_all_order2_classes(p, n):
    t = wigner_dense(p, n, SEEDS.generator("order2", p))
    for graph in enumerate_closed(2, p):
        mean, se = cumulant_mc(graph, t, 40000, SEEDS.generator("order2-mc", p, graph.canonical_string))
        exact = cumulant_exact(graph, t)
        assert abs(mean - exact) <= 5 * se, graph.canonical_string


@pytest.mark.parametrize("d,p", [(1, 2), (2, 2), (3, 2), (2, 3)])
def test_spike_closed_form_matches_expansion(d, p):
    n = 9
    v = np.linspace(-1.0, 1.5, n)
    t = rank_one(v, p).dense()
    norm_sq = float(v @ v)
    for graph in enumerate_closed(d, p):
        expanded = cumulant_exact(graph, t)
        closed_form = float(spike_cumulant(graph, norm_sq, 1.0, n=n))
        assert expanded == pytest.approx(closed_form, rel=1e-9), graph.canonical_string


def test_spike_value_is_exact_fraction():
    value = spike_cumulant(frob(2), Fraction(3), lam=Fraction(1, 2), n=4)
    assert value == Fraction(9, 8)


def test_centered_exact_structure():
    n = 7
    t = wigner_dense(2, n, SEEDS.generator("centered-structure"))
    plain = cumulant_exact(frob(2), t)
    centered = centered_cumulant_exact(frob(2), t)
    assert centered == pytest.approx(plain - falling_factorial(n, 2), rel=1e-9)
    assert centered_cumulant_exact(frob(2), t, x={}) == pytest.approx(plain, rel=1e-12)


@pytest.mark.parametrize("p,n", [(2, 6), (3, 7)])
def test_centered_exact_matches_mc(p, n):
    t = wigner_dense(p, n, SEEDS.generator("centered-mc", p))
    mean, se = centered_cumulant_mc(frob(p), t, 40000, SEEDS.generator("centered-mc-q", p))
    exact = centered_cumulant_exact(frob(p), t)
    assert abs(mean - exact) <= 5 * se


@pytest.mark.parametrize("p", [2, 3])
def test_centered_gaussian_mean_zero(p):
    n = 6
    rng = SEEDS.generator("null", p)
    draws = 2500
    for graph in enumerate_closed(2, p):
        vals = np.empty(draws)
        for i in range(draws):
            vals[i] = centered_cumulant_exact(graph, wigner_dense(p, n, rng))
        se = vals.std(ddof=1) / np.sqrt(draws)
        assert abs(vals.mean()) <= 5 * se, graph.canonical_string


def test_second_moments_match_inner():
    n = 8
    g1, g2 = enumerate_closed(2, 2)
    rng = SEEDS.generator("inner")
    draws = 4000
    vals = np.empty((draws, 2))
    for i in range(draws):
        w = wigner_dense(2, n, rng)
        vals[i] = [centered_cumulant_exact(g1, w), centered_cumulant_exact(g2, w)]
    for a, b in [(0, 0), (0, 1), (1, 1)]:
        prod = vals[:, a] * vals[:, b]
        se = prod.std(ddof=1) / np.sqrt(draws)
        want = float(cumulant_inner([g1, g2][a], [g1, g2][b], n))
        assert abs(prod.mean() - want) <= 5 * se, (a, b)


def test_cross_order_inner_is_zero():
    assert cumulant_inner(loop_graph(), frob(2), 9) == 0
    n = 9
    rng = SEEDS.generator("cross-order")
    draws = 3000
    prods = np.empty(draws)
    for i in range(draws):
        w = wigner_dense(2, n, rng)
        prods[i] = centered_cumulant_exact(loop_graph(), w) * centered_cumulant_exact(
            frob(2), w
        )
    se = prods.std(ddof=1) / np.sqrt(draws)
    assert abs(prods.mean()) <= 5 * se


def test_gram_matches_inner_normalization():
    n = 12
    graphs = enumerate_closed(2, 3)
    gram = normalized_gram(graphs, n)
    for i, g in enumerate(graphs):
        for j, h in enumerate(graphs):
            want = (
                float(cumulant_inner(g, h, n))
                * cumulant_normalizer(g, n)
                * cumulant_normalizer(h, n)
            )
            assert gram[i, j] == pytest.approx(want, rel=1e-9)
    open_graphs = enumerate_open(3, 3)
    open_gram = normalized_open_gram(open_graphs, n)
    for i, g in enumerate(open_graphs):
        for j, h in enumerate(open_graphs):
            want = (
                float(open_cumulant_inner(g, h, n))
                * open_cumulant_normalizer(g, n)
                * open_cumulant_normalizer(h, n)
            )
            assert open_gram[i, j] == pytest.approx(want, rel=1e-9)


def test_gram_eigenvalues_in_certified_window():
    closed = normalized_gram(enumerate_closed(2, 3), 200)
    eigs = np.linalg.eigvalsh(closed)
    assert eigs.min() >= 0.5 and eigs.max() <= 2.0
    opened = normalized_open_gram(enumerate_open(3, 3), 200)
    open_eigs = np.linalg.eigvalsh(opened)
    assert open_eigs.min() >= 0.5 and open_eigs.max() <= 2.0


def test_open_order1_is_plain_contraction():
    # single vertex with a loop and the open edge: the rotation on the open
    # slot cancels the rotate-back factor and the lone closed label is free,
    # so the Haar average keeps the plain open contraction exactly
    n = 6
    graph = enumerate_open(1, 3)[0]
    t = wigner_dense(3, n, SEEDS.generator("open-closed-form"))
    from tensorcumulants.contraction import open_moment

    want = open_moment(graph, t)
    got = open_cumulant_exact(graph, t)
    assert np.allclose(got, want, rtol=1e-12)


def test_open_order1_inner_values():
    # hand values from entry variances: sum_i var(W_iii) + (n-1) var(W_ijj)
    # gives the Gaussian second moment 2n(n+2); the Weingarten product form
    # books the open label as distinct and lands at 2n(n-1) instead
    graph = enumerate_open(1, 3)[0]
    for n in (6, 11):
        assert open_gaussian_inner(graph, graph, n) == 2 * n * (n + 2)
        assert open_cumulant_inner(graph, graph, n) == 2 * n * (n - 1)
    n = 2000
    ratio = open_cumulant_inner(graph, graph, n) / open_gaussian_inner(graph, graph, n)
    assert abs(ratio - 1) == Fraction(3, n + 2)


def test_open_inner_matches_wigner_mc():
    n = 6
    graph = enumerate_open(1, 3)[0]
    rng = SEEDS.generator("open-inner")
    draws = 4000
    vals = np.empty(draws)
    for i in range(draws):
        vec = open_cumulant_exact(graph, wigner_dense(3, n, rng))
        vals[i] = vec @ vec
    se = vals.std(ddof=1) / np.sqrt(draws)
    want = float(open_gaussian_inner(graph, graph, n))
    assert abs(vals.mean() - want) <= 5 * se


def test_open_gaussian_inner_matches_mc_order3():
    n = 7
    g0, g1 = enumerate_open(3, 3)[:2]
    rng = SEEDS.generator("open-inner-3")
    draws = 2500
    vals = np.empty((draws, 2))
    for i in range(draws):
        w = wigner_dense(3, n, rng)
        k0 = open_centered_cumulant_exact(g0, w, n=n)
        k1 = open_centered_cumulant_exact(g1, w, n=n)
        vals[i] = [k0 @ k1, k0 @ k0]
    for col, (a, b) in enumerate(((g0, g1), (g0, g0))):
        se = vals[:, col].std(ddof=1) / np.sqrt(draws)
        want = float(open_gaussian_inner(a, b, n))
        assert abs(vals[:, col].mean() - want) <= 5 * se


def test_open_exact_matches_mc():
    cases = [
        (enumerate_open(1, 3)[0], 6, 40000),
        (open_mixed(), 7, 60000),
    ]
    for graph, n, trials in cases:
        t = wigner_dense(3, n, SEEDS.generator("open", n))
        mean, se = open_cumulant_mc(graph, t, trials, SEEDS.generator("open-mc", n))
        exact = open_cumulant_exact(graph, t)
        z = np.abs(mean - exact) / np.where(se > 0, se, 1.0)
        assert z.max() <= 5, (graph.canonical_string, z.max())


def _free_open_moment(dense: np.ndarray) -> np.ndarray:
    """Definition-level open moment of ``open_mixed``: closed labels run over
    injective tuples, the open coordinate stays free."""
    n = dense.shape[0]
    out = np.zeros(n)
    loop = np.einsum("ijj->ij", dense)
    pair = dense**2
    for j in range(n):
        for a in range(n):
            if a == j:
                continue
            for b in range(n):
                if b in (j, a):
                    continue
                for c in range(n):
                    if c in (j, a, b):
                        continue
                    out += loop[:, j] * pair[a, b, c]
    return out


def test_open_reduced_estimator_matches_direct():
    graph = open_mixed()
    n = 5
    t = wigner_dense(3, n, SEEDS.generator("open-direct"))
    rng = SEEDS.generator("open-direct-q")
    trials = 3000
    vecs = np.empty((trials, n))
    for i in range(trials):
        q = sample_haar(n, rng)
        # rotate the open moment of the rotated tensor back to the original frame
        vecs[i] = q @ _free_open_moment(conjugate_dense(q, t))
    d_mean = vecs.mean(axis=0)
    d_se = vecs.std(axis=0, ddof=1) / np.sqrt(trials)
    m_mean, m_se = open_cumulant_mc(graph, t, 30000, SEEDS.generator("open-direct-mc"))
    z = np.abs(d_mean - m_mean) / np.hypot(d_se, m_se)
    assert z.max() <= 5
    exact = open_cumulant_exact(graph, t)
    z_exact = np.abs(d_mean - exact) / np.where(d_se > 0, d_se, 1.0)
    assert z_exact.max() <= 5


def test_open_exact_equivariance():
    n = 6
    graph = enumerate_open(1, 3)[0]
    t = wigner_dense(3, n, SEEDS.generator("equivariance"))
    q = sample_haar(n, SEEDS.generator("equivariance-q"))
    left = open_cumulant_exact(graph, conjugate_dense(q, t))
    right = q.T @ open_cumulant_exact(graph, t)
    assert np.allclose(left, right, rtol=1e-9, atol=1e-12)


def test_open_centered_exact_matches_mc():
    graph = open_mixed()
    n = 7
    t = wigner_dense(3, n, SEEDS.generator("open-centered"))
    mean, se = open_centered_cumulant_mc(graph, t, 60000, SEEDS.generator("open-centered-q"))
    exact = open_centered_cumulant_exact(graph, t)
    z = np.abs(mean - exact) / np.where(se > 0, se, 1.0)
    assert z.max() <= 5
    plain = open_cumulant_exact(graph, t)
    uncentered = open_centered_cumulant_exact(graph, t, x={})
    assert np.allclose(uncentered, plain, rtol=1e-10)


def test_open_cross_order_inner():
    # the product form treats orders as orthogonal; the exact Gaussian
    # expectation does not vanish at finite n (loop-bearing order-3 classes
    # retain an order-1 component)
    one = enumerate_open(1, 3)[0]
    three = enumerate_open(3, 3)[0]
    assert open_cumulant_inner(one, three, 9) == 0
    assert open_gaussian_inner(one, three, 7) == 1680


def test_open_spike_closed_form():
    n = 8
    v = np.linspace(-1.2, 0.9, n)
    t = rank_one(v, 3).dense()
    norm_sq = float(v @ v)
    for graph in enumerate_open(1, 3) + enumerate_open(3, 3):
        got = open_cumulant_exact(graph, t)
        scalar = float(open_spike_cumulant(graph, norm_sq, 1.0, n=n))
        assert np.allclose(got, scalar * v, rtol=1e-9), graph.canonical_string


def test_glued_moment_is_pointwise_inner():
    from tensorcumulants.contraction import moment, open_moment

    n = 6
    t = wigner_dense(3, n, SEEDS.generator("glue"))
    k, l = enumerate_open(3, 3)[1], enumerate_open(3, 3)[2]
    fused = glue_open(k, l)
    want = float(open_moment(k, t) @ open_moment(l, t))
    assert moment(fused, t) == pytest.approx(want, rel=1e-12)


def test_additivity_connected():
    n = 6
    a = wigner_dense(2, n, SEEDS.generator("add-a"))
    b = wigner_dense(2, n, SEEDS.generator("add-b"))
    ref = additivity_reference(frob(2), a, b, n)
    split_free = cumulant_exact(frob(2), a) + cumulant_exact(frob(2), b)
    assert ref == pytest.approx(split_free, rel=1e-9)
    report = verify_additivity(frob(2), a, b, 40000, SEEDS.generator("add-q"))
    assert report["connected"]
    assert report["z"] <= 5


def test_additivity_disconnected():
    n = 6
    graph = disjoint_union([frob(2), frob(2)])
    a = wigner_dense(2, n, SEEDS.generator("add2-a"))
    b = wigner_dense(2, n, SEEDS.generator("add2-b"))
    report = verify_additivity(graph, a, b, 60000, SEEDS.generator("add2-q"))
    assert not report["connected"]
    assert report["z"] <= 5


def test_order_capacity_guard():
    graph = disjoint_union([frob(2)] * 3 + [loop_graph()])
    with pytest.raises(CapacityError):
        cumulant_functional(graph, 20)


def test_functional_is_cached():
    first = cumulant_functional(frob(2), 9)
    assert cumulant_functional(frob(2), 9) is first
