"""Free cumulants of symmetric tensors under orthogonal conjugation.

The cumulant attached to a contraction multigraph is the Haar average of the
distinct-label moment of the rotated tensor.  Two routes are implemented and
kept separate so they can check each other:

* Monte Carlo: by symmetry the average collapses onto one fixed injective
  labeling, so each trial needs only a handful of entries of the rotated
  tensor, built from a few columns of the sampled orthogonal matrix.
* Exact: the Haar average expands over same-order graphs with graph-level
  Weingarten coefficients, making the cumulant a fixed linear functional of
  plain graph moments.  Coefficients are exact rationals whenever the
  underlying table is.

Centered cumulants shift each Frobenius component by a center value
(default -1), and 1-open variants return equivariant vectors.  Inner
products of centered cumulants over the Gaussian ensemble and their
normalized Gram matrices come from the same Weingarten data.
"""

from __future__ import annotations

from fractions import Fraction
from math import factorial, sqrt

import numpy as np

from .contraction import (
    _assemble_open,
    _centering_terms,
    _closed_component_blocks,
    _dense_of,
    _normalize_centering,
    _vertex_labels,
    moment,
    open_moment,
)
from .ensembles import sample_haar_batch
from .multigraph import (
    Multigraph,
    OpenMultigraph,
    _component_vertex_sets,
    _subadjacency,
    component_splits,
    decompose,
    disjoint_union,
    double_falling,
    eaut_count,
    enumerate_closed,
    enumerate_open,
    falling_factorial,
    glue_open,
)
from .weingarten import WeingartenTable, graph_weingarten_matrix, weingarten_table
from .wigmoments import exact_wigner_moment

_TABLE_CACHE: dict[tuple[int, int], WeingartenTable] = {}
_FUNCTIONAL_CACHE: dict[tuple, tuple] = {}
_EXPANSION_CACHE: dict[tuple, tuple] = {}


def get_table(ell: int, n: int) -> WeingartenTable:
    found = _TABLE_CACHE.get((ell, n))
    if found is None:
        found = weingarten_table(ell, n)
        _TABLE_CACHE[(ell, n)] = found
    return found


def _closed_expansion(p: int, d: int, n: int):
    """All order-d classes with their graph Weingarten matrix, cached."""
    key = ("closed", p, d, n)
    found = _EXPANSION_CACHE.get(key)
    if found is None:
        table = get_table(p * d, n)
        classes = enumerate_closed(d, p)
        index = {g.canonical_key: i for i, g in enumerate(classes)}
        wg = graph_weingarten_matrix(classes, table)
        found = (table, classes, index, wg)
        _EXPANSION_CACHE[key] = found
    return found


def _open_expansion(p: int, d: int, n: int):
    """Open classes with the Weingarten matrix of their chopped graphs.

    The rotation on the open slot cancels exactly against the rotate-back
    factor, so the Haar average runs over the p*d - 1 closed slots only and
    the expansion uses chopped graphs (open edge deleted, one vertex of
    degree p - 1) at order p*d - 1.
    """
    key = ("open", p, d, n)
    found = _EXPANSION_CACHE.get(key)
    if found is None:
        table = get_table(p * d - 1, n)
        classes = enumerate_open(d, p)
        index = {g.canonical_key: i for i, g in enumerate(classes)}
        wg = graph_weingarten_matrix([g.chop() for g in classes], table)
        found = (table, classes, index, wg)
        _EXPANSION_CACHE[key] = found
    return found


def closed_weight(p: int, d: int) -> int:
    """Number of (assignment, ordering) realizations shared by order-d graphs."""
    return factorial(p) ** d * factorial(d)


def open_weight(p: int, d: int) -> int:
    """Realization weight shared by chopped graphs: one vertex keeps p-1 slots."""
    return factorial(p) ** (d - 1) * factorial(p - 1) * factorial(d - 1)


# -- exact route: cumulants as linear functionals of plain moments ------------


def cumulant_functional(graph: Multigraph, n: int):
    """Pairs (H, coeff) with the cumulant equal to sum coeff * moment(H, T)."""
    key = ("closed", graph.p, graph.canonical_key, n)
    found = _FUNCTIONAL_CACHE.get(key)
    if found is not None:
        return found
    p, d = graph.p, graph.d
    if d == 0:
        result = ((Multigraph.empty(p), Fraction(1)),)
        _FUNCTIONAL_CACHE[key] = result
        return result
    table, classes, index, wg = _closed_expansion(p, d, n)
    row = wg[index[graph.canonical_key]]
    pref = Fraction(
        falling_factorial(n, graph.num_edges) * eaut_count(graph), closed_weight(p, d)
    )
    result = tuple(
        (h, pref * w if table.exact else float(pref) * w)
        for h, w in zip(classes, row)
        if w != 0
    )
    _FUNCTIONAL_CACHE[key] = result
    return result


def open_cumulant_functional(graph: OpenMultigraph, n: int):
    """Pairs (H_open, coeff) expanding the 1-open cumulant over open moments.

    Only the b - 1 closed edges carry injective labels, so the prefactor is
    n falling (b - 1) over the chopped realization weight.
    """
    key = ("open", graph.p, graph.canonical_key, n)
    found = _FUNCTIONAL_CACHE.get(key)
    if found is not None:
        return found
    p, d = graph.p, graph.d
    table, classes, index, wg = _open_expansion(p, d, n)
    row = wg[index[graph.canonical_key]]
    pref = Fraction(
        falling_factorial(n, graph.num_edges - 1) * eaut_count(graph.chop()),
        open_weight(p, d),
    )
    result = tuple(
        (h, pref * w if table.exact else float(pref) * w)
        for h, w in zip(classes, row)
        if w != 0
    )
    _FUNCTIONAL_CACHE[key] = result
    return result


def centered_cumulant_functional(graph: Multigraph, n: int, x=None):
    """Centered cumulant as a functional of plain moments across orders."""
    x = _normalize_centering(graph.p, x)
    b = graph.num_edges
    merged: dict[bytes, list] = {}
    for coeff, removed, kept in _centering_terms(graph, x):
        if coeff == 0.0:
            continue
        factor = coeff * float(falling_factorial(n - b + removed, removed))
        if factor == 0.0:
            continue
        rest = disjoint_union(kept, p=graph.p)
        for h, w in cumulant_functional(rest, n):
            entry = merged.setdefault(h.canonical_key, [h, 0.0])
            entry[1] = entry[1] + factor * float(w)
    return tuple((h, w) for h, w in merged.values() if w != 0.0)


def cumulant_exact(graph: Multigraph, tensor, n: int | None = None) -> float:
    dense = _dense_of(tensor)
    n = dense.shape[0] if n is None else n
    return float(
        sum(float(w) * moment(h, dense) for h, w in cumulant_functional(graph, n))
    )


def centered_cumulant_exact(
    graph: Multigraph, tensor, x=None, n: int | None = None
) -> float:
    dense = _dense_of(tensor)
    n = dense.shape[0] if n is None else n
    return float(
        sum(
            float(w) * moment(h, dense)
            for h, w in centered_cumulant_functional(graph, n, x)
        )
    )


def open_cumulant_exact(graph: OpenMultigraph, tensor, n: int | None = None) -> np.ndarray:
    dense = _dense_of(tensor)
    n = dense.shape[0] if n is None else n
    total = np.zeros(n)
    for h, w in open_cumulant_functional(graph, n):
        total += float(w) * open_moment(h, dense)
    return total


def _open_parts(graph: OpenMultigraph):
    """Chop components split into the open-vertex block and the closed rest."""
    open_block = None
    closed = []
    for sub in _closed_component_blocks(graph.chop()):
        if any(deg == graph.p - 1 for deg in sub.degrees):
            open_block = sub
        else:
            closed.append(sub)
    return open_block, closed


def open_centered_cumulant_functional(graph: OpenMultigraph, n: int, x=None):
    """Centered 1-open cumulant as a functional of plain open moments.

    Centering only touches closed components; the removed-label count runs
    over the b - 1 injectively labeled closed edges.
    """
    x = _normalize_centering(graph.p, x)
    bc = graph.num_edges - 1
    open_block, closed = _open_parts(graph)
    closed_union = (
        disjoint_union(closed, p=graph.p) if closed else Multigraph.empty(graph.p)
    )
    merged: dict[bytes, list] = {}
    for coeff, removed, kept in _centering_terms(closed_union, x):
        if coeff == 0.0:
            continue
        factor = Fraction(coeff) * falling_factorial(n - bc + removed, removed)
        if factor == 0:
            continue
        rebuilt = _assemble_open(graph.p, open_block, kept)
        for h, w in open_cumulant_functional(rebuilt, n):
            entry = merged.setdefault(h.canonical_key, [h, 0])
            entry[1] = entry[1] + factor * w
    return tuple((h, w) for h, w in merged.values() if w != 0)


def open_centered_cumulant_exact(
    graph: OpenMultigraph, tensor, x=None, n: int | None = None
) -> np.ndarray:
    dense = _dense_of(tensor)
    n = dense.shape[0] if n is None else n
    total = np.zeros(n)
    for h, w in open_centered_cumulant_functional(graph, n, x):
        total += float(w) * open_moment(h, dense)
    return total


# -- spike (rank-one) closed form ----------------------------------------------


def spike_cumulant(graph: Multigraph, norm_sq, lam=1, n: int | None = None):
    """Cumulant of lam * v^(tensor p) with |v|^2 = norm_sq, in dimension n.

    Exact when the inputs are exact: the dependence on the graph is only
    through its order and edge count.
    """
    if n is None:
        raise ValueError("pass the ambient dimension n")
    b = graph.num_edges
    d = graph.d
    base = Fraction(falling_factorial(n, b), double_falling(n + 2 * b - 2, b))
    return base * (norm_sq**b) * (lam**d)


def open_spike_cumulant(graph: OpenMultigraph, norm_sq, lam=1, n: int | None = None):
    """1-open cumulant of lam * v^(tensor p): the scalar multiplying v.

    Mirrors the closed spike formula with the open edge dropped from the
    label and pairing counts; exact when the inputs are exact.
    """
    if n is None:
        raise ValueError("pass the ambient dimension n")
    b = graph.num_edges
    base = Fraction(
        falling_factorial(n, b - 1), double_falling(n + 2 * b - 4, b - 1)
    )
    return base * (norm_sq ** (b - 1)) * (lam**graph.d)


# -- Monte Carlo route -----------------------------------------------------------


def _vertex_value_batch(dense: np.ndarray, q_batch: np.ndarray, cols) -> np.ndarray:
    """(Q . T) at one fixed multi-index, for a batch of Q; (B,) array."""
    p = dense.ndim
    args = [dense, list(range(1, p + 1))]
    for t, c in enumerate(cols):
        args.extend([q_batch[:, :, c], [0, t + 1]])
    args.append([0])
    return np.einsum(*args, optimize="greedy")


def _component_products(graph: Multigraph, dense, q_batch, x: dict[bytes, float]):
    """Per-trial product over components of (entry product + center) at the
    fixed labeling that assigns edge e the index e."""
    labels = _vertex_labels(graph)
    total = None
    for vs in _component_vertex_sets(graph.adjacency):
        sub = Multigraph(
            graph.p,
            _subadjacency(graph.adjacency, vs).tolist(),
            tuple(graph.degrees[v] for v in vs),
        )
        shift = x.get(sub.canonical_key, 0.0)
        part = None
        for v in vs:
            vals = _vertex_value_batch(dense, q_batch, labels[v])
            part = vals if part is None else part * vals
        if shift:
            part = part + shift
        total = part if total is None else total * part
    return total


def _mc_scalar(graph, tensor, trials, rng, x, batch):
    dense = _dense_of(tensor)
    n = dense.shape[0]
    if graph.d == 0:
        return 1.0, 0.0
    scale = float(falling_factorial(n, graph.num_edges))
    if scale == 0.0:
        return 0.0, 0.0
    chunks = []
    left = trials
    while left > 0:
        take = min(batch, left)
        q = sample_haar_batch(n, rng, take)
        chunks.append(_component_products(graph, dense, q, x))
        left -= take
    vals = scale * np.concatenate(chunks)
    return float(vals.mean()), float(vals.std(ddof=1) / sqrt(trials))


def cumulant_mc(graph: Multigraph, tensor, trials: int, rng, batch: int = 20000):
    """Haar-average estimate and its standard error.

    By rotational symmetry the distinct-label sum collapses onto any one
    injective labeling, scaled by n falling b; each trial then reads a few
    rotated entries instead of forming the rotated tensor.
    """
    return _mc_scalar(graph, tensor, trials, rng, {}, batch)


def centered_cumulant_mc(
    graph: Multigraph, tensor, trials: int, rng, x=None, batch: int = 20000
):
    return _mc_scalar(graph, tensor, trials, rng, _normalize_centering(graph.p, x), batch)


def _vertex_vector_batch(dense: np.ndarray, q_batch: np.ndarray, cols) -> np.ndarray:
    """(Q . T) at fixed closed slots with one slot left raw; (B, n) array."""
    p = dense.ndim
    args = [dense, list(range(1, p + 1))]
    for t, c in enumerate(cols):
        args.extend([q_batch[:, :, c], [0, t + 1]])
    args.append([0, p])
    return np.einsum(*args, optimize="greedy")


def _mc_open(graph: OpenMultigraph, tensor, trials, rng, x, batch):
    dense = _dense_of(tensor)
    n = dense.shape[0]
    chopped = graph.chop()
    scale = float(falling_factorial(n, chopped.num_edges))
    if scale == 0.0:
        return np.zeros(n), np.zeros(n)
    labels = _vertex_labels(chopped)
    sums = np.zeros(n)
    sq_sums = np.zeros(n)
    left = trials
    while left > 0:
        take = min(batch, left)
        q = sample_haar_batch(n, rng, take)
        scalar = None
        vector = None
        for vs in _component_vertex_sets(chopped.adjacency):
            if graph.open_vertex in vs:
                part = None
                for v in vs:
                    if v == graph.open_vertex:
                        continue
                    vals = _vertex_value_batch(dense, q, labels[v])
                    part = vals if part is None else part * vals
                vec = _vertex_vector_batch(dense, q, labels[graph.open_vertex])
                vector = vec if part is None else part[:, None] * vec
            else:
                sub = Multigraph(
                    graph.p,
                    _subadjacency(chopped.adjacency, vs).tolist(),
                    tuple(chopped.degrees[v] for v in vs),
                )
                part = None
                for v in vs:
                    vals = _vertex_value_batch(dense, q, labels[v])
                    part = vals if part is None else part * vals
                shift = x.get(sub.canonical_key, 0.0)
                if shift:
                    part = part + shift
                scalar = part if scalar is None else scalar * part
        terms = vector if scalar is None else scalar[:, None] * vector
        sums += terms.sum(axis=0)
        sq_sums += (terms**2).sum(axis=0)
        left -= take
    mean = sums / trials
    var = (sq_sums / trials - mean**2) * trials / max(trials - 1, 1)
    return scale * mean, scale * np.sqrt(np.maximum(var, 0.0) / trials)


def open_cumulant_mc(graph: OpenMultigraph, tensor, trials: int, rng, batch: int = 20000):
    """Vector estimate and per-coordinate standard errors.

    The fixed-labeling collapse runs over the closed edges only, scaled by
    n falling (b - 1); the rotation on the open slot cancels against the
    rotate-back factor, so that tensor axis is left raw.
    """
    return _mc_open(graph, tensor, trials, rng, {}, batch)


def open_centered_cumulant_mc(
    graph: OpenMultigraph, tensor, trials: int, rng, x=None, batch: int = 20000
):
    return _mc_open(graph, tensor, trials, rng, _normalize_centering(graph.p, x), batch)


# -- second moments and Grams ----------------------------------------------------


def _wg_entry_closed(g: Multigraph, h: Multigraph, n: int):
    table, _, index, wg = _closed_expansion(g.p, g.d, n)
    return table, wg[index[g.canonical_key]][index[h.canonical_key]]


def cumulant_inner(g: Multigraph, h: Multigraph, n: int):
    """Gaussian-ensemble expectation of the product of two centered cumulants.

    Graphs of different orders are orthogonal; within an order the value is
    (n falling b)^2 eaut(G) eaut(H) Wg_{G,H} / (p!^d d!).
    """
    if g.p != h.p:
        raise ValueError("mixed p")
    if g.d != h.d:
        return Fraction(0)
    if g.d == 0:
        return Fraction(1)
    table, wg = _wg_entry_closed(g, h, n)
    nb = falling_factorial(n, g.num_edges)
    pref = Fraction(nb * nb * eaut_count(g) * eaut_count(h), closed_weight(g.p, g.d))
    return pref * wg if table.exact else float(pref) * wg


_WIGNER_CACHE: dict[tuple, object] = {}

# Glued pairs carry b_g + b_h - 1 edges, one past the default coloring guard
# already at p = 3, d = 3 (9 edges; Bell(9) = 21147 partitions, still quick).
_GLUE_COLORING_EDGES = 9


def _wigner_moment_cached(graph: Multigraph, n: int):
    key = (graph.p, graph.canonical_key, n)
    found = _WIGNER_CACHE.get(key)
    if found is None:
        found = exact_wigner_moment(graph, n, max_edges=_GLUE_COLORING_EDGES)
        _WIGNER_CACHE[key] = found
    return found


def open_gaussian_inner(g: OpenMultigraph, h: OpenMultigraph, n: int):
    """Exact E <kcc_G(W), kcc_H(W)> under the Gaussian ensemble, any degrees.

    Entry for entry, the product of two open moments is the plain moment of
    the graph gluing their open edges into one shared edge, so the
    expectation reduces to exact Wigner moments of glued expansion graphs.
    This is the finite-n truth; ``open_cumulant_inner`` is the Weingarten
    product formula, which matches it only to leading order (and couples
    degrees through loop-bearing classes at finite n).
    """
    if g.p != h.p:
        raise ValueError("mixed p")
    total = Fraction(0)
    for gk, wk in open_centered_cumulant_functional(g, n):
        for hl, wl in open_centered_cumulant_functional(h, n):
            total += wk * wl * _wigner_moment_cached(glue_open(gk, hl), n)
    return total


def _wg_entry_open(g: OpenMultigraph, h: OpenMultigraph, n: int):
    table, _, index, wg = _open_expansion(g.p, g.d, n)
    return table, wg[index[g.canonical_key]][index[h.canonical_key]]


def open_cumulant_inner(g: OpenMultigraph, h: OpenMultigraph, n: int):
    """Weingarten product form of the second moment of 1-open cumulants.

    Mirrors the closed ``cumulant_inner`` with chopped-graph quantities:
    graphs of different orders give zero; within an order the value is
    n^(b-1 falling) n^(b falling) eaut(chop G) eaut(chop H) Wg / weight.
    """
    if g.p != h.p:
        raise ValueError("mixed p")
    if g.d != h.d:
        return Fraction(0)
    table, wg = _wg_entry_open(g, h, n)
    b = g.num_edges
    pref = Fraction(
        falling_factorial(n, b - 1)
        * falling_factorial(n, b)
        * eaut_count(g.chop())
        * eaut_count(h.chop()),
        open_weight(g.p, g.d),
    )
    return pref * wg if table.exact else float(pref) * wg


def cumulant_inner_matrix(graphs: list[Multigraph], n: int) -> list[list]:
    """All pairwise Gaussian second moments of centered cumulants, one order."""
    return [[cumulant_inner(g, h, n) for h in graphs] for g in graphs]


def normalized_gram(graphs: list[Multigraph], n: int) -> np.ndarray:
    """Gaussian Gram matrix of rescaled centered cumulants, all of one order:
    entries n^b sqrt(eaut(G) eaut(H)) Wg_{G,H} / (p!^d d!)."""
    if not graphs:
        return np.zeros((0, 0))
    d, p = graphs[0].d, graphs[0].p
    if d == 0:
        return np.ones((len(graphs), len(graphs)))
    _, _, index, wg = _closed_expansion(p, d, n)
    rows = [index[g.canonical_key] for g in graphs]
    eauts = [eaut_count(g) for g in graphs]
    weight = closed_weight(p, d)
    b = graphs[0].num_edges
    out = np.empty((len(graphs), len(graphs)))
    for i, gi in enumerate(rows):
        for j, gj in enumerate(rows):
            out[i, j] = (
                float(n) ** b * sqrt(eauts[i] * eauts[j]) / weight * float(wg[gi][gj])
            )
    return out


def open_cumulant_inner_matrix(graphs: list[OpenMultigraph], n: int) -> list[list]:
    """All pairwise Gaussian second moments of 1-open centered cumulants."""
    return [[open_cumulant_inner(g, h, n) for h in graphs] for g in graphs]


def normalized_open_gram(graphs: list[OpenMultigraph], n: int) -> np.ndarray:
    """Gram matrix of rescaled 1-open centered cumulants, all of one order:
    entries n^b/(n-b+1) sqrt(eaut(chop G) eaut(chop H)) Wg_chop / weight."""
    if not graphs:
        return np.zeros((0, 0))
    d, p = graphs[0].d, graphs[0].p
    _, _, index, wg = _open_expansion(p, d, n)
    rows = [index[g.canonical_key] for g in graphs]
    eauts = [eaut_count(g.chop()) for g in graphs]
    weight = open_weight(p, d)
    b = graphs[0].num_edges
    scale = float(n) ** b / (n - b + 1)
    out = np.empty((len(graphs), len(graphs)))
    for i, gi in enumerate(rows):
        for j, gj in enumerate(rows):
            out[i, j] = scale * sqrt(eauts[i] * eauts[j]) / weight * float(wg[gi][gj])
    return out


def cumulant_normalizer(graph: Multigraph, n: int) -> float:
    """Scale giving the centered cumulant leading-order unit Gaussian norm.

    With this scale the Gaussian Gram matrix is exactly ``normalized_gram``.
    """
    b = graph.num_edges
    return float(n) ** (b / 2) / (float(falling_factorial(n, b)) * sqrt(eaut_count(graph)))


def open_cumulant_normalizer(graph: OpenMultigraph, n: int) -> float:
    b = graph.num_edges
    return float(n) ** (b / 2) / (
        float(falling_factorial(n, b)) * sqrt(eaut_count(graph.chop()))
    )


# -- additivity ------------------------------------------------------------------


def additivity_reference(graph: Multigraph, a, b_tensor, n: int) -> float:
    """Exact Haar-averaged cumulant of A + Q.B via the component-split sum."""
    total = 0.0
    nb = falling_factorial(n, graph.num_edges)
    for ga, gb, ways in component_splits(graph):
        pref = Fraction(
            nb, falling_factorial(n, ga.num_edges) * falling_factorial(n, gb.num_edges)
        )
        total += (
            ways
            * float(pref)
            * cumulant_exact(ga, a, n=n)
            * cumulant_exact(gb, b_tensor, n=n)
        )
    return total


def shifted_cumulant_mc(graph: Multigraph, a, b_tensor, trials: int, rng, batch: int = 20000):
    """MC estimate of the cumulant of A + Q.B averaged over both rotations.

    Rotating A and B by independent Haar factors gives the same law as
    rotating the sum A + Q.B by one of them, so the fixed-labeling collapse
    applies verbatim.
    """
    dense_a = _dense_of(a)
    dense_b = _dense_of(b_tensor)
    n = dense_a.shape[0]
    if graph.d == 0:
        return 1.0, 0.0
    scale = float(falling_factorial(n, graph.num_edges))
    if scale == 0.0:
        return 0.0, 0.0
    labels = _vertex_labels(graph)
    chunks = []
    left = trials
    while left > 0:
        take = min(batch, left)
        qa = sample_haar_batch(n, rng, take)
        qb = sample_haar_batch(n, rng, take)
        prod = None
        for v in range(graph.d):
            vals = _vertex_value_batch(dense_a, qa, labels[v]) + _vertex_value_batch(
                dense_b, qb, labels[v]
            )
            prod = vals if prod is None else prod * vals
        chunks.append(prod)
        left -= take
    vals = scale * np.concatenate(chunks)
    return float(vals.mean()), float(vals.std(ddof=1) / sqrt(trials))


def verify_additivity(graph: Multigraph, a, b_tensor, trials: int, rng) -> dict:
    """Compare the MC shifted cumulant against the exact split-sum reference."""
    dense_a = _dense_of(a)
    n = dense_a.shape[0]
    mc, se = shifted_cumulant_mc(graph, a, b_tensor, trials, rng)
    exact = additivity_reference(graph, a, b_tensor, n)
    z = abs(mc - exact) / se if se > 0 else 0.0
    return {
        "mc": mc,
        "se": se,
        "exact": exact,
        "z": z,
        "connected": decompose(graph).num_components == 1,
    }
