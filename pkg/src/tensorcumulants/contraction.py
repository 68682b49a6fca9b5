"""Graph contractions of symmetric tensors.

A multigraph with p-regular vertices prescribes a contraction: one summation
index per edge, one tensor factor per vertex.  Variants: the plain moment
(free index sum), the distinct moment (injective labelings only), centered
moments (Frobenius-pair factors shifted by a per-component center), and
1-open versions returning a vector indexed by the dangling edge's label.

Plain moments are einsum contractions with greedy path selection, evaluated
per connected component.  Distinct moments come in two routes kept
deliberately separate so they can check each other: a direct enumeration of
injective labelings (scalar path), and an inclusion-exclusion over the edge
partition lattice reduced to plain einsum contractions (batch path).
"""

from __future__ import annotations

import itertools
from math import comb, factorial
from typing import Iterable

import numpy as np

from .ensembles import SymmetricTensor
from .multigraph import (
    CapacityError,
    Multigraph,
    OpenMultigraph,
    decompose,
    disjoint_union,
    falling_factorial,
    set_partitions,
    _component_vertex_sets,
    _subadjacency,
)

MAX_INJECTIVE_WORK = 50_000_000
MAX_PARTITION_EDGES = 8

_PATH_CACHE: dict[tuple, list] = {}


def _dense_of(tensor) -> np.ndarray:
    if isinstance(tensor, SymmetricTensor):
        return tensor.dense()
    return np.asarray(tensor, dtype=np.float64)


def _vertex_labels(graph: Multigraph) -> list[list[int]]:
    """Per-vertex einsum labels, one label per edge; loops contribute twice."""
    labels: list[list[int]] = [[] for _ in range(graph.d)]
    for eid, (u, v) in enumerate(graph.edges()):
        labels[u].append(eid)
        labels[v].append(eid)
    return labels


def _einsum_groups(vertex_labels: list[list[int]]) -> list[list[int]]:
    """Group vertices that share a summation label (must be one einsum call)."""
    d = len(vertex_labels)
    parent = list(range(d))

    def find(x):
        while parent[x] != x:
            parent[x] = parent[parent[x]]
            x = parent[x]
        return x

    owner: dict[int, int] = {}
    for v, labs in enumerate(vertex_labels):
        for lab in labs:
            if lab in owner:
                parent[find(v)] = find(owner[lab])
            else:
                owner[lab] = v
    groups: dict[int, list[int]] = {}
    for v in range(d):
        groups.setdefault(find(v), []).append(v)
    return list(groups.values())


def _contract(operand_labels: list[list[int]], dense: np.ndarray, out: list[int]):
    """einsum of copies of one dense tensor; labels >= 1, batch label 0 if present."""
    args = []
    for labs in operand_labels:
        args.extend([dense, labs])
    args.append(out)
    key = (
        tuple(tuple(l) for l in operand_labels),
        tuple(out),
        dense.shape,
    )
    path = _PATH_CACHE.get(key)
    if path is None:
        path = np.einsum_path(*args, optimize="greedy")[0]
        _PATH_CACHE[key] = path
    return np.einsum(*args, optimize=path)


def _grouped_value(vertex_labels: list[list[int]], dense: np.ndarray, batch: bool):
    """Product over sharing-groups of einsum values; scalar or (B,) array."""
    if not vertex_labels:
        return np.ones(dense.shape[0]) if batch else 1.0
    total = None
    for group in _einsum_groups(vertex_labels):
        if batch:
            ops = [[0] + [l + 1 for l in vertex_labels[v]] for v in group]
            value = _contract(ops, dense, [0])
        else:
            ops = [[l + 1 for l in vertex_labels[v]] for v in group]
            value = _contract(ops, dense, [])
        total = value if total is None else total * value
    return total


def moment(graph: Multigraph, tensor) -> float:
    """Sum over all edge labelings of the product of vertex entries."""
    dense = _dense_of(tensor)
    if graph.d == 0:
        return 1.0
    return float(_grouped_value(_vertex_labels(graph), dense, batch=False))


def moment_batch(graph: Multigraph, dense_batch: np.ndarray) -> np.ndarray:
    dense_batch = np.asarray(dense_batch, dtype=np.float64)
    if graph.d == 0:
        return np.ones(dense_batch.shape[0])
    return _grouped_value(_vertex_labels(graph), dense_batch, batch=True)


def mixed_moment(graph: Multigraph, tensors: Iterable) -> float:
    """Contraction with one tensor per vertex, arity matching the degree.

    Vertex slots are filled in the order edges appear in graph.edges(); for
    symmetric tensors the order is immaterial.
    """
    denses = [_dense_of(t) for t in tensors]
    if len(denses) != graph.d:
        raise ValueError("need one tensor per vertex")
    labels = _vertex_labels(graph)
    for v, dense in enumerate(denses):
        if dense.ndim != graph.degrees[v]:
            raise ValueError(f"vertex {v} has degree {graph.degrees[v]}, tensor arity {dense.ndim}")
    if graph.d == 0:
        return 1.0
    args = []
    for v, dense in enumerate(denses):
        args.extend([dense, labels[v]])
    args.append([])
    return float(np.einsum(*args, optimize="greedy"))


def open_moment(graph: OpenMultigraph, tensor) -> np.ndarray:
    """Vector of sums over closed-edge labelings, indexed by the open label."""
    dense = _dense_of(tensor)
    chopped = graph.chop()
    labels = _vertex_labels(chopped)
    open_label = chopped.num_edges
    labels[graph.open_vertex].append(open_label)
    args = []
    for v in range(graph.d):
        args.extend([dense, [l + 1 for l in labels[v]]])
    args.append([open_label + 1])
    return np.einsum(*args, optimize="greedy")


# -- distinct (injective) moments ---------------------------------------------


_TUPLE_CACHE: dict[tuple[int, int], np.ndarray] = {}


def _injective_tuples(n: int, b: int) -> np.ndarray:
    cached = _TUPLE_CACHE.get((n, b))
    if cached is not None:
        return cached
    count = falling_factorial(n, b)
    if count * max(b, 1) > MAX_INJECTIVE_WORK:
        raise CapacityError(f"{count} injective labelings is beyond the direct path")
    out = np.fromiter(
        itertools.chain.from_iterable(itertools.permutations(range(n), b)),
        dtype=np.int64,
        count=count * b,
    ).reshape(count, b)
    if out.nbytes <= 64_000_000:
        _TUPLE_CACHE[(n, b)] = out
    return out


def _gathered_products(dense, labels_per_vertex, tuples, n):
    p_strides = {}
    prod = None
    flat = dense.reshape(-1)
    for labs in labels_per_vertex:
        arity = len(labs)
        strides = p_strides.get(arity)
        if strides is None:
            strides = n ** np.arange(arity - 1, -1, -1, dtype=np.int64)
            p_strides[arity] = strides
        idx = tuples[:, labs] @ strides
        vals = flat[idx]
        prod = vals if prod is None else prod * vals
    return prod


def distinct_moment(graph: Multigraph, tensor) -> float:
    """Injective-labeling moment by direct enumeration; zero when n < b."""
    dense = _dense_of(tensor)
    n = dense.shape[0]
    b = graph.num_edges
    if b == 0:
        return 1.0
    if n < b:
        return 0.0
    tuples = _injective_tuples(n, b)
    products = _gathered_products(dense, _vertex_labels(graph), tuples, n)
    return float(products.sum())


def open_distinct_moment(graph: OpenMultigraph, tensor) -> np.ndarray:
    """Injective-labeling open moment; coordinate i fixes the open label to i."""
    dense = _dense_of(tensor)
    n = dense.shape[0]
    b = graph.num_edges
    if n < b:
        return np.zeros(n)
    chopped = graph.chop()
    labels = _vertex_labels(chopped)
    open_label = chopped.num_edges
    labels[graph.open_vertex].append(open_label)
    tuples = _injective_tuples(n, b)
    products = _gathered_products(dense, labels, tuples, n)
    return np.bincount(tuples[:, open_label], weights=products, minlength=n)


def _partition_terms(graph: Multigraph):
    """(weight, quotient vertex labels) per edge partition: inclusion-exclusion
    turning the injective sum into plain contractions."""
    b = graph.num_edges
    if b > MAX_PARTITION_EDGES:
        raise CapacityError(f"partition lattice for b={b} edges exceeds {MAX_PARTITION_EDGES}")
    base = _vertex_labels(graph)
    terms = []
    for block_ids in set_partitions(b):
        sizes: dict[int, int] = {}
        for blk in block_ids:
            sizes[blk] = sizes.get(blk, 0) + 1
        weight = 1
        for size in sizes.values():
            weight *= (-1) ** (size - 1) * factorial(size - 1)
        labels = [[block_ids[l] for l in labs] for labs in base]
        terms.append((weight, labels))
    return terms


def distinct_moment_batch(graph: Multigraph, dense_batch: np.ndarray) -> np.ndarray:
    """Injective-labeling moments for a batch of dense tensors.

    Moebius inversion over the partition lattice of the edge set: the sum of
    quotient contractions weighted by prod (-1)^(|B|-1) (|B|-1)! equals the
    all-distinct sum.  Checked against distinct_moment.
    """
    dense_batch = np.asarray(dense_batch, dtype=np.float64)
    B = dense_batch.shape[0]
    n = dense_batch.shape[1] if dense_batch.ndim > 1 else 0
    b = graph.num_edges
    if b == 0:
        return np.ones(B)
    if n < b:
        return np.zeros(B)
    total = np.zeros(B)
    for weight, labels in _partition_terms(graph):
        total += weight * _grouped_value(labels, dense_batch, batch=True)
    return total


# -- centered moments ----------------------------------------------------------


def frobenius_key(p: int) -> bytes:
    return Multigraph.frobenius_pair(p).canonical_key


def default_centering(p: int) -> dict[bytes, float]:
    """The Gaussian-null center: -1 on Frobenius pairs, zero elsewhere."""
    return {frobenius_key(p): -1.0}


def _normalize_centering(p: int, x) -> dict[bytes, float]:
    if x is None:
        return default_centering(p)
    out = {}
    for key, value in x.items():
        if isinstance(key, Multigraph):
            key = key.canonical_key
        if value != 0:
            out[key] = float(value)
    return out


def _closed_component_blocks(graph: Multigraph):
    comps = []
    for vs in _component_vertex_sets(graph.adjacency):
        sub = Multigraph(
            graph.p,
            _subadjacency(graph.adjacency, vs).tolist(),
            tuple(graph.degrees[v] for v in vs),
        )
        comps.append(sub)
    return comps


def _centering_terms(graph: Multigraph, x: dict[bytes, float]):
    """(coefficient, removed edge count, kept components) for the expansion.

    Expanding the product of (component value + x_C) over components and
    summing removed components' labels over values distinct from all kept
    labels yields coefficient binom products, a falling factorial, and the
    distinct moment of what is kept.
    """
    classes = []
    always = []
    for entry in decompose(graph):
        value = x.get(entry.component.canonical_key, 0.0)
        if value == 0.0:
            always.extend([entry.component] * entry.multiplicity)
        else:
            classes.append((entry.component, entry.multiplicity, value))
    ranges = [range(m + 1) for _, m, _ in classes]
    for picks in itertools.product(*ranges):
        coeff = 1.0
        removed_edges = 0
        kept = list(always)
        for (component, mult, value), k in zip(classes, picks):
            coeff *= comb(mult, k) * value**k
            removed_edges += k * component.num_edges
            kept.extend([component] * (mult - k))
        yield coeff, removed_edges, kept


def centered_moment(graph: Multigraph, tensor, x=None) -> float:
    """Distinct moment with each component's product shifted by its center.

    The default center is -1 on Frobenius pairs, so Frobenius factors become
    (value^2 - 1) and the result averages to zero under the symmetric
    Gaussian ensemble.
    """
    dense = _dense_of(tensor)
    n = dense.shape[0]
    b = graph.num_edges
    x = _normalize_centering(graph.p, x)
    total = 0.0
    for coeff, removed, kept in _centering_terms(graph, x):
        if coeff == 0.0:
            continue
        rest = disjoint_union(kept, p=graph.p)
        factor = float(falling_factorial(n - b + removed, removed))
        if factor == 0.0:
            continue
        total += coeff * factor * distinct_moment(rest, dense)
    return total


def centered_moment_batch(graph: Multigraph, dense_batch: np.ndarray, x=None) -> np.ndarray:
    dense_batch = np.asarray(dense_batch, dtype=np.float64)
    n = dense_batch.shape[1] if dense_batch.ndim > 1 else 0
    b = graph.num_edges
    x = _normalize_centering(graph.p, x)
    total = np.zeros(dense_batch.shape[0])
    for coeff, removed, kept in _centering_terms(graph, x):
        if coeff == 0.0:
            continue
        rest = disjoint_union(kept, p=graph.p)
        factor = float(falling_factorial(n - b + removed, removed))
        if factor == 0.0:
            continue
        total += coeff * factor * distinct_moment_batch(rest, dense_batch)
    return total


def open_centered_moment(graph: OpenMultigraph, tensor, x=None) -> np.ndarray:
    """Open moment with closed components shifted by their centers; the open
    component is never centered."""
    dense = _dense_of(tensor)
    n = dense.shape[0]
    b = graph.num_edges
    x = _normalize_centering(graph.p, x)
    blocks = _closed_component_blocks(graph.chop())
    open_block = None
    closed = []
    for sub in blocks:
        if any(deg == graph.p - 1 for deg in sub.degrees):
            open_block = sub
        else:
            closed.append(sub)
    total = np.zeros(n)
    closed_union = disjoint_union(closed, p=graph.p) if closed else Multigraph.empty(graph.p)
    for coeff, removed, kept in _centering_terms(closed_union, x):
        if coeff == 0.0:
            continue
        rebuilt = _assemble_open(graph.p, open_block, kept)
        factor = float(falling_factorial(n - b + removed, removed))
        if factor == 0.0:
            continue
        total += coeff * factor * open_distinct_moment(rebuilt, dense)
    return total


def _assemble_open(p: int, open_block: Multigraph, closed_blocks) -> OpenMultigraph:
    blocks = [open_block] + list(closed_blocks)
    d = sum(blk.d for blk in blocks)
    adj = [[0] * d for _ in range(d)]
    offset = 0
    for blk in blocks:
        for i in range(blk.d):
            for j in range(blk.d):
                adj[offset + i][offset + j] = blk.adjacency[i][j]
        offset += blk.d
    open_vertex = next(v for v in range(open_block.d) if open_block.degrees[v] == p - 1)
    return OpenMultigraph(p, adj, open_vertex)
