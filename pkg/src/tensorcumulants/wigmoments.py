"""Exact Wigner graph moments via even edge colorings, plus the switching dual.

The expectation of a graph moment over the symmetric Gaussian ensemble reduces
to a sum over edge colorings in which every colored vertex neighborhood is
repeated an even number of times; grouping colorings that differ only by a
renaming of colors leaves one term per set partition of the edges.  Deciding
the leading exponent is NP-hard in general, so everything here is brute force
behind explicit size guards.  Two independent routes are kept side by side on
purpose: direct coloring enumeration, and maximization of cycle counts against
bundle matchings (equivalently, switching distance to disjoint unions of
p-fold pairs).  They check each other; neither is meant to scale.
"""

from __future__ import annotations

import itertools
from collections import Counter, deque
from dataclasses import dataclass
from math import factorial
from typing import Iterator

import numpy as np

from .contraction import moment_batch
from .ensembles import sample_wigner
from .multigraph import (
    CapacityError,
    Multigraph,
    decompose,
    double_falling,
    falling_factorial,
    perfect_matchings,
    set_partitions,
)

# Bell(8) = 4140 partitions; past that the enumeration stops being instant.
MAX_COLORING_EDGES = 8
# Cap on (d-1)!! * p!^(d/2) bundle matchings and on per-vertex circuit choices.
MAX_SWITCH_CHOICES = 1_000_000
# Cap on BFS frontier growth over the labeled degree-sequence class.
MAX_BFS_STATES = 1_000_000


# -- even colorings -----------------------------------------------------------


@dataclass(frozen=True)
class EvenColoring:
    """One even edge coloring, recorded up to renaming of the colors.

    ``block_of[e]`` is the color id of the e-th edge in graph.edges() order,
    in restricted-growth form.  ``census`` pairs each distinct colored vertex
    neighborhood (sorted tuple of color ids, loops counted twice) with its
    number of occurrences; evenness means every count is even.
    """

    block_of: tuple[int, ...]
    census: tuple[tuple[tuple[int, ...], int], ...]
    weight: int

    @property
    def num_colors(self) -> int:
        return len(set(self.block_of))


@dataclass(frozen=True)
class ColoringCensus:
    """Leading-order summary of a graph's even colorings.

    The exact Wigner moment has leading term leading_weight * n^max_colors.
    ``max_colors`` is None when no even coloring exists (odd vertex count),
    in which case the moment vanishes identically.
    """

    max_colors: int | None
    leading_weight: int
    maximal: tuple[EvenColoring, ...]


def _incidence(graph: Multigraph) -> list[list[int]]:
    """Per-vertex list of incident edge ids in edges() order, loops twice."""
    slots: list[list[int]] = [[] for _ in range(graph.d)]
    for e, (u, v) in enumerate(graph.edges()):
        slots[u].append(e)
        slots[v].append(e)
    return slots


def _coloring_weight(census: Counter) -> int:
    """Ways to pair equal neighborhoods and align colors within each pair.

    A neighborhood repeated f times contributes (f-1)!! pairings, and each
    pair matches up its repeated colors in prod_j c_j! ways.
    """
    weight = 1
    for neighborhood, count in census.items():
        within = 1
        for mult in Counter(neighborhood).values():
            within *= factorial(mult)
        weight *= double_falling(count - 1, count // 2) * within ** (count // 2)
    return weight


def even_colorings_iter(
    graph: Multigraph, max_edges: int = MAX_COLORING_EDGES
) -> Iterator[EvenColoring]:
    """All even edge colorings, one per set partition of the edge set."""
    b = graph.num_edges
    if b > max_edges:
        raise CapacityError(f"b = {b} edges exceeds the coloring guard {max_edges}")
    incidence = _incidence(graph)
    for block_of in set_partitions(b):
        census = Counter(
            tuple(sorted(block_of[e] for e in slots)) for slots in incidence
        )
        if any(count % 2 for count in census.values()):
            continue
        yield EvenColoring(
            block_of,
            tuple(sorted(census.items())),
            _coloring_weight(census),
        )


def even_colorings(graph: Multigraph, max_edges: int = MAX_COLORING_EDGES) -> ColoringCensus:
    """Census of the maximal even colorings: color count, weight, witnesses.

    For connected loopless graphs every maximal coloring has weight one
    (checked here), so the leading weight is plainly the number of maximal
    colorings.  Both qualifiers are needed: a loop feeds its two half-edges
    the same color (two loops on two vertices admit only the one-color
    coloring, of weight two), and disconnected graphs can repeat a color
    across a vertex without sacrificing the color count (two triangles reach
    their three-color maximum with patterns like aab / aac, weight two).
    """
    top = -1
    best: list[EvenColoring] = []
    for coloring in even_colorings_iter(graph, max_edges):
        c = coloring.num_colors
        if c > top:
            top, best = c, [coloring]
        elif c == top:
            best.append(coloring)
    if top < 0:
        return ColoringCensus(None, 0, ())
    loopless = all(graph.adjacency[v][v] == 0 for v in range(graph.d))
    if loopless and decompose(graph).num_components <= 1:
        assert all(col.weight == 1 for col in best), "maximal coloring with weight > 1"
    return ColoringCensus(top, sum(col.weight for col in best), tuple(best))


def exact_wigner_moment(graph: Multigraph, n, max_edges: int = MAX_COLORING_EDGES):
    """Exact E m_G(W) for W ~ sample_wigner(p, n), as an integer in n.

    Sums falling_factorial(n, colors) * weight over all even colorings, so it
    is exact for any integer n and generic in n (Fractions, symbols) as well.
    """
    return sum(
        falling_factorial(n, coloring.num_colors) * coloring.weight
        for coloring in even_colorings_iter(graph, max_edges)
    )


def wigner_moment_mc(
    graph: Multigraph,
    n: int,
    trials: int,
    rng: np.random.Generator,
    batch: int = 2048,
) -> tuple[float, float]:
    """Monte Carlo mean of m_G over Wigner draws; returns (mean, stderr)."""
    total = 0.0
    total_sq = 0.0
    done = 0
    while done < trials:
        take = min(batch, trials - done)
        stack = np.stack([sample_wigner(graph.p, n, rng).dense() for _ in range(take)])
        values = moment_batch(graph, stack)
        total += float(values.sum())
        total_sq += float((values**2).sum())
        done += take
    mean = total / trials
    variance = max(total_sq / trials - mean**2, 0.0)
    return mean, float(np.sqrt(variance / trials))


# -- switching distance -------------------------------------------------------


def _check_same_degree_sequence(g: Multigraph, h: Multigraph) -> None:
    if g.d != h.d or g.degrees != h.degrees:
        raise ValueError("switching distance needs the same labeled degree sequence")


def _difference_edges(g: Multigraph, h: Multigraph) -> tuple[list, list]:
    """Excess edge instances of each side: (only-in-g, only-in-h) lists."""
    g_only, h_only = [], []
    for u in range(g.d):
        for v in range(u, g.d):
            delta = g.adjacency[u][v] - h.adjacency[u][v]
            if delta > 0:
                g_only.extend([(u, v)] * delta)
            elif delta < 0:
                h_only.extend([(u, v)] * (-delta))
    return g_only, h_only


def _cycle_count(num_slots: int, pair_lists) -> int:
    """Connected components when every slot has one link from each list."""
    parent = list(range(num_slots))

    def find(x):
        while parent[x] != x:
            parent[x] = parent[parent[x]]
            x = parent[x]
        return x

    for pairs in pair_lists:
        for a, b in pairs:
            ra, rb = find(a), find(b)
            if ra != rb:
                parent[ra] = rb
    return sum(1 for x in range(num_slots) if find(x) == x)


def _max_alternating_circuits(d: int, g_only: list, h_only: list) -> int:
    """Largest partition of the two-colored difference into alternating circuits.

    A circuit partition pairs, at every vertex, each excess half-edge of one
    side with one of the other, so the maximum is a sweep over per-vertex
    bijections, counting cycles of the resulting half-edge union.
    """
    g_at: list[list[int]] = [[] for _ in range(d)]
    h_at: list[list[int]] = [[] for _ in range(d)]
    links = []
    for e, (u, v) in enumerate(g_only):
        links.append((2 * e, 2 * e + 1))
        g_at[u].append(2 * e)
        g_at[v].append(2 * e + 1)
    offset = 2 * len(g_only)
    for e, (u, v) in enumerate(h_only):
        links.append((offset + 2 * e, offset + 2 * e + 1))
        h_at[u].append(offset + 2 * e)
        h_at[v].append(offset + 2 * e + 1)

    choices = 1
    for v in range(d):
        # excess degrees balance vertex by vertex within a degree sequence
        assert len(g_at[v]) == len(h_at[v])
        choices *= factorial(len(g_at[v]))
    if choices > MAX_SWITCH_CHOICES:
        raise CapacityError(f"{choices} circuit pairings exceed {MAX_SWITCH_CHOICES}")

    num_slots = 2 * (len(g_only) + len(h_only))
    active = [v for v in range(d) if g_at[v]]
    best = 0
    for perms in itertools.product(*(itertools.permutations(h_at[v]) for v in active)):
        crossings = [
            (a, b)
            for v, perm in zip(active, perms)
            for a, b in zip(g_at[v], perm)
        ]
        best = max(best, _cycle_count(num_slots, (links, crossings)))
    return best


def _switch_neighbors(adj: tuple, d: int) -> Iterator[tuple]:
    """Adjacencies one switching away: rewire any two distinct edge instances."""
    edges = []
    for u in range(d):
        for v in range(u, d):
            edges.extend([(u, v)] * adj[u][v])
    for (a, b), (c, e) in itertools.combinations(edges, 2):
        for x, y, z, w in ((a, c, b, e), (a, e, b, c)):
            rows = [list(row) for row in adj]
            for u, v, sign in ((a, b, -1), (c, e, -1), (x, y, 1), (z, w, 1)):
                rows[u][v] += sign
                if u != v:
                    rows[v][u] += sign
            yield tuple(tuple(row) for row in rows)


def _bfs_distance(g: Multigraph, h: Multigraph) -> int:
    """Breadth-first search over the labeled degree-sequence class."""
    start, goal = g.adjacency, h.adjacency
    if start == goal:
        return 0
    seen = {start}
    frontier = deque([(start, 0)])
    while frontier:
        adj, dist = frontier.popleft()
        for nxt in _switch_neighbors(adj, g.d):
            if nxt == goal:
                return dist + 1
            if nxt not in seen:
                seen.add(nxt)
                if len(seen) > MAX_BFS_STATES:
                    raise CapacityError(f"BFS exceeded {MAX_BFS_STATES} states")
                frontier.append((nxt, dist + 1))
    raise ValueError("degree-sequence class is not connected; no switching path")


def switching_distance(g: Multigraph, h: Multigraph, method: str = "circuit") -> int:
    """Minimum number of switchings turning labeled g into labeled h.

    A switching replaces two edge instances {v,w}, {v',w'} by {v,v'}, {w,w'};
    it preserves every vertex degree, so both graphs must share one labeled
    degree sequence.  The circuit route evaluates
    half the symmetric-difference edge count minus the largest alternating
    circuit partition; the BFS route walks the switching graph directly.
    """
    _check_same_degree_sequence(g, h)
    if method == "bfs":
        return _bfs_distance(g, h)
    if method == "both":
        circuit = switching_distance(g, h, method="circuit")
        bfs = _bfs_distance(g, h)
        if circuit != bfs:
            raise AssertionError(f"circuit {circuit} != bfs {bfs}")
        return circuit
    if method != "circuit":
        raise ValueError(f"unknown method {method!r}")
    g_only, h_only = _difference_edges(g, h)
    return len(g_only) - _max_alternating_circuits(g.d, g_only, h_only)


def cmax_via_switching(graph: Multigraph) -> int:
    """Maximum even-coloring color count via matchings against vertex bundles.

    Fix one matching on the 2b degree slots realizing the graph, sweep every
    matching that realizes a disjoint union of p-fold pairs (a perfect pairing
    of the vertices plus a slot bijection inside each pair), and return the
    largest cycle count of the union.  This equals b minus the least switching
    distance to such a union, so it is the switching-side dual of
    even_colorings().max_colors.  Needs an even vertex count; odd graphs have
    no even colorings and no bundle cover, so only the coloring census (empty)
    applies there.
    """
    if not graph.is_regular:
        raise ValueError("bundle targets need a p-regular graph")
    d, p = graph.d, graph.p
    if d % 2:
        raise ValueError("odd vertex count admits no pairing into bundles")
    choices = double_falling(max(d - 1, 0), d // 2) * factorial(p) ** (d // 2)
    if choices > MAX_SWITCH_CHOICES:
        raise CapacityError(f"{choices} bundle matchings exceed {MAX_SWITCH_CHOICES}")

    taken = [0] * d
    realized = []
    for u, v in graph.edges():
        a = u * p + taken[u]
        taken[u] += 1
        b = v * p + taken[v]
        taken[v] += 1
        realized.append((a, b))

    best = 0
    for pairing in perfect_matchings(range(d)):
        for perms in itertools.product(
            *(itertools.permutations(range(p)) for _ in pairing)
        ):
            bundle = [
                (i * p + k, j * p + perm[k])
                for (i, j), perm in zip(pairing, perms)
                for k in range(p)
            ]
            best = max(best, _cycle_count(d * p, (realized, bundle)))
    return best


# -- saturation of the color-count bound --------------------------------------


def has_transitive_matching(graph: Multigraph) -> bool:
    """Whether some perfect matching inside the edge set is adjacency-closed:
    partners of adjacent matched vertices are adjacent as well.

    Defined for simple regular graphs; exactly then the maximum color count
    reaches its (p + 1) d / 4 ceiling.
    """
    d = graph.d
    for v in range(d):
        if graph.adjacency[v][v] or any(x > 1 for x in graph.adjacency[v]):
            raise ValueError("saturation check applies to simple graphs only")
    if d % 2:
        return False

    adj = graph.adjacency

    def extend(partner: dict) -> bool:
        free = [v for v in range(d) if v not in partner]
        if not free:
            for u in range(d):
                for w in range(u + 1, d):
                    if adj[u][w] and partner[u] != w and adj[partner[u]][partner[w]] == 0:
                        return False
            return True
        v = free[0]
        for w in free[1:]:
            if adj[v][w]:
                partner[v], partner[w] = w, v
                if extend(partner):
                    return True
                del partner[v], partner[w]
        return False

    return extend({})
