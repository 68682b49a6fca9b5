"""Weingarten calculus for moments of Haar-orthogonal matrices.

Order-ell moments of a Haar orthogonal matrix are governed by a Gram matrix
indexed by pair partitions (perfect matchings) of [ell], with entries
n**cycles(mu join nu), and by its inverse, the Weingarten matrix.  Both are
class functions of the cycle type of the union of the two matchings, so the
inverse is computed on cycle-type classes: one representative per class and
a dense solve of size p(ell/2), the number of integer partitions, instead of
(ell-1)!!.

Graph-level sums (over matchings realizing a given contraction multigraph)
are built on top and feed the exact cumulant expansions.
"""

from __future__ import annotations

import itertools
from dataclasses import dataclass, field
from fractions import Fraction
from math import factorial
from typing import Iterable

import numpy as np

from .exactlinalg import solve_exact
from .multigraph import CapacityError, Multigraph, eaut_count, perfect_matchings

MAX_ORDER = 12
EXACT_ORDER = 8

Matching = tuple[tuple[int, int], ...]


def identity_matching(ell: int) -> Matching:
    return tuple((i, i + 1) for i in range(0, ell, 2))


def all_matchings(ell: int) -> Iterable[Matching]:
    return perfect_matchings(range(ell))


def integer_partitions(k: int) -> list[tuple[int, ...]]:
    """All partitions of k as descending tuples, largest part first."""
    if k == 0:
        return [()]
    out: list[tuple[int, ...]] = []

    def rec(remaining: int, cap: int, prefix: tuple[int, ...]) -> None:
        if remaining == 0:
            out.append(prefix)
            return
        for part in range(min(cap, remaining), 0, -1):
            rec(remaining - part, part, prefix + (part,))

    rec(k, k, ())
    return out


def union_cycle_type(mu: Matching, nu: Matching) -> tuple[int, ...]:
    """Cycle type of mu join nu: descending half-lengths of alternating cycles."""
    ell = 2 * len(mu)
    mate_mu = [0] * ell
    mate_nu = [0] * ell
    for a, b in mu:
        mate_mu[a], mate_mu[b] = b, a
    for a, b in nu:
        mate_nu[a], mate_nu[b] = b, a
    seen = [False] * ell
    parts = []
    for start in range(ell):
        if seen[start]:
            continue
        length = 0
        x = start
        use_mu = True
        while not seen[x]:
            seen[x] = True
            length += 1
            x = mate_mu[x] if use_mu else mate_nu[x]
            use_mu = not use_mu
        parts.append(length // 2)
    parts.sort(reverse=True)
    return tuple(parts)


def cycle_count(mu: Matching, nu: Matching) -> int:
    return len(union_cycle_type(mu, nu))


def gram_entry(mu: Matching, nu: Matching, n: int) -> int:
    return n ** cycle_count(mu, nu)


def class_representative(partition: tuple[int, ...]) -> Matching:
    """A matching whose union with the identity matching has this cycle type."""
    pairs = []
    offset = 0
    for part in partition:
        block = list(range(offset, offset + 2 * part))
        for i in range(part):
            pairs.append((block[2 * i + 1], block[(2 * i + 2) % (2 * part)]))
        offset += 2 * part
    return tuple(tuple(sorted(p)) for p in sorted(pairs))


@dataclass(frozen=True)
class WeingartenTable:
    """Per-class Weingarten values at a fixed order and dimension.

    values maps each cycle-type partition of ell/2 to the Weingarten entry
    for any matching pair whose union has that type.  Entries are Fractions
    when exact, floats otherwise.
    """

    ell: int
    n: int
    exact: bool
    pseudo: bool
    classes: tuple[tuple[int, ...], ...]
    values: dict[tuple[int, ...], object]
    diagnostics: dict[str, object] = field(default_factory=dict)

    def value(self, partition: tuple[int, ...]):
        return self.values[partition]

    def wg(self, mu: Matching, nu: Matching):
        return self.values[union_cycle_type(mu, nu)]

    @property
    def zero(self):
        return Fraction(0) if self.exact else 0.0


def _collapsed_system(ell: int, n: int):
    """Rows: one Gram equation per class representative; columns: class values."""
    classes = integer_partitions(ell // 2)
    index = {c: k for k, c in enumerate(classes)}
    mu0 = identity_matching(ell)
    reps = [class_representative(c) for c in classes]
    size = len(classes)
    a = [[0] * size for _ in range(size)]
    for nu in all_matchings(ell):
        col = index[union_cycle_type(mu0, nu)]
        for row, rep in enumerate(reps):
            a[row][col] += n ** cycle_count(nu, rep)
    ones_class = index[(1,) * (ell // 2)]
    rhs = [1 if r == ones_class else 0 for r in range(size)]
    return classes, a, rhs


def _pseudo_values(ell: int, n: int, cutoff: float) -> dict[tuple[int, ...], float]:
    if ell > EXACT_ORDER:
        raise CapacityError(
            f"pseudoinverse mode enumerates the full Gram; order {ell} > {EXACT_ORDER}"
        )
    matchings = list(all_matchings(ell))
    m = len(matchings)
    gram = np.empty((m, m))
    types = {}
    for i, mu in enumerate(matchings):
        for j in range(i, m):
            t = union_cycle_type(mu, matchings[j])
            types[i, j] = t
            gram[i, j] = gram[j, i] = float(n) ** len(t)
    eigvals, eigvecs = np.linalg.eigh(gram)
    keep = eigvals > cutoff * eigvals.max()
    inv = np.where(keep, 1.0, 0.0) / np.where(keep, eigvals, 1.0)
    pinv = (eigvecs * inv) @ eigvecs.T
    sums: dict[tuple[int, ...], list[float]] = {}
    for (i, j), t in types.items():
        sums.setdefault(t, []).append(pinv[i, j])
    values = {}
    spread = 0.0
    for t, entries in sums.items():
        arr = np.array(entries)
        values[t] = float(arr.mean())
        spread = max(spread, float(arr.max() - arr.min()))
    values["__class_spread__"] = spread
    return values


def weingarten_table(
    ell: int, n: int, exact: bool | None = None, pseudo: bool = False
) -> WeingartenTable:
    """Weingarten values of order ell in dimension n, one entry per cycle type.

    The Gram matrix has full rank iff n >= ell/2; below that either pass
    pseudo=True for the spectral pseudoinverse (ratio cutoff 1e-10) or get a
    ValueError.  Exact rational arithmetic is the default up to order 8,
    float64 above; order is capped at 12.
    """
    if ell < 0 or ell % 2:
        raise ValueError("order must be a nonnegative even integer")
    if ell > MAX_ORDER:
        raise CapacityError(f"order {ell} exceeds the supported maximum {MAX_ORDER}")
    if n < 1:
        raise ValueError("dimension must be a positive integer")
    if exact is None:
        exact = ell <= EXACT_ORDER and not pseudo
    if exact and ell > EXACT_ORDER:
        raise CapacityError(f"exact tables stop at order {EXACT_ORDER}; use floats")

    diagnostics: dict[str, object] = {"full_rank": n >= ell // 2}
    if n > ell * ell and ell > 0:
        scale = float(n) ** (ell // 2)
        margin = ell * ell / n
        diagnostics["gram_eig_bounds"] = (scale * (1 - margin), scale * (1 + margin))
        diagnostics["bounds_certified"] = True
    else:
        diagnostics["bounds_certified"] = False

    if ell == 0:
        one = Fraction(1) if exact else 1.0
        return WeingartenTable(0, n, exact, False, ((),), {(): one}, diagnostics)

    if n < ell // 2:
        if not pseudo:
            raise ValueError(
                f"Gram matrix is rank deficient for n={n} < {ell // 2}; "
                "pass pseudo=True for the pseudoinverse"
            )
        values = _pseudo_values(ell, n, cutoff=1e-10)
        diagnostics["class_spread"] = values.pop("__class_spread__")
        classes = tuple(integer_partitions(ell // 2))
        return WeingartenTable(ell, n, False, True, classes, values, diagnostics)

    classes, a, rhs = _collapsed_system(ell, n)
    if exact:
        mat = np.empty((len(a), len(a)), dtype=object)
        for i, row in enumerate(a):
            for j, x in enumerate(row):
                mat[i, j] = Fraction(x)
        vec = np.array([Fraction(x) for x in rhs], dtype=object)
        solution = solve_exact(mat, vec)
        values = {c: solution[k] for k, c in enumerate(classes)}
    else:
        solution = np.linalg.solve(np.array(a, dtype=float), np.array(rhs, dtype=float))
        values = {c: float(solution[k]) for k, c in enumerate(classes)}
    return WeingartenTable(ell, n, exact, False, tuple(classes), values, diagnostics)


def slot_offsets(degrees: tuple[int, ...]) -> list[int]:
    offsets = [0]
    for deg in degrees:
        offsets.append(offsets[-1] + deg)
    return offsets


def matching_from_graph(graph: Multigraph, order: tuple[int, ...] | None = None) -> Matching:
    """One matching of the half-edge slots realizing the graph.

    Slots are blocked per vertex by graph.degrees.  order optionally permutes
    the edge list before slot assignment; any order yields a realization.
    """
    offsets = slot_offsets(graph.degrees)
    free = list(offsets[:-1])
    edges = graph.edges()
    if order is not None:
        edges = [edges[i] for i in order]
    pairs = []
    for u, v in edges:
        a = free[u]
        free[u] += 1
        b = free[v]
        free[v] += 1
        pairs.append(tuple(sorted((a, b))))
    return tuple(sorted(pairs))


def _aligned_matching(graph: Multigraph, target_degrees: tuple[int, ...]) -> Matching:
    """A realizing matching under slot blocks of the given degree layout.

    The graph's vertices are permuted so its degree vector equals
    target_degrees exactly; realization and quotienting must agree on which
    slot block has which size.
    """
    remaining = list(range(graph.d))
    perm = []
    for deg in target_degrees:
        for idx, v in enumerate(remaining):
            if graph.degrees[v] == deg:
                perm.append(remaining.pop(idx))
                break
        else:
            raise ValueError("degree multisets do not match")
    adj = [[graph.adjacency[u][v] for v in perm] for u in perm]
    offsets = slot_offsets(target_degrees)
    free = list(offsets[:-1])
    pairs = []
    for u in range(len(target_degrees)):
        for _ in range(adj[u][u]):
            a = free[u]
            free[u] += 1
            b = free[u]
            free[u] += 1
            pairs.append((a, b))
        for v in range(u + 1, len(target_degrees)):
            for _ in range(adj[u][v]):
                a = free[u]
                free[u] += 1
                b = free[v]
                free[v] += 1
                pairs.append((a, b))
    return tuple(sorted(pairs))


def _quotient_adjacency(matching: Matching, degrees: tuple[int, ...]) -> np.ndarray:
    d = len(degrees)
    vertex_of = np.empty(sum(degrees), dtype=np.int64)
    pos = 0
    for v, deg in enumerate(degrees):
        vertex_of[pos : pos + deg] = v
        pos += deg
    adj = np.zeros((d, d), dtype=np.int64)
    for a, b in matching:
        u, v = vertex_of[a], vertex_of[b]
        adj[u, v] += 1
        if u != v:
            adj[v, u] += 1
    return adj


class _QuotientKeys:
    """Canonical keys of matching quotients, memoized on raw adjacency bytes."""

    def __init__(self, p: int, degrees: tuple[int, ...]):
        self.p = p
        self.degrees = degrees
        self._cache: dict[bytes, bytes] = {}

    def key(self, matching: Matching) -> bytes:
        adj = _quotient_adjacency(matching, self.degrees)
        raw = adj.tobytes()
        found = self._cache.get(raw)
        if found is None:
            found = Multigraph(self.p, adj, degrees=self.degrees).canonical_key
            self._cache[raw] = found
        return found


def closed_realization_count(graph: Multigraph) -> int:
    """Number of matchings of the p*d half-edge slots whose quotient is the graph."""
    return factorial(graph.p) ** graph.d * factorial(graph.d) // eaut_count(graph)


def chopped_realization_count(chopped: Multigraph) -> int:
    """Matchings realizing a graph with one vertex of degree p-1 (an open stub)."""
    p, d = chopped.p, chopped.d
    weight = factorial(p) ** (d - 1) * factorial(p - 1) * factorial(d - 1)
    return weight // eaut_count(chopped)


def _check_degrees(graph: Multigraph, table: WeingartenTable) -> None:
    ell = sum(graph.degrees)
    if ell != table.ell:
        raise ValueError(f"graph has {ell} half-edges but table order is {table.ell}")


def graph_weingarten(g: Multigraph, h: Multigraph, table: WeingartenTable):
    """Sum of Weingarten entries over matching pairs realizing (g, h).

    Equals (number of matchings realizing g) times the sum of wg(mu0, nu)
    over nu realizing h, for any fixed mu0 realizing g.  Zero whenever the
    degree multisets differ.  Chopped graphs (one vertex of degree p-1) are
    handled by the same quotient construction.
    """
    _check_degrees(g, table)
    if sorted(g.degrees) != sorted(h.degrees) or g.p != h.p:
        return table.zero
    return graph_weingarten_matrix([g, h], table)[0][1]


def graph_weingarten_matrix(graphs: list[Multigraph], table: WeingartenTable) -> list[list]:
    """All pairwise graph Weingarten values in one sweep over matchings."""
    if not graphs:
        return []
    base = graphs[0]
    for g in graphs:
        _check_degrees(g, table)
        if sorted(g.degrees) != sorted(base.degrees) or g.p != base.p:
            raise ValueError("graphs must share one degree multiset")
    ell = table.ell
    keys = [g.canonical_key for g in graphs]
    quotients = _QuotientKeys(base.p, base.degrees)

    matchings = list(all_matchings(ell))
    matching_keys = [quotients.key(nu) for nu in matchings]
    counts: dict[bytes, int] = {}
    for k in matching_keys:
        counts[k] = counts.get(k, 0) + 1

    zero = table.zero
    out = [[zero] * len(graphs) for _ in range(len(graphs))]
    # Rows with equal canonical keys get identical entries; solve each class once.
    row_cache: dict[bytes, dict[bytes, object]] = {}
    for i, g in enumerate(graphs):
        sums = row_cache.get(keys[i])
        if sums is None:
            mu0 = _aligned_matching(g, base.degrees)
            sums = {}
            for nu, k in zip(matchings, matching_keys):
                w = table.values[union_cycle_type(mu0, nu)]
                sums[k] = sums.get(k, zero) + w
            row_cache[keys[i]] = sums
        count_g = counts.get(keys[i], 0)
        for j in range(len(graphs)):
            out[i][j] = count_g * sums.get(keys[j], zero)
    return out
