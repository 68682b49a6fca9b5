"""Regular multigraphs with loops: enumeration, canonical forms, automorphisms.

Conventions used throughout the package:

* A multigraph on d vertices with regularity p is stored as a symmetric d x d
  integer adjacency matrix.  The diagonal entry counts loops at that vertex
  (stored once per loop); each loop contributes 2 to the vertex degree, so
  degree(v) = 2*adj[v][v] + sum of off-diagonal row entries.
* The total edge count is b = p*d/2, so p*d must be even for a closed graph.
  A 1-open graph has one distinguished vertex carrying a dangling half-edge;
  its closed edges alone give that vertex degree p - 1, which forces p*d odd
  (hence odd p for the sets to be nonempty).
* Isomorphism classes are identified by a canonical adjacency: each connected
  component is brought to its lexicographically minimal row-major form by
  brute force over its vertex permutations (components are small; guard
  below), components are sorted by (size, encoding) and reassembled block
  diagonally.  Minimizing per component rather than globally keeps unions of
  many identical components tractable; equality of keys is still equivalent
  to isomorphism, which is what every consumer relies on.
* Text formats: JSON ``{"p": int, "d": int, "edges": [[u, v], ...]}`` with a
  loop written ``[i, i]`` and parallel edges repeated (open graphs add
  ``"open": v``); canonical string ``"p{p}d{d}:" + hex`` where hex is one
  digit per canonical adjacency entry, row-major (open graphs use the marker
  ``"p{p}d{d}o:"``).  Entries never exceed 15 under the half-edge guard.

Resource guards are explicit: enumeration refuses more than MAX_HALF_EDGES
half-edges and canonicalization refuses components larger than
MAX_COMPONENT_VERTICES, raising CapacityError rather than silently degrading.
"""

from __future__ import annotations

import itertools
import json
import math
from fractions import Fraction

import numpy as np

MAX_HALF_EDGES = 16
MAX_COMPONENT_VERTICES = 8


class CapacityError(RuntimeError):
    """A request exceeded an explicit resource guard."""


def falling_factorial(n, k):
    """n (n-1) ... (n-k+1), exact for int/Fraction inputs.

    For integer n >= 0 and k > n the product contains the factor 0, which
    implements the convention that there are no injective labelings of more
    than n items.
    """
    if k < 0:
        raise ValueError("k must be nonnegative")
    out = n - n + 1 if not isinstance(n, (int, Fraction)) else 1
    for i in range(k):
        out = out * (n - i)
    return out


def double_falling(n, k):
    """n (n-2) (n-4) ... (n-2k+2), the k-term step-2 falling product."""
    if k < 0:
        raise ValueError("k must be nonnegative")
    out = n - n + 1 if not isinstance(n, (int, Fraction)) else 1
    for i in range(k):
        out = out * (n - 2 * i)
    return out


def double_factorial(n):
    """n!! with the empty-product convention (-1)!! = 1!! = 0!! = 1."""
    out = 1
    while n > 1:
        out *= n
        n -= 2
    return out


def perfect_matchings(elements):
    """Yield all perfect matchings of a sequence as tuples of pairs.

    Pairs come out as (smaller, larger) with the first pair containing the
    smallest remaining element, so the order is deterministic.  The number of
    matchings of 2m elements is (2m-1)!!; an odd count yields nothing.
    """
    elements = tuple(elements)
    if len(elements) % 2 == 1:
        return
    if not elements:
        yield ()
        return
    first, rest = elements[0], elements[1:]
    for i, partner in enumerate(rest):
        for sub in perfect_matchings(rest[:i] + rest[i + 1 :]):
            yield ((first, partner),) + sub


def set_partitions(k):
    """Yield all partitions of range(k) as restricted-growth block-id tuples.

    Position i holds the block id of element i; ids appear in first-use
    order, so block 0 always contains element 0.  Bell(k) tuples total.
    """
    if k == 0:
        yield ()
        return
    ids = [0] * k

    def rec(i, blocks):
        if i == k:
            yield tuple(ids)
            return
        for v in range(blocks + 1):
            ids[i] = v
            yield from rec(i + 1, blocks + (1 if v == blocks else 0))

    yield from rec(1, 1)


# -- canonical forms ---------------------------------------------------------

_PERM_CACHE: dict[int, np.ndarray] = {}
_CANON_CACHE: dict[bytes, bytes] = {}
_AUT_CACHE: dict[bytes, int] = {}


def _perms(k):
    if k not in _PERM_CACHE:
        if k > MAX_COMPONENT_VERTICES:
            raise CapacityError(
                f"component has {k} vertices; canonicalization is brute force "
                f"and guarded at {MAX_COMPONENT_VERTICES}"
            )
        _PERM_CACHE[k] = np.array(list(itertools.permutations(range(k))), dtype=np.intp)
    return _PERM_CACHE[k]


def _component_images(sub):
    perms = _perms(len(sub))
    return sub[perms[:, :, None], perms[:, None, :]]


def _component_canonical(sub: np.ndarray) -> bytes:
    key = bytes([len(sub)]) + sub.tobytes()
    hit = _CANON_CACHE.get(key)
    if hit is None:
        k = len(sub)
        flat = _component_images(sub).reshape(-1, k * k)
        hit = min(map(bytes, flat))
        _CANON_CACHE[key] = hit
    return hit


def _component_aut(sub: np.ndarray) -> int:
    key = bytes([len(sub)]) + sub.tobytes()
    hit = _AUT_CACHE.get(key)
    if hit is None:
        hit = int((_component_images(sub) == sub).all(axis=(1, 2)).sum())
        _AUT_CACHE[key] = hit
    return hit


def _component_vertex_sets(adj):
    """Connected components of an adjacency matrix, as sorted vertex lists."""
    d = len(adj)
    seen = [False] * d
    comps = []
    for start in range(d):
        if seen[start]:
            continue
        stack, comp = [start], []
        seen[start] = True
        while stack:
            v = stack.pop()
            comp.append(v)
            for w in range(d):
                if not seen[w] and (adj[v][w] > 0 or adj[w][v] > 0):
                    seen[w] = True
                    stack.append(w)
        comps.append(sorted(comp))
    return comps


def _subadjacency(adj, vertices) -> np.ndarray:
    idx = np.asarray(vertices, dtype=np.intp)
    a = np.asarray(adj, dtype=np.uint8)
    return a[idx[:, None], idx[None, :]]


def _canonical_blocks(adj):
    """Sorted canonical component encodings: list of (size, bytes)."""
    return sorted(
        (len(vs), _component_canonical(_subadjacency(adj, vs)))
        for vs in _component_vertex_sets(adj)
    )


def _assemble(blocks):
    """Block-diagonal adjacency (tuple of tuples) from (size, bytes) blocks."""
    d = sum(size for size, _ in blocks)
    out = [[0] * d for _ in range(d)]
    offset = 0
    for size, enc in blocks:
        for i in range(size):
            for j in range(size):
                out[offset + i][offset + j] = enc[i * size + j]
        offset += size
    return tuple(tuple(row) for row in out)


# -- graph types -------------------------------------------------------------


class Multigraph:
    """A p-regular multigraph with loops (or a fixed irregular degree sequence).

    ``degrees`` defaults to all-p regularity and is only supplied for
    degree-annotated graphs such as the result of chopping an open graph.
    Instances are immutable; the canonical key is computed lazily.
    """

    __slots__ = ("d", "p", "adjacency", "degrees", "_canonical", "_eaut", "eaut")

    def __init__(self, p, adjacency, degrees=None):
        adjacency = tuple(tuple(int(x) for x in row) for row in adjacency)
        d = len(adjacency)
        if any(len(row) != d for row in adjacency):
            raise ValueError("adjacency must be square")
        if any(adjacency[i][j] != adjacency[j][i] for i in range(d) for j in range(d)):
            raise ValueError("adjacency must be symmetric")
        if any(x < 0 for row in adjacency for x in row):
            raise ValueError("multiplicities must be nonnegative")
        if degrees is None:
            degrees = (p,) * d
        else:
            degrees = tuple(degrees)
        for v in range(d):
            deg = 2 * adjacency[v][v] + sum(adjacency[v][w] for w in range(d) if w != v)
            if deg != degrees[v]:
                raise ValueError(f"vertex {v} has degree {deg}, expected {degrees[v]}")
        object.__setattr__(self, "p", int(p))
        object.__setattr__(self, "d", d)
        object.__setattr__(self, "adjacency", adjacency)
        object.__setattr__(self, "degrees", degrees)
        object.__setattr__(self, "_canonical", None)
        object.__setattr__(self, "_eaut", None)

    def __setattr__(self, name, value):
        if name == "eaut":  # attached by enumeration (matching-count route)
            object.__setattr__(self, name, value)
        else:
            raise AttributeError("Multigraph is immutable")

    @property
    def num_edges(self):
        """Total edge count b, loops included."""
        return sum(self.degrees) // 2

    @property
    def is_regular(self):
        return all(deg == self.p for deg in self.degrees)

    def edges(self):
        """Sorted edge list with parallel edges repeated and loops as (v, v)."""
        out = []
        for u in range(self.d):
            out.extend([(u, u)] * self.adjacency[u][u])
            for v in range(u + 1, self.d):
                out.extend([(u, v)] * self.adjacency[u][v])
        return out

    @property
    def canonical_adjacency(self):
        if self._canonical is None:
            object.__setattr__(self, "_canonical", _assemble(_canonical_blocks(self.adjacency)))
        return self._canonical

    @property
    def canonical_string(self):
        hexes = "".join(f"{x:x}" for row in self.canonical_adjacency for x in row)
        return f"p{self.p}d{self.d}:{hexes}"

    @property
    def canonical_key(self) -> bytes:
        return self.canonical_string.encode()

    def relabeled_canonically(self):
        """The canonical representative of this graph's isomorphism class."""
        return Multigraph(self.p, self.canonical_adjacency, self._canonical_degrees())

    def _canonical_degrees(self):
        if self.is_regular:
            return None
        canon = self.canonical_adjacency
        return tuple(
            2 * canon[v][v] + sum(canon[v][w] for w in range(self.d) if w != v)
            for v in range(self.d)
        )

    def is_isomorphic(self, other) -> bool:
        return self.p == other.p and self.canonical_key == other.canonical_key

    def __eq__(self, other):
        return isinstance(other, Multigraph) and self.is_isomorphic(other)

    def __hash__(self):
        return hash(self.canonical_key)

    def __repr__(self):
        return f"Multigraph(p={self.p}, d={self.d}, edges={self.edges()})"

    def to_json(self) -> str:
        return json.dumps(
            {"p": self.p, "d": self.d, "edges": [list(e) for e in self.edges()]}
        )

    @classmethod
    def from_json(cls, text):
        obj = json.loads(text) if isinstance(text, str) else text
        if "open" in obj:
            raise ValueError("this is an open graph; use OpenMultigraph.from_json")
        return cls.from_edges(obj["p"], obj["d"], obj["edges"])

    @classmethod
    def from_edges(cls, p, d, edges, degrees=None):
        adj = [[0] * d for _ in range(d)]
        for u, v in edges:
            if u == v:
                adj[u][u] += 1
            else:
                adj[u][v] += 1
                adj[v][u] += 1
        return cls(p, adj, degrees)

    @classmethod
    def empty(cls, p):
        return cls(p, ())

    @classmethod
    def frobenius_pair(cls, p):
        """Two vertices joined by p parallel edges."""
        return cls(p, ((0, p), (p, 0)))


class OpenMultigraph:
    """A p-regular multigraph with one dangling half-edge.

    ``adjacency`` stores only the closed edges, so the open vertex has closed
    degree p - 1.  Chopping (deleting the open edge) therefore just reads off
    the adjacency with its degree annotation.
    """

    __slots__ = ("d", "p", "adjacency", "open_vertex", "_chop", "eaut")

    def __init__(self, p, adjacency, open_vertex):
        degrees = [p] * len(adjacency)
        if not 0 <= open_vertex < len(adjacency):
            raise ValueError("open_vertex out of range")
        degrees[open_vertex] = p - 1
        inner = Multigraph(p, adjacency, degrees)
        if (p * inner.d) % 2 != 1:
            raise ValueError("p*d must be odd for a 1-open graph")
        object.__setattr__(self, "p", inner.p)
        object.__setattr__(self, "d", inner.d)
        object.__setattr__(self, "adjacency", inner.adjacency)
        object.__setattr__(self, "open_vertex", int(open_vertex))
        object.__setattr__(self, "_chop", inner)

    def __setattr__(self, name, value):
        if name == "eaut":
            object.__setattr__(self, name, value)
        else:
            raise AttributeError("OpenMultigraph is immutable")

    @property
    def num_edges(self):
        """Edge count b including the open edge."""
        return self._chop.num_edges + 1

    def chop(self):
        """Delete the open edge, leaving a degree-annotated Multigraph."""
        return self._chop

    @property
    def canonical_adjacency(self):
        return self._chop.canonical_adjacency

    @property
    def canonical_open_vertex(self):
        canon = self.canonical_adjacency
        for v in range(self.d):
            deg = 2 * canon[v][v] + sum(canon[v][w] for w in range(self.d) if w != v)
            if deg == self.p - 1:
                return v
        raise AssertionError("open vertex lost in canonicalization")

    @property
    def canonical_string(self):
        hexes = "".join(f"{x:x}" for row in self.canonical_adjacency for x in row)
        return f"p{self.p}d{self.d}o:{hexes}"

    @property
    def canonical_key(self) -> bytes:
        return self.canonical_string.encode()

    def relabeled_canonically(self):
        return OpenMultigraph(self.p, self.canonical_adjacency, self.canonical_open_vertex)

    def is_isomorphic(self, other) -> bool:
        return self.p == other.p and self.canonical_key == other.canonical_key

    def __eq__(self, other):
        return isinstance(other, OpenMultigraph) and self.is_isomorphic(other)

    def __hash__(self):
        return hash(self.canonical_key)

    def __repr__(self):
        return (
            f"OpenMultigraph(p={self.p}, d={self.d}, edges={self._chop.edges()}, "
            f"open_vertex={self.open_vertex})"
        )

    def to_json(self) -> str:
        return json.dumps(
            {
                "p": self.p,
                "d": self.d,
                "edges": [list(e) for e in self._chop.edges()],
                "open": self.open_vertex,
            }
        )

    @classmethod
    def from_json(cls, text):
        obj = json.loads(text) if isinstance(text, str) else text
        adj = [[0] * obj["d"] for _ in range(obj["d"])]
        for u, v in obj["edges"]:
            if u == v:
                adj[u][u] += 1
            else:
                adj[u][v] += 1
                adj[v][u] += 1
        return cls(obj["p"], adj, obj["open"])


def augment_open(G: OpenMultigraph) -> Multigraph:
    """Close the open edge onto a fresh degree-1 vertex.

    For p >= 2 the extra vertex is the only one of degree 1, so the closed
    graph determines the open graph uniquely and closed-graph machinery
    (canonical keys, automorphism counts, slot matchings) applies as is.
    """
    d = G.d
    adj = [list(row) + [0] for row in G.adjacency]
    adj.append([0] * (d + 1))
    adj[G.open_vertex][d] = 1
    adj[d][G.open_vertex] = 1
    return Multigraph(G.p, adj, tuple([G.p] * d + [1]))


def glue_open(g: OpenMultigraph, h: OpenMultigraph) -> Multigraph:
    """Fuse the open edges of two 1-open graphs into one shared edge.

    The result is closed and p-regular, and its moment equals, entry for
    entry summed, the inner product of the two open moments.
    """
    if g.p != h.p:
        raise ValueError("graphs must share p")
    dg = g.d
    size = dg + h.d
    adj = [[0] * size for _ in range(size)]
    for u in range(dg):
        for v in range(dg):
            adj[u][v] = g.adjacency[u][v]
    for u in range(h.d):
        for v in range(h.d):
            adj[dg + u][dg + v] = h.adjacency[u][v]
    adj[g.open_vertex][dg + h.open_vertex] += 1
    adj[dg + h.open_vertex][g.open_vertex] += 1
    return Multigraph(g.p, adj)


def load_graph(text):
    """Parse either graph JSON form, dispatching on the ``open`` field."""
    obj = json.loads(text) if isinstance(text, str) else text
    if "open" in obj:
        return OpenMultigraph.from_json(obj)
    return Multigraph.from_json(obj)


# -- automorphisms and components --------------------------------------------


def eaut_count(G) -> int:
    """Edge-automorphism count: 2^loops * (bundle sizes)! * |Aut(G)|.

    Bundles are maximal sets of parallel edges, loops at a shared vertex
    included; each loop can additionally be traversed in two directions.
    |Aut(G)| is found by exhaustive vertex-permutation search, component by
    component.
    """
    if isinstance(G, OpenMultigraph):
        G = G.chop()
    if G._eaut is not None:
        return G._eaut
    adj = G.adjacency
    out = 1
    for v in range(G.d):
        out *= 2 ** adj[v][v] * math.factorial(adj[v][v])
        for w in range(v + 1, G.d):
            out *= math.factorial(adj[v][w])
    out *= _aut_count(G)
    object.__setattr__(G, "_eaut", out)
    return out


def _aut_count(G) -> int:
    comps = _component_vertex_sets(G.adjacency)
    subs = [_subadjacency(G.adjacency, vs) for vs in comps]
    out = 1
    for sub in subs:
        out *= _component_aut(sub)
    groups: dict[tuple, int] = {}
    for sub in subs:
        sig = (len(sub), _component_canonical(sub))
        groups[sig] = groups.get(sig, 0) + 1
    for count in groups.values():
        out *= math.factorial(count)
    return out


class ComponentEntry:
    """One isomorphism class of connected component within a graph."""

    __slots__ = ("component", "multiplicity", "is_frobenius", "has_loop", "size")

    def __init__(self, component, multiplicity):
        self.component = component
        self.multiplicity = multiplicity
        self.size = component.d
        self.has_loop = any(component.adjacency[v][v] for v in range(component.d))
        self.is_frobenius = (
            component.d == 2 and component.adjacency[0][1] == component.p and not self.has_loop
        )

    def __repr__(self):
        return (
            f"ComponentEntry({self.component!r}, x{self.multiplicity}, "
            f"frobenius={self.is_frobenius})"
        )


class ComponentDecomposition:
    """Connected components of a multigraph, grouped by isomorphism class."""

    def __init__(self, entries):
        self.entries = list(entries)

    def __iter__(self):
        return iter(self.entries)

    def __len__(self):
        return len(self.entries)

    @property
    def num_components(self):
        return sum(e.multiplicity for e in self.entries)

    @property
    def frobenius_count(self):
        return sum(e.multiplicity for e in self.entries if e.is_frobenius)


def decompose(G: Multigraph) -> ComponentDecomposition:
    """Split into connected components, one entry per isomorphism class."""
    groups: dict[bytes, Multigraph] = {}
    counts: dict[bytes, int] = {}
    for vs in _component_vertex_sets(G.adjacency):
        comp = Multigraph(
            G.p,
            _subadjacency(G.adjacency, vs).tolist(),
            tuple(G.degrees[v] for v in vs),
        ).relabeled_canonically()
        key = comp.canonical_key
        groups.setdefault(key, comp)
        counts[key] = counts.get(key, 0) + 1
    return ComponentDecomposition(
        ComponentEntry(groups[key], counts[key]) for key in sorted(groups)
    )


def disjoint_union(graphs, p=None):
    """Disjoint union of multigraphs (empty union needs an explicit p)."""
    graphs = list(graphs)
    if not graphs:
        if p is None:
            raise ValueError("empty union needs p")
        return Multigraph.empty(p)
    p = graphs[0].p
    d = sum(g.d for g in graphs)
    adj = [[0] * d for _ in range(d)]
    degrees = []
    offset = 0
    for g in graphs:
        for i in range(g.d):
            for j in range(g.d):
                adj[offset + i][offset + j] = g.adjacency[i][j]
        degrees.extend(g.degrees)
        offset += g.d
    return Multigraph(p, adj, tuple(degrees))


def component_splits(G: Multigraph):
    """Yield (G_A, G_B, ways): splits of G's components into two graphs.

    ``ways`` counts the labeled component subsets realizing the split, i.e.
    the product of binomial(multiplicity, chosen) over component classes.
    """
    entries = decompose(G).entries
    choices = [range(e.multiplicity + 1) for e in entries]
    for takes in itertools.product(*choices):
        ways = 1
        part_a, part_b = [], []
        for e, take in zip(entries, takes):
            ways *= math.comb(e.multiplicity, take)
            part_a.extend([e.component] * take)
            part_b.extend([e.component] * (e.multiplicity - take))
        yield disjoint_union(part_a, G.p), disjoint_union(part_b, G.p), ways


def count_assignments(G: Multigraph, r: int) -> int:
    """Number of assignments of G's connected components to r bins."""
    if r < 1:
        raise ValueError("r must be at least 1")
    return r ** decompose(G).num_components


# -- enumeration -------------------------------------------------------------


def _adjacency_from_matching(matching, vertex_of, d):
    adj = [[0] * d for _ in range(d)]
    for a, b in matching:
        u, v = vertex_of[a], vertex_of[b]
        if u == v:
            adj[u][u] += 1
        else:
            adj[u][v] += 1
            adj[v][u] += 1
    return adj


def _enumerate_by_matchings(groups, make_graph, total_weight):
    """Shared enumeration core: group half-edges, dedupe by canonical key.

    ``groups[v]`` is the number of half-edges at vertex v.  Every perfect
    matching of the half-edges realizes one labeled graph; the edge
    automorphism count of a class is total_weight / (matchings realizing it),
    which is exact by the orbit-stabilizer argument (asserted).
    """
    d = len(groups)
    ell = sum(groups)
    vertex_of = []
    for v, g in enumerate(groups):
        vertex_of.extend([v] * g)
    counts: dict[bytes, int] = {}
    reps: dict[bytes, object] = {}
    raw_to_key: dict[bytes, bytes] = {}
    for matching in perfect_matchings(range(ell)):
        adj = _adjacency_from_matching(matching, vertex_of, d)
        raw = bytes(x for row in adj for x in row)
        key = raw_to_key.get(raw)
        if key is None:
            graph = make_graph(adj)
            key = graph.canonical_key
            raw_to_key[raw] = key
            reps.setdefault(key, graph)
        counts[key] = counts.get(key, 0) + 1
    out = []
    for key in sorted(reps):
        graph = reps[key].relabeled_canonically()
        realizing = counts[key]
        assert total_weight % realizing == 0, "orbit size must divide group order"
        graph.eaut = total_weight // realizing
        out.append(graph)
    return out


def enumerate_closed(d, p, max_half_edges=MAX_HALF_EDGES):
    """All isomorphism classes of closed p-regular multigraphs on d vertices.

    Each returned graph is in canonical form and carries ``eaut`` computed
    from realizing-matching counts; the totals satisfy
    sum_G p!^d d! / eaut(G) = (pd-1)!!.
    """
    if d < 0 or p < 1:
        raise ValueError("need d >= 0 and p >= 1")
    if (p * d) % 2 != 0:
        raise ValueError(f"p*d = {p * d} is odd; no closed p-regular graphs exist")
    if p * d > max_half_edges:
        raise CapacityError(f"p*d = {p * d} exceeds the half-edge guard {max_half_edges}")
    if d == 0:
        empty = Multigraph.empty(p)
        empty.eaut = 1
        return [empty]
    return _enumerate_by_matchings(
        [p] * d,
        lambda adj: Multigraph(p, adj),
        math.factorial(p) ** d * math.factorial(d),
    )


def enumerate_open(d, p, max_half_edges=MAX_HALF_EDGES):
    """All isomorphism classes of 1-open p-regular multigraphs on d vertices.

    The open vertex is taken as vertex 0 during generation; each class
    carries ``eaut`` equal to the edge automorphism count of its chop,
    satisfying sum_G p!^(d-1) (p-1)! (d-1)! / eaut = (pd-2)!!.
    """
    if d < 1 or p < 1:
        raise ValueError("need d >= 1 and p >= 1")
    if (p * d) % 2 != 1:
        raise ValueError(f"p*d = {p * d} is even; 1-open graphs need p*d odd")
    if p * d > max_half_edges:
        raise CapacityError(f"p*d = {p * d} exceeds the half-edge guard {max_half_edges}")

    def make(adj):
        open_vertex = 0  # generation keeps the deficient vertex first
        return OpenMultigraph(p, adj, open_vertex)

    return _enumerate_by_matchings(
        [p - 1] + [p] * (d - 1),
        make,
        math.factorial(p) ** (d - 1) * math.factorial(p - 1) * math.factorial(d - 1),
    )
