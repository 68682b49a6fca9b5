"""Symmetric tensor storage, random ensembles, and orthogonal conjugation.

A symmetric p-tensor on [n] is stored as one float64 value per sorted index
multiset, C(n+p-1, p) entries, with the dense n**p cube materialized on
demand for contraction work.  Samplers draw the tensor ensembles used
throughout: symmetric Gaussian (GOE-like) tensors, Haar orthogonal matrices,
Ginibre matrices, spheres, spiked tensors, and Wishart-style mixtures.
"""

from __future__ import annotations

import itertools
import struct
import zlib
from math import comb, factorial, sqrt

import numpy as np

from .multigraph import CapacityError, falling_factorial

MAX_DENSE_ENTRIES = 5_000_000

_BASIS_CACHE: dict[tuple[int, int], dict[str, np.ndarray]] = {}


def basis_multisets(p: int, n: int) -> list[tuple[int, ...]]:
    """Sorted index multisets in lexicographic order; the storage layout."""
    return list(itertools.combinations_with_replacement(range(n), p))


def _basis(p: int, n: int) -> dict[str, np.ndarray]:
    found = _BASIS_CACHE.get((p, n))
    if found is not None:
        return found
    if n**p > MAX_DENSE_ENTRIES:
        raise CapacityError(f"dense cube n**p = {n**p} exceeds {MAX_DENSE_ENTRIES}")
    multisets = basis_multisets(p, n)
    index = np.array(multisets, dtype=np.int64).reshape(len(multisets), p)
    orbit = np.empty(len(multisets), dtype=np.int64)
    for k, ms in enumerate(multisets):
        reps = 1
        for v in set(ms):
            reps *= factorial(ms.count(v))
        orbit[k] = factorial(p) // reps
    # rank of the sorted version of every dense position, for scatter/gather
    rank = {ms: k for k, ms in enumerate(multisets)}
    scatter = np.empty(n**p, dtype=np.int64)
    for flat, pos in enumerate(itertools.product(range(n), repeat=p)):
        scatter[flat] = rank[tuple(sorted(pos))]
    entry = {"index": index, "orbit": orbit, "scatter": scatter}
    _BASIS_CACHE[(p, n)] = entry
    return entry


class SymmetricTensor:
    """Dense-on-multisets symmetric tensor with on-demand cube view."""

    __slots__ = ("p", "n", "values", "_dense")

    def __init__(self, p: int, n: int, values: np.ndarray):
        if p < 1 or n < 1:
            raise ValueError("need p >= 1 and n >= 1")
        expected = comb(n + p - 1, p)
        values = np.asarray(values, dtype=np.float64)
        if values.shape != (expected,):
            raise ValueError(f"expected {expected} multiset values, got {values.shape}")
        self.p = p
        self.n = n
        self.values = values
        self._dense = None

    @classmethod
    def zeros(cls, p: int, n: int) -> "SymmetricTensor":
        return cls(p, n, np.zeros(comb(n + p - 1, p)))

    @classmethod
    def from_dense(cls, dense: np.ndarray, symmetrize: bool = False) -> "SymmetricTensor":
        dense = np.asarray(dense, dtype=np.float64)
        p = dense.ndim
        n = dense.shape[0]
        if dense.shape != (n,) * p:
            raise ValueError("dense tensor must be a cube")
        basis = _basis(p, n)
        if symmetrize:
            acc = np.zeros_like(dense)
            for perm in itertools.permutations(range(p)):
                acc += dense.transpose(perm)
            dense = acc / factorial(p)
        # every dense position holding a multiset maps to the same value;
        # read each multiset's representative position directly
        index = basis["index"]
        strides = n ** np.arange(p - 1, -1, -1, dtype=np.int64)
        return cls(p, n, dense.reshape(-1)[index @ strides])

    def dense(self) -> np.ndarray:
        if self._dense is None:
            basis = _basis(self.p, self.n)
            self._dense = self.values[basis["scatter"]].reshape((self.n,) * self.p)
        return self._dense

    def orbit_sizes(self) -> np.ndarray:
        return _basis(self.p, self.n)["orbit"]

    def frobenius_sq(self) -> float:
        return float(np.dot(self.orbit_sizes().astype(np.float64), self.values**2))

    def __getitem__(self, idx) -> float:
        if isinstance(idx, int):
            idx = (idx,)
        basis = _basis(self.p, self.n)
        strides = self.n ** np.arange(self.p - 1, -1, -1, dtype=np.int64)
        flat = int(np.dot(np.asarray(idx, dtype=np.int64), strides))
        return float(self.values[basis["scatter"][flat]])

    def _binary(self, other, op) -> "SymmetricTensor":
        if not isinstance(other, SymmetricTensor):
            return NotImplemented
        if (self.p, self.n) != (other.p, other.n):
            raise ValueError("shape mismatch")
        return SymmetricTensor(self.p, self.n, op(self.values, other.values))

    def __add__(self, other):
        return self._binary(other, np.add)

    def __sub__(self, other):
        return self._binary(other, np.subtract)

    def __mul__(self, scalar):
        return SymmetricTensor(self.p, self.n, self.values * float(scalar))

    __rmul__ = __mul__

    def __repr__(self):
        return f"SymmetricTensor(p={self.p}, n={self.n})"


SNAPSHOT_HEADER = struct.Struct("<II")


def save_tensor(path, tensor: SymmetricTensor) -> None:
    """Binary snapshot: uint32 LE p, uint32 LE n, float64 LE multiset payload."""
    with open(path, "wb") as fh:
        fh.write(SNAPSHOT_HEADER.pack(tensor.p, tensor.n))
        fh.write(tensor.values.astype("<f8").tobytes())


def load_tensor(path) -> SymmetricTensor:
    with open(path, "rb") as fh:
        raw = fh.read()
    if len(raw) < SNAPSHOT_HEADER.size:
        raise ValueError("truncated tensor snapshot")
    p, n = SNAPSHOT_HEADER.unpack_from(raw)
    payload = np.frombuffer(raw, dtype="<f8", offset=SNAPSHOT_HEADER.size)
    expected = comb(n + p - 1, p)
    if payload.shape != (expected,):
        raise ValueError(f"snapshot payload has {payload.shape[0]} values, expected {expected}")
    return SymmetricTensor(p, n, payload.copy())


class SeededRng:
    """Deterministic per-(stream, trial) generators from one master seed.

    Components of the derivation path may be ints or short strings; strings
    are folded through crc32 so the derivation never depends on Python's
    randomized hashing.
    """

    def __init__(self, master: int):
        self.master = int(master)

    @staticmethod
    def _component(x) -> int:
        if isinstance(x, str):
            return zlib.crc32(x.encode("utf-8"))
        return int(x) % (2**32)

    def generator(self, *path) -> np.random.Generator:
        key = tuple(self._component(x) for x in path)
        return np.random.default_rng(np.random.SeedSequence(self.master, spawn_key=key))


def sample_wigner(p: int, n: int, rng: np.random.Generator, scale: float = 1.0) -> SymmetricTensor:
    """Symmetric Gaussian tensor: independent multiset entries with variance
    scale times the product of index-multiplicity factorials (GOE at p=2)."""
    basis = _basis(p, n)
    index = basis["index"]
    reps = np.ones(len(index))
    for k, ms in enumerate(map(tuple, index)):
        v = 1
        for val in set(ms):
            v *= factorial(ms.count(val))
        reps[k] = v
    std = np.sqrt(scale * reps)
    return SymmetricTensor(p, n, rng.normal(0.0, 1.0, size=len(reps)) * std)


def sample_haar(n: int, rng: np.random.Generator) -> np.ndarray:
    return sample_haar_batch(n, rng, 1)[0]


def sample_haar_batch(n: int, rng: np.random.Generator, count: int) -> np.ndarray:
    """Haar orthogonal matrices: QR of a Gaussian matrix, column k multiplied
    by the sign of the k-th diagonal entry of the triangular factor."""
    gauss = rng.normal(size=(count, n, n))
    q, r = np.linalg.qr(gauss)
    diag = np.diagonal(r, axis1=-2, axis2=-1)
    signs = np.where(diag < 0, -1.0, 1.0)
    return q * signs[:, None, :]


def sample_ginibre(n: int, rng: np.random.Generator, scale: float = 1.0) -> np.ndarray:
    return rng.normal(0.0, sqrt(scale), size=(n, n))


def sample_sphere(n: int, rng: np.random.Generator, radius_sq: float | None = None) -> np.ndarray:
    """Uniform on the sphere of squared norm radius_sq (default n)."""
    if radius_sq is None:
        radius_sq = float(n)
    v = rng.normal(size=n)
    return v * sqrt(radius_sq / float(v @ v))


def conjugate_dense(q: np.ndarray, dense: np.ndarray) -> np.ndarray:
    """(Q . T)_j = sum_i T_i prod_t Q_{i_t j_t}; valid for any square Q."""
    p = dense.ndim
    operands = [dense, list(range(p))]
    for t in range(p):
        operands.extend([q, [t, p + t]])
    operands.append(list(range(p, 2 * p)))
    return np.einsum(*operands, optimize=True)


def conjugate(q: np.ndarray, tensor: SymmetricTensor) -> SymmetricTensor:
    return SymmetricTensor.from_dense(conjugate_dense(q, tensor.dense()))


def rank_one(v: np.ndarray, p: int) -> SymmetricTensor:
    v = np.asarray(v, dtype=np.float64)
    basis = _basis(p, len(v))
    return SymmetricTensor(p, len(v), np.prod(v[basis["index"]], axis=1))


def spiked_sample(
    p: int, n: int, lam: float, rng: np.random.Generator
) -> tuple[np.ndarray, SymmetricTensor]:
    """Planted direction v (uniform, |v|^2 = n) and observation lam*v^(x)p + W."""
    v = sample_sphere(n, rng)
    return v, lam * rank_one(v, p) + sample_wigner(p, n, rng)


def wishart_like_a(p: int, n: int) -> SymmetricTensor:
    """Repeat-free indicator tensor scaled so the full Frobenius norm is n^p."""
    if n < p:
        raise ValueError(f"need n >= p for repeat-free positions, got n={n} < p={p}")
    basis = _basis(p, n)
    index = basis["index"]
    distinct = np.array([len(set(ms)) == p for ms in map(tuple, index)])
    c = float(n) ** (p / 2) / sqrt(float(falling_factorial(n, p)))
    return SymmetricTensor(p, n, np.where(distinct, c, 0.0))


def wishart_like_sample(a: SymmetricTensor, rng: np.random.Generator) -> SymmetricTensor:
    return conjugate(sample_ginibre(a.n, rng), a)


def wishart_mixture_sample(
    p: int, n: int, r: int, rng: np.random.Generator, a: SymmetricTensor | None = None
) -> SymmetricTensor:
    """r^(-1/2) times the sum of r independent Ginibre conjugations of a."""
    if a is None:
        a = wishart_like_a(p, n)
    acc = np.zeros((n,) * p)
    dense = a.dense()
    for _ in range(r):
        acc += conjugate_dense(sample_ginibre(n, rng), dense)
    return SymmetricTensor.from_dense(acc / sqrt(r))
