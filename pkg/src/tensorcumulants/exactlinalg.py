"""Small dense exact linear algebra over Fractions.

Matrices are numpy object arrays holding Fraction entries.  Sizes here are
tiny (tens of rows), so Gauss-Jordan with partial pivoting by magnitude is
entirely adequate and keeps every intermediate exact.
"""

from __future__ import annotations

from fractions import Fraction

import numpy as np


def as_fraction_matrix(rows) -> np.ndarray:
    out = np.empty((len(rows), len(rows[0])), dtype=object)
    for i, row in enumerate(rows):
        for j, x in enumerate(row):
            out[i, j] = Fraction(x)
    return out


def solve_exact(a: np.ndarray, b) -> np.ndarray:
    """Solve a x = b exactly; b may be a vector or a matrix of columns."""
    a = np.array(a, dtype=object)
    n = len(a)
    b = np.array(b, dtype=object)
    vector = b.ndim == 1
    if vector:
        b = b[:, None]
    aug = np.concatenate([a, b], axis=1)
    for col in range(n):
        pivot = max(range(col, n), key=lambda r: abs(aug[r, col]))
        if aug[pivot, col] == 0:
            raise ZeroDivisionError("matrix is singular")
        if pivot != col:
            aug[[col, pivot]] = aug[[pivot, col]]
        aug[col] = aug[col] / aug[col, col]
        for r in range(n):
            if r != col and aug[r, col] != 0:
                aug[r] = aug[r] - aug[r, col] * aug[col]
    x = aug[:, n:]
    return x[:, 0] if vector else x


def invert_exact(a: np.ndarray) -> np.ndarray:
    n = len(a)
    eye = np.empty((n, n), dtype=object)
    for i in range(n):
        for j in range(n):
            eye[i, j] = Fraction(i == j)
    return solve_exact(a, eye)
