"""Complex determinants, a cofactor cross-check, and truncated Fredholm determinants."""

from __future__ import annotations

import cmath
from dataclasses import dataclass
from typing import Callable

import numpy as np


def det_c(M) -> complex:
    """Determinant by LU factorisation with partial (row) pivoting."""
    A = np.asarray(M, dtype=complex)
    if A.ndim != 2 or A.shape[0] != A.shape[1]:
        raise ValueError(f"square matrix required, got shape {A.shape}")
    if A.shape[0] == 0:
        return 1 + 0j
    return complex(np.linalg.det(A))


def det_cofactor(M) -> complex:
    """Laplace expansion along the first row; exponential cost, meant for n <= 6."""
    A = [list(map(complex, row)) for row in np.asarray(M, dtype=complex)]
    n = len(A)
    if any(len(r) != n for r in A):
        raise ValueError("square matrix required")
    return _cofactor(A)


def _cofactor(A: list) -> complex:
    n = len(A)
    if n == 0:
        return 1 + 0j
    if n == 1:
        return A[0][0]
    if n == 2:
        return A[0][0] * A[1][1] - A[0][1] * A[1][0]
    total = 0j
    for j in range(n):
        if A[0][j] == 0:
            continue
        minor = [row[:j] + row[j + 1:] for row in A[1:]]
        total += (-1) ** j * A[0][j] * _cofactor(minor)
    return total


def schur_det(A, B, C, D) -> complex:
    """det [[A, B], [C, D]] = det(D) det(A - B D^{-1} C)."""
    D = np.asarray(D, dtype=complex)
    S = np.asarray(A, dtype=complex) - np.asarray(B, dtype=complex) @ np.linalg.solve(D, np.asarray(C, dtype=complex))
    return det_c(D) * det_c(S)


class TruncationNotConverged(RuntimeError):
    pass


@dataclass(frozen=True)
class FredholmResult:
    value: complex
    estimate: float
    M: int
    history: tuple  # (M, det_M) pairs, M = 1, 2, 4, ...


def fredholm_det(build: Callable[[int], np.ndarray], M: int, kind: str = "det",
                 floor: float = 1e-14) -> FredholmResult:
    """det(I - X_M) (or its square root) with |d_M - d_{M/2}| as the estimate.

    ``build(m)`` returns the m-truncation of X (any square shape that grows
    with m).  The square root is continued along M = 1, 2, 4, ..., M from the
    principal branch at M = 1.  Raises when the estimate at M has not
    dropped below the previous one (beyond a relative roundoff floor).
    """
    if kind not in ("det", "sqrt-det"):
        raise ValueError(f"unknown kind {kind!r}")
    if M < 1:
        raise ValueError("M must be >= 1")
    sizes = []
    m = 1
    while m < M:
        sizes.append(m)
        m *= 2
    sizes.append(M)
    hist = []
    prev_root = None
    for m in sizes:
        X = np.asarray(build(m), dtype=complex)
        d = det_c(np.eye(X.shape[0]) - X)
        if kind == "sqrt-det":
            r = cmath.sqrt(d)
            if prev_root is not None and abs(r + prev_root) < abs(r - prev_root):
                r = -r
            prev_root = r
            d = r
        hist.append((m, d))
    est = abs(hist[-1][1] - hist[-2][1]) if len(hist) > 1 else 0.0
    scale = floor * max(1.0, abs(hist[-1][1]))
    if len(hist) > 2:
        before = abs(hist[-2][1] - hist[-3][1])
        if est > scale and est >= before:
            raise TruncationNotConverged(
                f"truncation not converged: estimate {est:.3g} at M={M} did not decrease from {before:.3g}"
            )
    return FredholmResult(hist[-1][1], est, M, tuple(hist))


def as_builder(X) -> Callable[[int], np.ndarray]:
    """Builder returning the leading m x m corner of a fixed matrix."""
    A = np.asarray(X, dtype=complex)
    return lambda m: A[:m, :m]
