"""Laurent coefficients from trapezoidal quadrature on circles.

On a circle the trapezoid rule is the discrete Fourier transform, so all
coefficients a_j, j = 0..K-1, come out of one FFT:

    a_j = (1/2 pi i) \\oint f(c + s) s^{-j-1} ds  ~=  r^{-j} FFT(f)_j / N.

Node counts double until the raw (radius-scaled) coefficients stop moving.
"""

from __future__ import annotations

import math
from typing import Callable

import numpy as np


class QuadratureNotConverged(RuntimeError):
    pass


def _start_nodes(n_quad: int, kmax: int) -> int:
    n = n_quad
    while n < 4 * kmax:
        n *= 2
    return n


def circle_nodes(center: complex, r: float, n: int) -> np.ndarray:
    return center + r * np.exp(2j * math.pi * np.arange(n) / n)


def laurent_1d(f: Callable[[np.ndarray], np.ndarray], center: complex, r: float, kmax: int,
               n_quad: int = 64, n_max: int = 4096, tol: float = 1e-12, lo: int = 0) -> np.ndarray:
    """a_j for j = lo..lo+kmax-1 of f(c + s) = sum a_j s^j on the annulus through |s| = r.

    ``f`` may return shape (..., n) for a batch of functions; the last axis is the node axis.
    """
    n = _start_nodes(n_quad, kmax + abs(lo))
    prev = None
    while True:
        raw = np.fft.fft(f(circle_nodes(center, r, n)), axis=-1) / n
        j = np.arange(lo, lo + kmax)
        b = raw[..., j % n]
        if prev is not None:
            scale = max(1.0, float(np.max(np.abs(raw))))
            if np.max(np.abs(b - prev)) <= tol * scale:
                return b * float(r) ** (-j.astype(float))
        if 2 * n > n_max:
            if prev is None:
                raise QuadratureNotConverged("n_max below the starting node count")
            delta = float(np.max(np.abs(b - prev)))
            raise QuadratureNotConverged(f"quadrature not converged: doubling to {n} nodes moved a moment by {delta:.3g}")
        prev = b
        n *= 2


def laurent_2d(f: Callable[[np.ndarray, np.ndarray], np.ndarray], cx: complex, rx: float,
               cy: complex, ry: float, kmax: int, lmax: int, n_quad: int = 64, n_max: int = 2048,
               tol: float = 1e-12) -> np.ndarray:
    """a_{jk} (j < kmax, k < lmax) of f(cx + s, cy + t) = sum a_{jk} s^j t^k.

    ``f(xs, ys)`` gets 1-d node arrays and must return the len(xs) x len(ys) grid.
    """
    n = _start_nodes(n_quad, max(kmax, lmax))
    prev = None
    while True:
        xs = circle_nodes(cx, rx, n)
        ys = circle_nodes(cy, ry, n)
        raw = np.fft.fft2(f(xs, ys)) / (n * n)
        b = raw[:kmax, :lmax]
        if prev is not None:
            scale = max(1.0, float(np.max(np.abs(raw))))
            if np.max(np.abs(b - prev)) <= tol * scale:
                j = np.arange(kmax, dtype=float)[:, None]
                k = np.arange(lmax, dtype=float)[None, :]
                return b * float(rx) ** (-j) * float(ry) ** (-k)
        if 2 * n > n_max:
            delta = float(np.max(np.abs(b - prev))) if prev is not None else math.inf
            raise QuadratureNotConverged(f"quadrature not converged: doubling to {n} nodes moved a moment by {delta:.3g}")
        prev = b
        n *= 2
