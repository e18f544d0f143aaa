"""Finite-difference weights and dense radial differentiation matrices."""

from __future__ import annotations

from functools import lru_cache

import numpy as np


def fornberg_weights(x0: float, x: np.ndarray, m: int) -> np.ndarray:
    """Weights for derivatives of order 0..m at ``x0`` from nodes ``x``.

    Returns an array ``w`` of shape (m + 1, len(x)) with
    ``f^(d)(x0) ~ w[d] @ f(x)``.
    """
    x = np.asarray(x, dtype=float)
    n = len(x)
    w = np.zeros((m + 1, n))
    w[0, 0] = 1.0
    c1 = 1.0
    c4 = x[0] - x0
    for i in range(1, n):
        mn = min(i, m)
        c2 = 1.0
        c5 = c4
        c4 = x[i] - x0
        for j in range(i):
            c3 = x[i] - x[j]
            c2 *= c3
            if j == i - 1:
                for k in range(mn, 0, -1):
                    w[k, i] = c1 * (k * w[k - 1, i - 1] - c5 * w[k, i - 1]) / c2
                w[0, i] = -c1 * c5 * w[0, i - 1] / c2
            for k in range(mn, 0, -1):
                w[k, j] = (c4 * w[k, j] - k * w[k - 1, j]) / c3
            w[0, j] = c4 * w[0, j] / c3
        c1 = c2
    return w


def _stencil(i: int, n: int, width: int) -> slice:
    lo = min(max(i - width // 2, 0), n - width)
    return slice(lo, lo + width)


@lru_cache(maxsize=64)
def _matrices(r_key: tuple, order: int) -> tuple[np.ndarray, np.ndarray, np.ndarray]:
    r = np.array(r_key)
    n = len(r)
    if order % 2 or order < 2:
        raise ValueError("fd order must be an even integer >= 2")
    if n < order + 3:
        raise ValueError(f"need at least {order + 3} radial nodes for order {order}")
    d1 = np.zeros((n, n))
    d2 = np.zeros((n, n))
    for i in range(n):
        # centred stencils have order+1 points; shifted ones near the ends
        # need one more point to keep the same order for the second derivative
        centred = order // 2 <= i < n - order // 2
        s = _stencil(i, n, order + 1 if centred else order + 2)
        w = fornberg_weights(r[i], r[s], 2)
        d1[i, s] = w[1]
        d2[i, s] = w[2]
    # boundary traces get one extra point (one order higher than the interior)
    s = slice(0, order + 2)
    trace = fornberg_weights(r[0], r[s], 1)[1]
    t = np.zeros(n)
    t[s] = trace
    for a in (d1, d2, t):
        a.setflags(write=False)
    return d1, d2, t


def radial_matrices(r: np.ndarray, order: int = 6) -> tuple[np.ndarray, np.ndarray]:
    """First and second derivative matrices of the given accuracy order."""
    d1, d2, _ = _matrices(tuple(np.asarray(r, dtype=float)), order)
    return d1, d2


def inner_trace_row(r: np.ndarray, order: int = 6) -> np.ndarray:
    """One-sided row approximating d/dr at ``r[0]`` with ``order + 2`` points."""
    return _matrices(tuple(np.asarray(r, dtype=float)), order)[2]
