"""Exact square assignment by shortest augmenting paths with dual potentials."""

from __future__ import annotations

import numpy as np
from scipy.optimize import linear_sum_assignment

__all__ = ["hungarian", "solve_assignment"]


def hungarian(cost) -> np.ndarray:
    """Column assigned to each row minimising the total cost, O(n^3).

    Rows are inserted one at a time; each insertion runs a Dijkstra-like
    search over reduced costs and flips the alternating path it finds.
    """
    c = np.asarray(cost, dtype=float)
    if c.ndim != 2 or c.shape[0] != c.shape[1]:
        raise ValueError("cost matrix must be square")
    n = c.shape[0]
    if n == 0:
        return np.empty(0, dtype=np.int64)
    if not np.all(np.isfinite(c)):
        raise ValueError("cost matrix must be finite")
    u = np.zeros(n + 1)
    v = np.zeros(n + 1)
    match = np.zeros(n + 1, dtype=np.int64)  # match[j]: row (1-based) owning column j
    way = np.zeros(n + 1, dtype=np.int64)
    for i in range(1, n + 1):
        match[0] = i
        j0 = 0
        minv = np.full(n + 1, np.inf)
        used = np.zeros(n + 1, dtype=bool)
        while True:
            used[j0] = True
            i0 = match[j0]
            free = ~used
            free[0] = False
            reduced = c[i0 - 1] - u[i0] - v[1:]
            better = free[1:] & (reduced < minv[1:])
            minv[1:][better] = reduced[better]
            way[1:][better] = j0
            cand = np.where(free[1:], minv[1:], np.inf)
            j1 = int(np.argmin(cand)) + 1
            delta = cand[j1 - 1]
            u[match[used]] += delta
            v[used] -= delta
            minv[free] -= delta
            j0 = j1
            if match[j0] == 0:
                break
        while j0:
            j1 = way[j0]
            match[j0] = match[j1]
            j0 = j1
    cols = np.empty(n, dtype=np.int64)
    cols[match[1:] - 1] = np.arange(n)
    return cols


def solve_assignment(cost, backend: str = "hungarian") -> np.ndarray:
    """Optimal column per row; ``backend`` is ``"hungarian"`` or ``"scipy"``."""
    if backend == "hungarian":
        return hungarian(cost)
    if backend == "scipy":
        c = np.asarray(cost, dtype=float)
        if c.ndim != 2 or c.shape[0] != c.shape[1]:
            raise ValueError("cost matrix must be square")
        _, cols = linear_sum_assignment(c)
        return cols.astype(np.int64)
    raise ValueError(f"unknown backend {backend!r}")
