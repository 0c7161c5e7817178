"""Compiled inner loops shared by every execution strategy.

All kernels work on a half-open row range ``[start, stop)`` so that the
serial engine and each parallel worker run the exact same arithmetic in the
same order.  They are compiled with ``nogil=True`` so threads can execute them
concurrently, and without ``fastmath`` so summation order stays IEEE-strict.
"""

import numpy as np
from numba import njit


@njit(cache=True, nogil=True)
def sq_dist(points, i, centers, k):
    dim = points.shape[1]
    acc = 0.0
    for j in range(dim):
        diff = points[i, j] - centers[k, j]
        acc += diff * diff
    return acc


@njit(cache=True, nogil=True)
def assign_range(points, centers, labels, start, stop):
    """Relabel rows in ``[start, stop)``; return (changed, sum of min distances)."""
    n_clusters = centers.shape[0]
    changed = 0
    objective = 0.0
    for i in range(start, stop):
        best = 0
        best_d = sq_dist(points, i, centers, 0)
        for k in range(1, n_clusters):
            d = sq_dist(points, i, centers, k)
            # strict comparison keeps the lowest index on ties
            if d < best_d:
                best_d = d
                best = k
        if labels[i] != best:
            labels[i] = best
            changed += 1
        objective += best_d
    return changed, objective


@njit(cache=True, nogil=True)
def accumulate_range(points, labels, sums, counts, start, stop):
    """Add rows in ``[start, stop)`` into per-cluster ``sums`` and ``counts``."""
    dim = points.shape[1]
    for i in range(start, stop):
        k = labels[i]
        counts[k] += 1
        for j in range(dim):
            sums[k, j] += points[i, j]


@njit(cache=True, nogil=True)
def assign_accumulate_range(points, centers, labels, sums, counts, start, stop):
    """Fused relabel + accumulate pass used by the persistent workers."""
    changed, objective = assign_range(points, centers, labels, start, stop)
    accumulate_range(points, labels, sums, counts, start, stop)
    return changed, objective


@njit(cache=True, nogil=True)
def objective_range(points, centers, labels, start, stop):
    acc = 0.0
    for i in range(start, stop):
        acc += sq_dist(points, i, centers, labels[i])
    return acc


def prime(points, centers, labels):
    """Compile (or load from cache) every kernel for these exact array types.

    Runs each kernel over an empty range, so it costs nothing but dispatch.
    """
    k, dim = centers.shape
    sums = np.zeros((k, dim))
    counts = np.zeros(k, dtype=np.int64)
    assign_range(points, centers, labels, 0, 0)
    accumulate_range(points, labels, sums, counts, 0, 0)
    assign_accumulate_range(points, centers, labels, sums, counts, 0, 0)
    objective_range(points, centers, labels, 0, 0)
