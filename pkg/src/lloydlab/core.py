"""Value types and distance primitives shared by all engine strategies."""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from lloydlab import _kernels


class UsageError(ValueError):
    """Raised on shape mismatches and invalid arguments."""


def _frozen(arr: np.ndarray) -> np.ndarray:
    arr.flags.writeable = False
    return arr


@dataclass(frozen=True)
class Dataset:
    """N points of dimension ``dim`` stored point-major as a C-contiguous (n, dim) float64 array."""

    points: np.ndarray

    def __post_init__(self):
        pts = np.array(self.points, dtype=np.float64, order="C", copy=True)
        if pts.ndim == 1:
            pts = pts.reshape(-1, 1)
        if pts.ndim != 2:
            raise UsageError(f"points must be 2-D (n, dim), got shape {pts.shape}")
        if pts.shape[0] < 1 or pts.shape[1] < 1:
            raise UsageError(f"dataset needs n >= 1 and dim >= 1, got shape {pts.shape}")
        if not np.isfinite(pts).all():
            raise UsageError("dataset contains NaN or infinite coordinates")
        object.__setattr__(self, "points", _frozen(pts))

    @classmethod
    def from_flat(cls, flat, dim: int) -> "Dataset":
        flat = np.asarray(flat, dtype=np.float64)
        if dim < 1 or flat.size % dim:
            raise UsageError(f"{flat.size} coordinates do not split into points of dim {dim}")
        return cls(flat.reshape(-1, dim))

    @property
    def n(self) -> int:
        return self.points.shape[0]

    @property
    def dim(self) -> int:
        return self.points.shape[1]

    @property
    def flat(self) -> np.ndarray:
        return self.points.reshape(-1)


@dataclass(frozen=True)
class Centroids:
    centers: np.ndarray

    def __post_init__(self):
        ctr = np.array(self.centers, dtype=np.float64, order="C", copy=True)
        if ctr.ndim != 2 or ctr.shape[0] < 1 or ctr.shape[1] < 1:
            raise UsageError(f"centers must be a non-empty (k, dim) array, got shape {ctr.shape}")
        if not np.isfinite(ctr).all():
            raise UsageError("centroids contain NaN or infinite coordinates")
        object.__setattr__(self, "centers", _frozen(ctr))

    @property
    def k(self) -> int:
        return self.centers.shape[0]

    @property
    def dim(self) -> int:
        return self.centers.shape[1]


@dataclass(frozen=True)
class Assignments:
    labels: np.ndarray
    k: int

    def __post_init__(self):
        lab = np.array(self.labels, dtype=np.int64, copy=True).reshape(-1)
        if lab.size and (lab.min() < 0 or lab.max() >= self.k):
            raise UsageError(f"labels must lie in [0, {self.k})")
        object.__setattr__(self, "labels", _frozen(lab))

    @property
    def n(self) -> int:
        return self.labels.shape[0]


@dataclass(frozen=True)
class ConvergenceState:
    iteration: int
    shift_error: float
    tolerance: float

    @property
    def converged(self) -> bool:
        return self.shift_error < self.tolerance


def squared_l2(a, b) -> float:
    a = np.asarray(a, dtype=np.float64).reshape(-1)
    b = np.asarray(b, dtype=np.float64).reshape(-1)
    if a.shape != b.shape:
        raise UsageError(f"dimension mismatch: {a.size} vs {b.size}")
    return float(_kernels.sq_dist(a.reshape(1, -1), 0, b.reshape(1, -1), 0))


def nearest_centroid(x, c: Centroids) -> int:
    """Index of the closest center; ties go to the lowest index."""
    x = np.asarray(x, dtype=np.float64).reshape(1, -1)
    if x.shape[1] != c.dim:
        raise UsageError(f"dimension mismatch: point {x.shape[1]} vs centroids {c.dim}")
    labels = np.full(1, -1, dtype=np.int64)
    _kernels.assign_range(x, c.centers, labels, 0, 1)
    return int(labels[0])


def compute_objective(ds: Dataset, c: Centroids, a: Assignments) -> float:
    """Sum of squared distances from each point to its assigned center."""
    if ds.dim != c.dim or a.n != ds.n or a.k != c.k:
        raise UsageError(
            f"shape mismatch: dataset ({ds.n}, {ds.dim}), centroids ({c.k}, {c.dim}), "
            f"assignments n={a.n} k={a.k}"
        )
    return float(_kernels.objective_range(ds.points, c.centers, a.labels, 0, ds.n))


def centroid_shift_error(prev: Centroids, next: Centroids) -> float:
    """Sum over clusters of the squared move between two centroid sets."""
    if prev.centers.shape != next.centers.shape:
        raise UsageError(f"shape mismatch: {prev.centers.shape} vs {next.centers.shape}")
    total = 0.0
    for k in range(prev.k):
        total += _kernels.sq_dist(prev.centers, k, next.centers, k)
    return float(total)


def greedy_match(a: np.ndarray, b: np.ndarray) -> np.ndarray:
    """Pair rows of ``a`` with rows of ``b`` by repeatedly taking the closest unused pair.

    Returns ``perm`` with ``perm[j]`` the row of ``a`` matched to row ``j`` of ``b``.
    Both inputs must have the same shape.
    """
    a = np.asarray(a, dtype=np.float64)
    b = np.asarray(b, dtype=np.float64)
    if a.shape != b.shape:
        raise UsageError(f"cannot match {a.shape} against {b.shape}")
    k = a.shape[0]
    d = ((a[:, None, :] - b[None, :, :]) ** 2).sum(axis=2)
    perm = np.full(k, -1, dtype=np.int64)
    # stable sort: equal distances resolve by (row of a, row of b)
    for flat in np.argsort(d, axis=None, kind="stable"):
        i, j = divmod(int(flat), k)
        if perm[j] < 0 and i not in perm:
            perm[j] = i
    return perm
