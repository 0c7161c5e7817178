"""Seeded Gaussian-mixture data generation.

Sampling layout is fixed: for each point one row of uniforms is drawn from a
PCG64 stream, ``[u_component, u_1, ..., u_2m]`` with ``m = ceil(dim / 2)``.
The first uniform picks the component by inverse CDF over the weights; the
remaining pairs go through Box-Muller to give standard normals ``z``; the
point is ``mean + L @ z`` with ``L`` the Cholesky factor of the covariance.
Changing any of this changes every generated dataset, so don't.
"""

from __future__ import annotations

import json
from dataclasses import dataclass, field

import numpy as np

from lloydlab.core import Assignments, Dataset


class MixtureSpecError(ValueError):
    pass


class PresetNotFound(KeyError):
    pass


@dataclass(frozen=True)
class MixtureComponent:
    weight: float
    mean: tuple
    covariance: np.ndarray = field(repr=False)

    def __post_init__(self):
        mean = tuple(float(m) for m in np.asarray(self.mean, dtype=np.float64).reshape(-1))
        dim = len(mean)
        cov = np.asarray(self.covariance, dtype=np.float64)
        # a flat list of length dim is shorthand for a diagonal covariance
        if cov.ndim == 1 and cov.size == dim:
            cov = np.diag(cov)
        if cov.shape != (dim, dim):
            raise MixtureSpecError(f"covariance shape {cov.shape} does not match mean dim {dim}")
        if not (np.isfinite(cov).all() and np.isfinite(mean).all()):
            raise MixtureSpecError("non-finite mean or covariance")
        if not np.allclose(cov, cov.T, rtol=0, atol=1e-12):
            raise MixtureSpecError("covariance is not symmetric")
        if not self.weight > 0:
            raise MixtureSpecError(f"component weight must be positive, got {self.weight}")
        object.__setattr__(self, "mean", mean)
        object.__setattr__(self, "covariance", cov)
        object.__setattr__(self, "weight", float(self.weight))

    @property
    def dim(self) -> int:
        return len(self.mean)

    def cholesky(self) -> np.ndarray:
        try:
            return np.linalg.cholesky(self.covariance)
        except np.linalg.LinAlgError:
            raise MixtureSpecError("covariance is not positive-definite") from None


@dataclass(frozen=True)
class MixtureSpec:
    dim: int
    components: tuple
    seed: int = 0

    def __post_init__(self):
        comps = tuple(self.components)
        if not comps:
            raise MixtureSpecError("mixture needs at least one component")
        for c in comps:
            if c.dim != self.dim:
                raise MixtureSpecError(f"component dim {c.dim} != mixture dim {self.dim}")
        total = sum(c.weight for c in comps)
        if abs(total - 1.0) > 1e-9:
            raise MixtureSpecError(f"weights sum to {total!r}, expected 1")
        if self.seed < 0:
            raise MixtureSpecError("seed must be non-negative")
        object.__setattr__(self, "components", comps)

    @property
    def means(self) -> np.ndarray:
        return np.array([c.mean for c in self.components])

    def to_json(self) -> dict:
        return {
            "dim": self.dim,
            "seed": self.seed,
            "components": [
                {"weight": c.weight, "mean": list(c.mean), "cov": c.covariance.tolist()}
                for c in self.components
            ],
        }

    @classmethod
    def from_json(cls, doc: dict) -> "MixtureSpec":
        try:
            comps = [
                MixtureComponent(c["weight"], c["mean"], c["cov"]) for c in doc["components"]
            ]
            return cls(dim=int(doc["dim"]), components=tuple(comps), seed=int(doc.get("seed", 0)))
        except (KeyError, TypeError) as exc:
            raise MixtureSpecError(f"malformed mixture spec: {exc!r}") from None

    @classmethod
    def load(cls, path) -> "MixtureSpec":
        with open(path) as fh:
            try:
                doc = json.load(fh)
            except json.JSONDecodeError as exc:
                raise MixtureSpecError(f"{path}: {exc}") from None
        return cls.from_json(doc)


def sample(spec: MixtureSpec, n: int) -> tuple[Dataset, Assignments]:
    """Draw ``n`` points and their true component labels.

    Output depends only on ``(spec, n)``; the same inputs give bit-identical
    coordinates on every call.
    """
    if n < 1:
        raise ValueError(f"n must be >= 1, got {n}")
    factors = np.stack([c.cholesky() for c in spec.components])
    means = spec.means
    cdf = np.cumsum([c.weight for c in spec.components])
    cdf /= cdf[-1]

    pairs = (spec.dim + 1) // 2
    rng = np.random.Generator(np.random.PCG64(spec.seed))
    u = rng.random((n, 1 + 2 * pairs))

    labels = np.searchsorted(cdf, u[:, 0], side="right")
    np.minimum(labels, len(cdf) - 1, out=labels)

    radius = np.sqrt(-2.0 * np.log1p(-u[:, 1::2]))
    theta = 2.0 * np.pi * u[:, 2::2]
    z = np.empty((n, 2 * pairs))
    z[:, 0::2] = radius * np.cos(theta)
    z[:, 1::2] = radius * np.sin(theta)
    z = z[:, : spec.dim]

    points = means[labels] + np.einsum("nij,nj->ni", factors[labels], z)
    return Dataset(points), Assignments(labels, k=len(spec.components))


def _isotropic(weight, mean, var):
    return MixtureComponent(weight, mean, [var] * len(mean))


def _grid_2d(seed: int) -> MixtureSpec:
    # 8 components on a 4x2 grid, spacing 10, unit variance: >= 10 sigma apart
    means = [(10.0 * i, 10.0 * j) for j in range(2) for i in range(4)]
    comps = tuple(_isotropic(0.125, m, 1.0) for m in means)
    return MixtureSpec(dim=2, components=comps, seed=seed)


def _tetra_3d(seed: int) -> MixtureSpec:
    means = [(0.0, 0.0, 0.0), (10.0, 10.0, 0.0), (10.0, 0.0, 10.0), (0.0, 10.0, 10.0)]
    comps = tuple(_isotropic(0.25, m, 1.0) for m in means)
    return MixtureSpec(dim=3, components=comps, seed=seed)


@dataclass(frozen=True)
class Preset:
    name: str
    n: int
    mixture: MixtureSpec
    k: int

    def generate(self, n: int | None = None) -> tuple[Dataset, Assignments]:
        return sample(self.mixture, self.n if n is None else n)


_SIZES_2D = {"100k": 100_000, "200k": 200_000, "500k": 500_000}
_SIZES_3D = {"100k": 100_000, "200k": 200_000, "400k": 400_000, "800k": 800_000, "1m": 1_000_000}


def preset_specs() -> dict[str, Preset]:
    """Built-in datasets at the benchmark sizes: 2-D with 8 clusters, 3-D with 4."""
    presets = {}
    for tag, n in _SIZES_2D.items():
        presets[f"2d-{tag}"] = Preset(f"2d-{tag}", n, _grid_2d(seed=2000 + n // 1000), k=8)
    for tag, n in _SIZES_3D.items():
        presets[f"3d-{tag}"] = Preset(f"3d-{tag}", n, _tetra_3d(seed=3000 + n // 1000), k=4)
    return presets


def get_preset(name: str) -> Preset:
    presets = preset_specs()
    try:
        return presets[name]
    except KeyError:
        raise PresetNotFound(f"unknown preset {name!r}; choose from {', '.join(presets)}") from None
