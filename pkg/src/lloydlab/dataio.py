"""CSV/JSON formats for datasets, clustering results and plot data.

Floats are written with ``repr``, which is the shortest decimal string that
parses back to the same double, so read(write(x)) is bit-exact.
"""

from __future__ import annotations

import hashlib
import json
import math
from dataclasses import dataclass
from pathlib import Path

import numpy as np

from lloydlab import __version__
from lloydlab.core import Assignments, Centroids, Dataset


class DataFormatError(ValueError):
    pass


def _fmt_rows(arr: np.ndarray) -> str:
    return "".join(",".join(map(repr, row)) + "\n" for row in arr.tolist())


def write_dataset(path, ds: Dataset, labels=None) -> Path:
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    if labels is None:
        text = _fmt_rows(ds.points)
    else:
        labels = np.asarray(getattr(labels, "labels", labels))
        if labels.shape != (ds.n,):
            raise DataFormatError(f"{ds.n} points but {labels.size} labels")
        text = "".join(
            ",".join(map(repr, row)) + f",{lab}\n"
            for row, lab in zip(ds.points.tolist(), labels.tolist())
        )
    path.write_text(text)
    return path


def load_dataset(path, expected_dim: int | None = None, has_labels: bool = False):
    """Parse a dataset CSV; return ``(Dataset, labels or None)``.

    Errors cite the 1-based line number of the offending row.
    """
    path = Path(path)
    if not path.is_file():
        raise FileNotFoundError(f"dataset file not found: {path}")
    rows: list[list[float]] = []
    labels: list[int] = []
    width = None
    with path.open() as fh:
        for lineno, line in enumerate(fh, start=1):
            line = line.strip()
            if not line:
                continue
            fields = line.split(",")
            if width is None:
                width = len(fields)
            elif len(fields) != width:
                raise DataFormatError(
                    f"{path}:{lineno}: expected {width} columns, found {len(fields)}"
                )
            if has_labels:
                try:
                    labels.append(int(fields[-1]))
                except ValueError:
                    raise DataFormatError(
                        f"{path}:{lineno}: label {fields[-1]!r} is not an integer"
                    ) from None
                fields = fields[:-1]
            try:
                values = [float(f) for f in fields]
            except ValueError as exc:
                raise DataFormatError(f"{path}:{lineno}: {exc}") from None
            if not all(math.isfinite(v) for v in values):
                raise DataFormatError(f"{path}:{lineno}: non-finite coordinate")
            rows.append(values)
    if not rows:
        raise DataFormatError(f"{path}: no data rows")
    dim = len(rows[0])
    if dim < 1:
        raise DataFormatError(f"{path}: rows carry no coordinates")
    if expected_dim is not None and dim != expected_dim:
        raise DataFormatError(f"{path}: dimension {dim} != expected {expected_dim}")
    ds = Dataset(np.array(rows, dtype=np.float64))
    return ds, (np.array(labels, dtype=np.int64) if has_labels else None)


def read_dataset(path, expected_dim: int | None = None) -> Dataset:
    return load_dataset(path, expected_dim)[0]


def dataset_hash(ds: Dataset) -> str:
    h = hashlib.sha256()
    h.update(np.asarray(ds.points.shape, dtype=np.int64).tobytes())
    h.update(ds.points.tobytes())
    return h.hexdigest()


@dataclass
class ResultBundle:
    assignments: Assignments
    centroids: Centroids
    shift_trace: list
    objective_trace: list
    meta: dict


ASSIGNMENTS = "assignments.csv"
CENTROIDS = "centroids.csv"
TRACE = "trace.csv"
META = "meta.json"


def bundle_from_result(result, params, ds: Dataset, extra: dict | None = None) -> ResultBundle:
    meta = {
        "tool": "lloydlab",
        "version": __version__,
        "params": params.as_dict(),
        "dataset": {"n": ds.n, "dim": ds.dim, "sha256": dataset_hash(ds)},
        "iterations": result.iterations,
        "converged": result.converged,
        "stop_reason": result.stop_reason,
        "final_shift_error": result.final_shift,
        "wall_time_s": result.wall_time,
    }
    if extra:
        meta.update(extra)
    return ResultBundle(
        result.assignments, result.centroids,
        list(result.shift_trace), list(result.objective_trace), meta,
    )


def write_result(out_dir, bundle: ResultBundle) -> Path:
    out = Path(out_dir)
    out.mkdir(parents=True, exist_ok=True)
    (out / ASSIGNMENTS).write_text("".join(f"{v}\n" for v in bundle.assignments.labels.tolist()))
    (out / CENTROIDS).write_text(_fmt_rows(bundle.centroids.centers))
    lines = ["iteration,shift_error,objective\n"]
    for i, (e, obj) in enumerate(zip(bundle.shift_trace, bundle.objective_trace), start=1):
        lines.append(f"{i},{e!r},{obj!r}\n")
    (out / TRACE).write_text("".join(lines))
    (out / META).write_text(json.dumps(bundle.meta, indent=2, sort_keys=True) + "\n")
    return out


def read_result(bundle_dir) -> ResultBundle:
    d = Path(bundle_dir)
    for name in (ASSIGNMENTS, CENTROIDS):
        if not (d / name).is_file():
            raise FileNotFoundError(f"bundle {d} is missing {name}")
    centers = read_dataset(d / CENTROIDS).points
    try:
        labels = np.loadtxt(d / ASSIGNMENTS, dtype=np.int64, ndmin=1)
    except ValueError as exc:
        raise DataFormatError(f"{d / ASSIGNMENTS}: {exc}") from None
    shifts, objectives = [], []
    if (d / TRACE).is_file():
        for line in (d / TRACE).read_text().splitlines()[1:]:
            _, e, obj = line.split(",")
            shifts.append(float(e))
            objectives.append(float(obj))
    meta = json.loads((d / META).read_text()) if (d / META).is_file() else {}
    k = centers.shape[0]
    if labels.size and (labels.min() < 0 or labels.max() >= k):
        raise DataFormatError(f"{d}: labels out of range for {k} centroids")
    return ResultBundle(Assignments(labels, k=k), Centroids(centers), shifts, objectives, meta)


def write_plot_data(out_dir, ds: Dataset, assignments: Assignments, centroids: Centroids) -> list[Path]:
    """One member CSV per cluster (empty clusters get an empty file) plus ``centroids.csv``."""
    out = Path(out_dir)
    out.mkdir(parents=True, exist_ok=True)
    width = len(str(max(centroids.k - 1, 0)))
    paths = []
    for k in range(centroids.k):
        p = out / f"cluster_{k:0{width}d}.csv"
        p.write_text(_fmt_rows(ds.points[assignments.labels == k]))
        paths.append(p)
    p = out / CENTROIDS
    p.write_text(_fmt_rows(centroids.centers))
    paths.append(p)
    return paths
