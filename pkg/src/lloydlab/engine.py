"""Lloyd's algorithm with three execution strategies.

``serial``      single pass over all points per step.
``persistent``  p worker threads spawned once before the loop; each owns a
                contiguous chunk, merges its partial sums into shared
                accumulators under a lock (in ascending worker order), and
                meets the others at two barriers per iteration.  Worker 0
                computes the new centroids and the stop decision.
``forkjoin``    every iteration forks p fresh threads for the assignment
                step, joins, forks again for the accumulation step, joins,
                then reduces the partials in ascending worker order.

Every strategy runs the same compiled kernels over contiguous row ranges, so
p=1 reproduces the serial arithmetic exactly and larger p only changes the
association order of the final K*d partial sums.
"""

from __future__ import annotations

import math
import threading
import time
from dataclasses import dataclass, field

import numpy as np

from lloydlab import _kernels
from lloydlab.core import (
    Assignments,
    Centroids,
    Dataset,
    UsageError,
    centroid_shift_error,
)

STRATEGIES = ("serial", "persistent", "forkjoin")


@dataclass(frozen=True)
class ClusterParams:
    k: int
    tolerance: float = 1e-6
    max_iterations: int = 500
    seed: int = 0
    strategy: str = "serial"
    threads: int = 1

    def __post_init__(self):
        if self.k < 1:
            raise UsageError(f"k must be >= 1, got {self.k}")
        if not self.tolerance > 0:
            raise UsageError(f"tolerance must be positive, got {self.tolerance}")
        if self.max_iterations < 1:
            raise UsageError(f"max_iterations must be >= 1, got {self.max_iterations}")
        if self.threads < 1:
            raise UsageError(f"threads must be >= 1, got {self.threads}")
        if self.seed < 0:
            raise UsageError(f"seed must be non-negative, got {self.seed}")
        if self.strategy not in STRATEGIES:
            raise UsageError(f"unknown strategy {self.strategy!r}; expected one of {STRATEGIES}")

    def check(self, ds: Dataset) -> None:
        if self.k > ds.n:
            raise UsageError(f"k={self.k} exceeds the number of points n={ds.n}")

    def as_dict(self) -> dict:
        return {
            "k": self.k,
            "tolerance": self.tolerance,
            "max_iterations": self.max_iterations,
            "seed": self.seed,
            "strategy": self.strategy,
            "threads": self.threads,
        }


@dataclass
class ClusteringResult:
    centroids: Centroids
    assignments: Assignments
    iterations: int
    shift_trace: list[float]
    # objective_trace[t] is the cost of the step-t labels against the step-t centers
    objective_trace: list[float]
    wall_time: float
    converged: bool
    tolerance: float
    initial_centroids: Centroids
    label_history: list[np.ndarray] | None = None
    # number of parallel regions forked (forkjoin only; 0 otherwise)
    fork_count: int = 0
    stop_reason: str = ""

    @property
    def final_shift(self) -> float:
        return self.shift_trace[-1]


def partition(n: int, p: int) -> list[tuple[int, int]]:
    """Contiguous chunks of ``ceil(n / p)`` rows; trailing chunks may be short or empty."""
    if n < 0 or p < 1:
        raise UsageError(f"cannot partition n={n} into p={p} chunks")
    size = math.ceil(n / p) if n else 0
    return [(min(c * size, n), min((c + 1) * size, n)) for c in range(p)]


def init_centroids(ds: Dataset, k: int, seed: int) -> Centroids:
    """Copy ``k`` dataset points chosen uniformly without replacement."""
    return Centroids(ds.points[init_indices(ds.n, k, seed)])


def init_indices(n: int, k: int, seed: int) -> np.ndarray:
    """Row indices ``init_centroids`` copies, in the order it copies them."""
    if not 1 <= k <= n:
        raise UsageError(f"k must be in [1, n={n}], got {k}")
    rng = np.random.Generator(np.random.PCG64(seed))
    return rng.choice(n, size=k, replace=False)


def assign_step(ds: Dataset, c: Centroids, labels: np.ndarray) -> int:
    """Relabel every point in place with its nearest center; return how many labels changed."""
    _check_labels_buffer(ds, labels)
    if c.dim != ds.dim:
        raise UsageError(f"dimension mismatch: dataset {ds.dim} vs centroids {c.dim}")
    changed, _ = _kernels.assign_range(ds.points, c.centers, labels, 0, ds.n)
    return int(changed)


def update_step(
    ds: Dataset, labels, k: int, prev: Centroids
) -> tuple[Centroids, np.ndarray]:
    """Mean of each cluster's members; empty clusters keep their previous center."""
    labels = np.ascontiguousarray(labels, dtype=np.int64)
    if labels.shape != (ds.n,):
        raise UsageError(f"labels length {labels.size} != n {ds.n}")
    if labels.min() < 0 or labels.max() >= k:
        raise UsageError(f"labels must lie in [0, {k})")
    sums = np.zeros((k, ds.dim))
    counts = np.zeros(k, dtype=np.int64)
    _kernels.accumulate_range(ds.points, labels, sums, counts, 0, ds.n)
    return _finish_means(sums, counts, prev), counts


def _finish_means(sums: np.ndarray, counts: np.ndarray, prev: Centroids) -> Centroids:
    centers = prev.centers.copy()
    nonempty = counts > 0
    centers[nonempty] = sums[nonempty] / counts[nonempty, None]
    return Centroids(centers)


def _check_labels_buffer(ds: Dataset, labels: np.ndarray) -> None:
    if not (
        isinstance(labels, np.ndarray)
        and labels.dtype == np.int64
        and labels.shape == (ds.n,)
        and labels.flags.c_contiguous
        and labels.flags.writeable
    ):
        raise UsageError("labels must be a writeable contiguous int64 array of length n")


class _Trace:
    """Per-iteration bookkeeping shared by all strategies."""

    def __init__(self, tolerance: float, max_iterations: int, record_labels: bool):
        self.tolerance = tolerance
        self.max_iterations = max_iterations
        self.shifts: list[float] = []
        self.objectives: list[float] = []
        self.history: list[np.ndarray] | None = [] if record_labels else None
        self.stop_reason = ""

    def step(self, prev: Centroids, new: Centroids, changed: int, objective: float, labels) -> bool:
        """Record one finished iteration; return True when the loop should stop."""
        shift = centroid_shift_error(prev, new)
        self.shifts.append(shift)
        self.objectives.append(float(objective))
        if self.history is not None:
            self.history.append(labels.copy())
        if shift < self.tolerance:
            self.stop_reason = "tolerance"
        elif changed == 0:
            self.stop_reason = "no-reassignment"
        elif len(self.shifts) >= self.max_iterations:
            self.stop_reason = "max-iterations"
        return bool(self.stop_reason)


def run(
    ds: Dataset,
    params: ClusterParams,
    *,
    record_labels: bool = False,
    initial: Centroids | None = None,
    clock=time.perf_counter,
) -> ClusteringResult:
    """Cluster ``ds`` with the strategy named in ``params``.

    ``initial`` overrides random initialisation.  ``clock`` is read just
    before the strategy starts (so persistent worker spawn is included) and
    once after the loop ends; initialisation and validation are not timed.
    """
    params.check(ds)
    if initial is None:
        initial = init_centroids(ds, params.k, params.seed)
    elif initial.k != params.k or initial.dim != ds.dim:
        raise UsageError(
            f"initial centroids shape ({initial.k}, {initial.dim}) != ({params.k}, {ds.dim})"
        )
    body = {"serial": _run_serial, "persistent": _run_persistent, "forkjoin": _run_forkjoin}
    trace = _Trace(params.tolerance, params.max_iterations, record_labels)
    labels = np.full(ds.n, -1, dtype=np.int64)
    _kernels.prime(ds.points, initial.centers, labels)
    t0 = clock()
    centroids, forks = body[params.strategy](ds, params, initial, labels, trace)
    wall = clock() - t0
    return ClusteringResult(
        centroids=centroids,
        assignments=Assignments(labels, k=params.k),
        iterations=len(trace.shifts),
        shift_trace=trace.shifts,
        objective_trace=trace.objectives,
        wall_time=wall,
        converged=trace.shifts[-1] < params.tolerance,
        tolerance=params.tolerance,
        initial_centroids=initial,
        label_history=trace.history,
        fork_count=forks,
        stop_reason=trace.stop_reason,
    )


def run_serial(ds: Dataset, params: ClusterParams, **kw) -> ClusteringResult:
    return run(ds, _with_strategy(params, "serial"), **kw)


def run_persistent(ds: Dataset, params: ClusterParams, **kw) -> ClusteringResult:
    return run(ds, _with_strategy(params, "persistent"), **kw)


def run_forkjoin(ds: Dataset, params: ClusterParams, **kw) -> ClusteringResult:
    return run(ds, _with_strategy(params, "forkjoin"), **kw)


def _with_strategy(params: ClusterParams, strategy: str) -> ClusterParams:
    if params.strategy == strategy:
        return params
    return ClusterParams(**{**params.as_dict(), "strategy": strategy})


def _run_serial(ds, params, centroids, labels, trace):
    pts = ds.points
    sums = np.zeros((params.k, ds.dim))
    counts = np.zeros(params.k, dtype=np.int64)
    while True:
        changed, objective = _kernels.assign_range(pts, centroids.centers, labels, 0, ds.n)
        sums.fill(0.0)
        counts.fill(0)
        _kernels.accumulate_range(pts, labels, sums, counts, 0, ds.n)
        new = _finish_means(sums, counts, centroids)
        stop = trace.step(centroids, new, changed, objective, labels)
        centroids = new
        if stop:
            return centroids, 0


@dataclass
class _Shared:
    """State the persistent workers share; only touched under ``lock`` or between barriers."""

    centroids: Centroids
    sums: np.ndarray
    counts: np.ndarray
    changed: int = 0
    objective: float = 0.0
    next_merge: int = 0
    stop: bool = False
    error: BaseException | None = None
    lock: threading.Lock = field(default_factory=threading.Lock)
    turn: threading.Condition = field(init=False)

    def __post_init__(self):
        self.turn = threading.Condition(self.lock)


def _run_persistent(ds, params, centroids, labels, trace):
    p = params.threads
    k, dim = params.k, ds.dim
    chunks = partition(ds.n, p)
    shared = _Shared(centroids, np.zeros((k, dim)), np.zeros(k, dtype=np.int64))
    barrier = threading.Barrier(p)

    def worker(wid: int) -> None:
        start, stop = chunks[wid]
        local_sums = np.zeros((k, dim))
        local_counts = np.zeros(k, dtype=np.int64)
        try:
            while True:
                local_sums.fill(0.0)
                local_counts.fill(0)
                changed, objective = _kernels.assign_accumulate_range(
                    ds.points, shared.centroids.centers, labels,
                    local_sums, local_counts, start, stop,
                )
                # critical section, entered in ascending worker id
                with shared.turn:
                    shared.turn.wait_for(
                        lambda: shared.next_merge == wid or shared.error is not None
                    )
                    if shared.error is not None:
                        return
                    shared.sums += local_sums
                    shared.counts += local_counts
                    shared.changed += changed
                    shared.objective += objective
                    shared.next_merge += 1
                    shared.turn.notify_all()
                barrier.wait()
                if wid == 0:
                    prev = shared.centroids
                    new = _finish_means(shared.sums, shared.counts, prev)
                    shared.stop = trace.step(prev, new, shared.changed, shared.objective, labels)
                    shared.centroids = new
                    shared.sums.fill(0.0)
                    shared.counts.fill(0)
                    shared.changed = 0
                    shared.objective = 0.0
                    shared.next_merge = 0
                barrier.wait()
                if shared.stop:
                    return
        except threading.BrokenBarrierError:
            return
        except BaseException as exc:  # surface worker failures to the caller
            with shared.turn:
                if shared.error is None:
                    shared.error = exc
                shared.turn.notify_all()
            barrier.abort()

    threads = [threading.Thread(target=worker, args=(w,), daemon=True) for w in range(p)]
    for t in threads:
        t.start()
    for t in threads:
        t.join()
    if shared.error is not None:
        raise shared.error
    return shared.centroids, 0


def _fork(p: int, target, *args) -> None:
    """Run ``target(wid, *args)`` on p fresh threads and join them all."""
    errors: list[BaseException] = []

    def wrapped(wid):
        try:
            target(wid, *args)
        except BaseException as exc:
            errors.append(exc)

    threads = [threading.Thread(target=wrapped, args=(w,)) for w in range(p)]
    for t in threads:
        t.start()
    for t in threads:
        t.join()
    if errors:
        raise errors[0]


def _run_forkjoin(ds, params, centroids, labels, trace):
    p = params.threads
    k, dim = params.k, ds.dim
    chunks = partition(ds.n, p)
    changed = np.zeros(p, dtype=np.int64)
    objective = np.zeros(p)
    part_sums = np.zeros((p, k, dim))
    part_counts = np.zeros((p, k), dtype=np.int64)
    forks = 0

    def assign_region(wid, centers):
        start, stop = chunks[wid]
        changed[wid], objective[wid] = _kernels.assign_range(
            ds.points, centers, labels, start, stop
        )

    def accumulate_region(wid):
        start, stop = chunks[wid]
        part_sums[wid].fill(0.0)
        part_counts[wid].fill(0)
        _kernels.accumulate_range(ds.points, labels, part_sums[wid], part_counts[wid], start, stop)

    while True:
        _fork(p, assign_region, centroids.centers)
        _fork(p, accumulate_region)
        forks += 2
        sums = np.zeros((k, dim))
        counts = np.zeros(k, dtype=np.int64)
        total_obj = 0.0
        for w in range(p):
            sums += part_sums[w]
            counts += part_counts[w]
            total_obj += objective[w]
        new = _finish_means(sums, counts, centroids)
        stop = trace.step(centroids, new, int(changed.sum()), total_obj, labels)
        centroids = new
        if stop:
            return centroids, forks
