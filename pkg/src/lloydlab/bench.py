"""Timed runs, speedup/efficiency, and scaling sweeps.

Speedup baselines always come from the serial strategy on the same dataset
and seed within the same sweep.
"""

from __future__ import annotations

import csv
import json
import logging
import statistics
from dataclasses import asdict, dataclass, field
from pathlib import Path

from lloydlab import engine
from lloydlab.core import Dataset, UsageError

log = logging.getLogger(__name__)

BENCH_COLUMNS = (
    "dataset", "n", "dim", "k", "strategy", "threads", "seed",
    "repeat", "wall_time_s", "iterations", "converged",
)


@dataclass(frozen=True)
class BenchRecord:
    dataset: str
    n: int
    dim: int
    k: int
    strategy: str
    threads: int
    seed: int
    repeat: int
    wall_time_s: float
    iterations: int
    converged: bool

    def row(self) -> dict:
        return asdict(self)


@dataclass(frozen=True)
class SpeedupRow:
    threads: int
    median_s: float
    speedup: float
    efficiency: float


@dataclass
class SpeedupReport:
    dataset: str
    strategy: str
    baseline: BenchRecord
    baseline_median_s: float
    rows: list[SpeedupRow] = field(default_factory=list)


def speedup(t_serial: float, t_parallel: float) -> float:
    if not (t_serial > 0 and t_parallel > 0):
        raise UsageError(f"times must be positive, got {t_serial} and {t_parallel}")
    return t_serial / t_parallel


def efficiency(psi: float, p: int) -> float:
    if not psi > 0 or p < 1:
        raise UsageError(f"need speedup > 0 and p >= 1, got {psi}, {p}")
    return psi / p


def median_time(records) -> float:
    return statistics.median(r.wall_time_s for r in records)


def time_run(
    ds: Dataset,
    params: engine.ClusterParams,
    repeats: int = 3,
    *,
    name: str = "dataset",
    warmup: bool = True,
    clock=None,
) -> list[BenchRecord]:
    """Run the engine ``repeats`` times (after one discarded warm-up) and record each run.

    The recorded time is the engine's own loop timing, so dataset generation
    and file I/O never count.  ``clock`` is forwarded to the engine for tests.
    """
    if repeats < 1:
        raise UsageError(f"repeats must be >= 1, got {repeats}")
    kw = {} if clock is None else {"clock": clock}
    if warmup:
        engine.run(ds, params)
    records = []
    for i in range(repeats):
        res = engine.run(ds, params, **kw)
        records.append(BenchRecord(
            dataset=name, n=ds.n, dim=ds.dim, k=params.k,
            strategy=params.strategy, threads=params.threads, seed=params.seed,
            repeat=i, wall_time_s=res.wall_time, iterations=res.iterations,
            converged=res.converged,
        ))
    return records


@dataclass
class SweepResult:
    records: list[BenchRecord]
    reports: list[SpeedupReport]
    failures: list[dict]
    # (dataset, k, strategy, threads) -> median seconds, serial cells use threads=1
    medians: dict

    def table(self, strategy: str, k: int | None = None) -> dict:
        """``{dataset: {threads: median_s}}`` for one strategy, like the timing tables."""
        out: dict = {}
        for (ds_name, kk, strat, p), t in self.medians.items():
            if strat == strategy and (k is None or kk == k):
                out.setdefault(ds_name, {})[p] = t
        return out


def scaling_sweep(
    datasets,
    strategies=("persistent", "forkjoin"),
    threads=(2, 4, 8, 16),
    ks=(8,),
    repeats: int = 3,
    *,
    seed: int = 0,
    tolerance: float = 1e-6,
    max_iterations: int = 500,
    warmup: bool = True,
) -> SweepResult:
    """Time every (dataset, k, strategy, threads) cell sequentially.

    ``datasets`` is a sequence of ``(name, Dataset)`` or ``(name, Dataset, k)``;
    a per-dataset k overrides ``ks``.  A failing cell is logged and recorded in
    ``failures`` and the sweep moves on.
    """
    datasets = list(datasets)
    strategies = list(strategies)
    if not datasets or not strategies or not threads or not ks:
        raise UsageError("sweep grid must be non-empty")
    records: list[BenchRecord] = []
    reports: list[SpeedupReport] = []
    failures: list[dict] = []
    medians: dict = {}

    def cell(name, ds, k, strategy, p):
        try:
            params = engine.ClusterParams(
                k=k, tolerance=tolerance, max_iterations=max_iterations,
                seed=seed, strategy=strategy, threads=p,
            )
            recs = time_run(ds, params, repeats, name=name, warmup=warmup)
        except Exception as exc:
            log.warning("cell %s k=%d %s p=%d failed: %s", name, k, strategy, p, exc)
            failures.append({"dataset": name, "k": k, "strategy": strategy,
                             "threads": p, "error": repr(exc)})
            return None
        records.extend(recs)
        medians[(name, k, strategy, p)] = median_time(recs)
        return recs

    for entry in datasets:
        name, ds = entry[0], entry[1]
        for k in ([entry[2]] if len(entry) > 2 else ks):
            base = cell(name, ds, k, "serial", 1)
            for strategy in strategies:
                if strategy == "serial":
                    continue
                rep = None
                if base is not None:
                    t_base = medians[(name, k, "serial", 1)]
                    rep = SpeedupReport(name, strategy, base[0], t_base)
                    reports.append(rep)
                for p in threads:
                    recs = cell(name, ds, k, strategy, p)
                    if recs is None or rep is None:
                        continue
                    t = medians[(name, k, strategy, p)]
                    psi = speedup(t_base, t)
                    rep.rows.append(SpeedupRow(p, t, psi, efficiency(psi, p)))
    return SweepResult(records, reports, failures, medians)


def write_bench_csv(path, records) -> Path:
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    with path.open("w", newline="") as fh:
        w = csv.DictWriter(fh, fieldnames=BENCH_COLUMNS)
        w.writeheader()
        for r in records:
            w.writerow(r.row())
    return path


def speedup_json(sweep: SweepResult) -> dict:
    """Nested ``dataset -> strategy -> threads`` with medians, speedup and efficiency."""
    doc: dict = {}
    multi_k = len({rep.baseline.k for rep in sweep.reports}) > 1
    for rep in sweep.reports:
        key = f"{rep.dataset}/k={rep.baseline.k}" if multi_k else rep.dataset
        node = doc.setdefault(key, {})
        node.setdefault("serial", {"1": {"median_s": rep.baseline_median_s, "k": rep.baseline.k}})
        node[rep.strategy] = {
            str(r.threads): {"median_s": r.median_s, "speedup": r.speedup, "efficiency": r.efficiency}
            for r in rep.rows
        }
    doc["_failures"] = sweep.failures
    return doc


def write_speedup_json(path, sweep: SweepResult) -> Path:
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    path.write_text(json.dumps(speedup_json(sweep), indent=2) + "\n")
    return path


def write_figure_data(out_dir, sweep: SweepResult) -> list[Path]:
    """CSV series for speedup vs p, efficiency vs p, and time vs N."""
    out = Path(out_dir)
    out.mkdir(parents=True, exist_ok=True)
    n_of = {r.dataset: r.n for r in sweep.records}
    sp = out / "speedup_vs_threads.csv"
    ef = out / "efficiency_vs_threads.csv"
    with sp.open("w", newline="") as f1, ef.open("w", newline="") as f2:
        w1, w2 = csv.writer(f1), csv.writer(f2)
        w1.writerow(["dataset", "n", "strategy", "threads", "median_s", "speedup"])
        w2.writerow(["dataset", "n", "strategy", "threads", "speedup", "efficiency"])
        for rep in sweep.reports:
            for r in rep.rows:
                w1.writerow([rep.dataset, n_of[rep.dataset], rep.strategy, r.threads, r.median_s, r.speedup])
                w2.writerow([rep.dataset, n_of[rep.dataset], rep.strategy, r.threads, r.speedup, r.efficiency])
    tn = out / "time_vs_n.csv"
    with tn.open("w", newline="") as fh:
        w = csv.writer(fh)
        w.writerow(["dataset", "n", "k", "strategy", "threads", "median_s"])
        for (name, k, strategy, p), t in sorted(
            sweep.medians.items(), key=lambda kv: (kv[0][2], kv[0][3], n_of[kv[0][0]])
        ):
            w.writerow([name, n_of[name], k, strategy, p, t])
    return [sp, ef, tn]
