"""Desk-scale rerun of the timing tables.

Serial table: 2d-500k and 3d-1m presets at K = 4, 8, 11.
Thread tables: 2-D presets at K=8 and 3-D presets at K=4 over p = 2, 4, 8, 16,
for both parallel strategies.  Use --scale to shrink the presets.

    python scripts/reproduce_tables.py --scale 0.2 --out runs/tables
"""

import argparse
import logging
from pathlib import Path

from lloydlab import bench, datagen, engine

PRESETS_2D = ["2d-100k", "2d-200k", "2d-500k"]
PRESETS_3D = ["3d-100k", "3d-200k", "3d-400k", "3d-800k", "3d-1m"]


def load(names, scale):
    out = []
    for name in names:
        p = datagen.get_preset(name)
        ds, _ = p.generate(max(1, int(p.n * scale)))
        out.append((name, ds, p.k))
    return out


def print_table(title, rows, cols):
    print(f"\n{title}")
    print("N".ljust(10) + "".join(str(c).rjust(12) for c in cols))
    for label, cells in rows:
        print(label.ljust(10) + "".join(
            (f"{cells[c]:.6f}" if c in cells else "-").rjust(12) for c in cols))


def main():
    ap = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    ap.add_argument("--scale", type=float, default=0.1)
    ap.add_argument("--threads", default="2,4,8,16")
    ap.add_argument("--repeats", type=int, default=3)
    ap.add_argument("--seed", type=int, default=0)
    ap.add_argument("--out", default="runs/tables")
    args = ap.parse_args()
    logging.basicConfig(level=logging.WARNING)
    threads = [int(t) for t in args.threads.split(",")]
    out = Path(args.out)

    rows = []
    for name, ds, _ in load(["2d-500k", "3d-1m"], args.scale):
        cells = {}
        for k in (4, 8, 11):
            recs = bench.time_run(ds, engine.ClusterParams(k=k, seed=args.seed), args.repeats, name=name)
            cells[f"K={k}"] = bench.median_time(recs)
        rows.append((f"{ds.n} ({ds.dim}D)", cells))
    print_table("serial: time to converge (s)", rows, ["K=4", "K=8", "K=11"])

    for dim, names in (("2d", PRESETS_2D), ("3d", PRESETS_3D)):
        datasets = load(names, args.scale)
        sweep = bench.scaling_sweep(datasets, threads=threads, repeats=args.repeats, seed=args.seed)
        n_of = {name: ds.n for name, ds, _ in datasets}
        for strategy in ("persistent", "forkjoin"):
            table = sweep.table(strategy)
            print_table(f"{dim} {strategy}: time (s) vs threads",
                        [(str(n_of[name]), cells) for name, cells in table.items()], threads)
        bench.write_bench_csv(out / dim / "bench.csv", sweep.records)
        bench.write_speedup_json(out / dim / "speedup.json", sweep)
        bench.write_figure_data(out / dim, sweep)
    print(f"\nfigure data under {out}/")


if __name__ == "__main__":
    main()
