"""``lloydlab`` command line: gen, cluster, bench, compare.

Exit codes: 0 success, 1 comparison mismatch (or a sweep where every cell
failed), 2 usage or input error.
"""

from __future__ import annotations

import argparse
import json
import logging
import os
import sys
from pathlib import Path

import numpy as np

from lloydlab import __version__, bench, dataio, datagen, engine
from lloydlab.core import UsageError, compute_objective, greedy_match

log = logging.getLogger("lloydlab")

EXIT_OK, EXIT_MISMATCH, EXIT_USAGE = 0, 1, 2
THREADS_ENV = "LLOYDLAB_THREADS"


class CliError(Exception):
    pass


def _positive_int(text: str) -> int:
    try:
        v = int(text)
    except ValueError:
        raise argparse.ArgumentTypeError(f"not an integer: {text!r}") from None
    if v < 1:
        raise argparse.ArgumentTypeError(f"must be >= 1, got {v}")
    return v


def _seed(text: str) -> int:
    try:
        v = int(text)
    except ValueError:
        raise argparse.ArgumentTypeError(f"not an integer: {text!r}") from None
    if v < 0:
        raise argparse.ArgumentTypeError(f"seed must be non-negative, got {v}")
    return v


def _int_list(text: str) -> list[int]:
    return [_positive_int(t) for t in text.split(",") if t.strip()]


def _str_list(text: str) -> list[str]:
    return [t.strip() for t in text.split(",") if t.strip()]


def _default_threads() -> int:
    raw = os.environ.get(THREADS_ENV)
    if raw is None:
        return 1
    try:
        return _positive_int(raw)
    except argparse.ArgumentTypeError:
        raise CliError(f"{THREADS_ENV}={raw!r} is not a positive integer") from None


def _write_json(path: Path, doc: dict) -> None:
    path.parent.mkdir(parents=True, exist_ok=True)
    path.write_text(json.dumps(doc, indent=2, sort_keys=True) + "\n")


def cmd_gen(args) -> int:
    if args.preset:
        preset = datagen.get_preset(args.preset)
        mixture, n = preset.mixture, preset.n
    else:
        mixture, n = datagen.MixtureSpec.load(args.spec), None
    if args.seed is not None:
        mixture = datagen.MixtureSpec(mixture.dim, mixture.components, seed=args.seed)
    if args.n is not None:
        n = args.n
    if n is None:
        raise CliError("--n is required with --spec")
    ds, labels = datagen.sample(mixture, n)

    out = Path(args.out)
    if out.suffix.lower() != ".csv":
        out = out / "dataset.csv"
    dataio.write_dataset(out, ds, labels if args.with_labels else None)
    _write_json(out.with_name(out.name + ".meta.json"), {
        "tool": "lloydlab", "version": __version__, "command": "gen",
        "preset": args.preset, "spec_file": args.spec, "mixture": mixture.to_json(),
        "n": n, "with_labels": args.with_labels, "sha256": dataio.dataset_hash(ds),
    })
    print(f"wrote {out}: n={ds.n} dim={ds.dim} components={len(mixture.components)}")
    return EXIT_OK


def cmd_cluster(args) -> int:
    threads = args.threads if args.threads is not None else _default_threads()
    ds = dataio.read_dataset(args.input)
    params = engine.ClusterParams(
        k=args.k, tolerance=args.tol, max_iterations=args.max_iters,
        seed=args.seed, strategy=args.strategy, threads=threads,
    )
    params.check(ds)
    result = engine.run(ds, params)
    objective = compute_objective(ds, result.centroids, result.assignments)
    bundle = dataio.bundle_from_result(result, params, ds, {
        "command": "cluster", "input": str(args.input), "objective": objective,
    })
    out = Path(args.out)
    dataio.write_result(out, bundle)
    dataio.write_plot_data(out / "plot", ds, result.assignments, result.centroids)
    print(
        f"iterations={result.iterations} converged={str(result.converged).lower()} "
        f"E={result.final_shift:.6e} objective={objective:.6f} wall_time={result.wall_time:.6f}s"
    )
    return EXIT_OK


def _print_tables(sweep: bench.SweepResult, strategies, threads) -> None:
    for strategy in strategies:
        table = sweep.table(strategy)
        if not table:
            continue
        cols = [1] if strategy == "serial" else threads
        print(f"\n{strategy}: time (s) vs threads")
        print("dataset".ljust(12) + "".join(f"p={p}".rjust(12) for p in cols))
        for name, row in table.items():
            cells = "".join(
                (f"{row[p]:.6f}" if p in row else "failed").rjust(12) for p in cols
            )
            print(name.ljust(12) + cells)


def cmd_bench(args) -> int:
    if args.repeats < 3:
        log.warning("--repeats %d: medians of fewer than 3 runs are noise-sensitive", args.repeats)
    names = args.presets
    datasets = []
    for name in names:
        preset = datagen.get_preset(name)
        n = max(1, int(round(preset.n * args.scale)))
        ds, _ = preset.generate(n)
        datasets.append((name, ds, args.k if args.k is not None else preset.k))
    threads = args.threads if args.threads is not None else [_default_threads()]
    sweep = bench.scaling_sweep(
        datasets, strategies=args.strategies, threads=threads, repeats=args.repeats,
        seed=args.seed, tolerance=args.tol, max_iterations=args.max_iters,
    )
    out = Path(args.out)
    bench.write_bench_csv(out / "bench.csv", sweep.records)
    bench.write_speedup_json(out / "speedup.json", sweep)
    bench.write_figure_data(out, sweep)
    _write_json(out / "meta.json", {
        "tool": "lloydlab", "version": __version__, "command": "bench",
        "presets": names, "scale": args.scale, "k": args.k, "strategies": args.strategies,
        "threads": threads, "repeats": args.repeats, "seed": args.seed,
        "tolerance": args.tol, "max_iterations": args.max_iters,
        "datasets": {name: dataio.dataset_hash(ds) for name, ds, _ in datasets},
        "cpu_count": os.cpu_count(),
    })
    _print_tables(sweep, ["serial", *args.strategies], threads)
    for f in sweep.failures:
        print(f"FAILED {f['dataset']} k={f['k']} {f['strategy']} p={f['threads']}: {f['error']}",
              file=sys.stderr)
    return EXIT_OK if sweep.records else EXIT_MISMATCH


def cmd_compare(args) -> int:
    a = dataio.read_result(args.a)
    b = dataio.read_result(args.b)
    if a.assignments.n != b.assignments.n:
        raise CliError(f"bundles cover different datasets: n={a.assignments.n} vs {b.assignments.n}")
    if a.centroids.centers.shape != b.centroids.centers.shape:
        raise CliError(
            f"centroid shapes differ: {a.centroids.centers.shape} vs {b.centroids.centers.shape}"
        )
    perm = greedy_match(a.centroids.centers, b.centroids.centers)
    relabeled = perm[b.assignments.labels]
    agreement = float(np.mean(relabeled == a.assignments.labels))
    linf = float(np.max(np.abs(a.centroids.centers[perm] - b.centroids.centers)))
    ok = agreement == 1.0 and linf <= 1e-6
    print(f"agreement={agreement:.6%} centroid_linf={linf:.3e} {'MATCH' if ok else 'MISMATCH'}")
    return EXIT_OK if ok else EXIT_MISMATCH


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="lloydlab", description=__doc__.splitlines()[0])
    parser.add_argument("--version", action="version", version=f"lloydlab {__version__}")
    parser.add_argument("-v", "--verbose", action="store_true")
    sub = parser.add_subparsers(dest="command", required=True)

    g = sub.add_parser("gen", help="generate a Gaussian-mixture dataset")
    src = g.add_mutually_exclusive_group(required=True)
    src.add_argument("--spec", help="mixture spec JSON file")
    src.add_argument("--preset", help="built-in dataset name, e.g. 2d-500k")
    g.add_argument("--n", type=_positive_int, help="number of points (defaults to the preset size)")
    g.add_argument("--seed", type=_seed, help="override the mixture seed")
    g.add_argument("--out", required=True, help="CSV path, or directory for dataset.csv")
    g.add_argument("--with-labels", action="store_true", help="append the true component label")
    g.set_defaults(func=cmd_gen)

    c = sub.add_parser("cluster", help="run K-Means on a dataset CSV")
    c.add_argument("--in", dest="input", required=True)
    c.add_argument("--k", type=_positive_int, required=True)
    c.add_argument("--strategy", choices=engine.STRATEGIES, default="serial")
    c.add_argument("--threads", type=_positive_int, help=f"worker count (default ${THREADS_ENV} or 1)")
    c.add_argument("--tol", type=float, default=1e-6)
    c.add_argument("--max-iters", type=_positive_int, default=500)
    c.add_argument("--seed", type=_seed, default=0)
    c.add_argument("--out", required=True)
    c.set_defaults(func=cmd_cluster)

    b = sub.add_parser("bench", help="time strategies over presets and thread counts")
    b.add_argument("--presets", type=_str_list, required=True, help="comma-separated preset names")
    b.add_argument("--k", type=_positive_int, help="cluster count (defaults to each preset's)")
    b.add_argument("--strategies", type=_str_list, default=["persistent", "forkjoin"])
    b.add_argument("--threads", type=_int_list, help="comma-separated thread counts")
    b.add_argument("--repeats", type=_positive_int, default=3)
    b.add_argument("--scale", type=float, default=1.0, help="multiply preset sizes (desk runs)")
    b.add_argument("--tol", type=float, default=1e-6)
    b.add_argument("--max-iters", type=_positive_int, default=500)
    b.add_argument("--seed", type=_seed, default=0)
    b.add_argument("--out", required=True)
    b.set_defaults(func=cmd_bench)

    m = sub.add_parser("compare", help="check two cluster bundles agree")
    m.add_argument("--a", required=True)
    m.add_argument("--b", required=True)
    m.set_defaults(func=cmd_compare)
    return parser


def _validate(parser, args) -> None:
    if args.command == "bench":
        bad = [s for s in args.strategies if s not in engine.STRATEGIES]
        if bad or not args.strategies:
            parser.error(f"--strategies: unknown {bad}; choose from {engine.STRATEGIES}")
        if not args.presets:
            parser.error("--presets: need at least one preset")
        if not args.scale > 0:
            parser.error("--scale must be positive")
    if args.command == "cluster" and not args.tol > 0:
        parser.error("--tol must be positive")


def main(argv=None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    _validate(parser, args)
    logging.basicConfig(
        level=logging.INFO if args.verbose else logging.WARNING,
        format="%(levelname)s: %(message)s",
    )
    try:
        return args.func(args)
    except (CliError, UsageError, datagen.MixtureSpecError, datagen.PresetNotFound,
            dataio.DataFormatError, FileNotFoundError) as exc:
        msg = exc.args[0] if isinstance(exc, KeyError) and exc.args else exc
        print(f"lloydlab {args.command}: error: {msg}", file=sys.stderr)
        return EXIT_USAGE
