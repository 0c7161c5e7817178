"""Cross-strategy comparison harness.

Clusters one generated dataset with every strategy and thread count and
prints label agreement and centroid L-inf distance against the serial run.

    python scripts/strategy_agreement.py --preset 3d-100k --n 50000 --k 4
"""

import argparse

import numpy as np

from lloydlab import datagen, engine
from lloydlab.engine import ClusterParams


def main():
    ap = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    ap.add_argument("--preset", default="3d-100k")
    ap.add_argument("--n", type=int)
    ap.add_argument("--k", type=int)
    ap.add_argument("--seed", type=int, default=0)
    ap.add_argument("--threads", default="1,2,4,8")
    args = ap.parse_args()

    preset = datagen.get_preset(args.preset)
    ds, _ = preset.generate(args.n)
    k = args.k or preset.k
    ref = engine.run(ds, ClusterParams(k=k, seed=args.seed))
    print(f"serial: n={ds.n} k={k} iterations={ref.iterations} "
          f"E={ref.final_shift:.3e} time={ref.wall_time:.4f}s")
    print(f"{'strategy':<12}{'p':>4}{'iters':>8}{'agree':>10}{'linf':>12}{'time':>10}")
    for strategy in ("persistent", "forkjoin"):
        for p in (int(t) for t in args.threads.split(",")):
            res = engine.run(ds, ClusterParams(k=k, seed=args.seed, strategy=strategy, threads=p))
            agree = np.mean(res.assignments.labels == ref.assignments.labels)
            linf = np.abs(res.centroids.centers - ref.centroids.centers).max()
            print(f"{strategy:<12}{p:>4}{res.iterations:>8}{agree:>10.4%}{linf:>12.2e}"
                  f"{res.wall_time:>10.4f}")


if __name__ == "__main__":
    main()
