import json
import subprocess
import sys

import numpy as np
import pytest

from lloydlab import dataio
from lloydlab.core import Dataset
from lloydlab.cli import main


@pytest.fixture
def dataset(tmp_path):
    path = tmp_path / "d.csv"
    assert main(["gen", "--preset", "3d-100k", "--n", "3000", "--out", str(path)]) == 0
    return path


def test_gen_preset_and_determinism(tmp_path, capsys):
    a, b = tmp_path / "a.csv", tmp_path / "b.csv"
    for p in (a, b):
        assert main(["gen", "--preset", "2d-200k", "--n", "1500", "--out", str(p)]) == 0
    assert a.read_bytes() == b.read_bytes()
    assert "n=1500 dim=2 components=8" in capsys.readouterr().out
    assert dataio.read_dataset(a, expected_dim=2).n == 1500
    meta = json.loads((tmp_path / "a.csv.meta.json").read_text())
    assert meta["mixture"]["seed"] == meta["mixture"]["seed"] and meta["n"] == 1500


def test_gen_into_directory_with_labels(tmp_path):
    assert main(["gen", "--preset", "3d-100k", "--n", "100", "--with-labels",
                 "--out", str(tmp_path / "out")]) == 0
    ds, labels = dataio.load_dataset(tmp_path / "out" / "dataset.csv", 3, has_labels=True)
    assert ds.n == 100 and labels.max() < 4


def test_gen_from_spec_file(tmp_path):
    spec = {"dim": 2, "seed": 5, "components": [
        {"weight": 0.5, "mean": [0, 0], "cov": [[1, 0], [0, 1]]},
        {"weight": 0.5, "mean": [9, 9], "cov": [[1, 0.2], [0.2, 1]]},
    ]}
    (tmp_path / "s.json").write_text(json.dumps(spec))
    assert main(["gen", "--spec", str(tmp_path / "s.json"), "--n", "50",
                 "--out", str(tmp_path / "x.csv")]) == 0
    assert main(["gen", "--spec", str(tmp_path / "s.json"), "--out", str(tmp_path / "y.csv")]) == 2


def test_gen_errors(tmp_path):
    with pytest.raises(SystemExit) as exc:
        main(["gen", "--preset", "2d-100k", "--n", "0", "--out", str(tmp_path / "x.csv")])
    assert exc.value.code == 2
    assert main(["gen", "--preset", "nope", "--out", str(tmp_path / "x.csv")]) == 2
    bad = tmp_path / "bad.json"
    bad.write_text(json.dumps({"dim": 1, "components": [{"weight": 1, "mean": [0], "cov": [[0]]}]}))
    assert main(["gen", "--spec", str(bad), "--n", "5", "--out", str(tmp_path / "x.csv")]) == 2
    with pytest.raises(SystemExit) as exc:
        main(["gen", "--out", str(tmp_path / "x.csv")])
    assert exc.value.code == 2


def test_cluster_writes_bundle(dataset, tmp_path, capsys):
    out = tmp_path / "run"
    assert main(["cluster", "--in", str(dataset), "--k", "4", "--out", str(out)]) == 0
    printed = capsys.readouterr().out
    assert "iterations=" in printed and "objective=" in printed and "wall_time=" in printed
    for name in ("assignments.csv", "centroids.csv", "trace.csv", "meta.json"):
        assert (out / name).is_file()
    assert len(list((out / "plot").glob("cluster_*.csv"))) == 4
    meta = json.loads((out / "meta.json").read_text())
    assert meta["params"]["tolerance"] == 1e-6 and meta["params"]["max_iterations"] == 500
    assert meta["dataset"]["n"] == 3000


def test_cluster_usage_errors(dataset, tmp_path):
    assert main(["cluster", "--in", str(dataset), "--k", "5000", "--out", str(tmp_path / "r")]) == 2
    assert main(["cluster", "--in", str(tmp_path / "missing.csv"), "--k", "2",
                 "--out", str(tmp_path / "r")]) == 2
    bad = tmp_path / "bad.csv"
    bad.write_text("1,2\n3,x\n")
    assert main(["cluster", "--in", str(bad), "--k", "1", "--out", str(tmp_path / "r")]) == 2


def test_nonconvergence_exit_zero(dataset, tmp_path):
    out = tmp_path / "r"
    assert main(["cluster", "--in", str(dataset), "--k", "4", "--max-iters", "1",
                 "--tol", "1e-300", "--out", str(out)]) == 0
    assert json.loads((out / "meta.json").read_text())["converged"] is False


def test_threads_env_default(dataset, tmp_path, monkeypatch):
    monkeypatch.setenv("LLOYDLAB_THREADS", "3")
    out = tmp_path / "r"
    assert main(["cluster", "--in", str(dataset), "--k", "4", "--strategy", "persistent",
                 "--out", str(out)]) == 0
    assert json.loads((out / "meta.json").read_text())["params"]["threads"] == 3
    monkeypatch.setenv("LLOYDLAB_THREADS", "zero")
    assert main(["cluster", "--in", str(dataset), "--k", "4", "--out", str(out)]) == 2


def test_strategies_write_identical_assignments(dataset, tmp_path):
    runs = {
        "serial": [],
        "p1": ["--strategy", "persistent", "--threads", "1"],
        "fj4": ["--strategy", "forkjoin", "--threads", "4"],
    }
    for name, extra in runs.items():
        assert main(["cluster", "--in", str(dataset), "--k", "4", "--seed", "7",
                     "--out", str(tmp_path / name), *extra]) == 0
    ref = (tmp_path / "serial" / "assignments.csv").read_bytes()
    assert (tmp_path / "p1" / "assignments.csv").read_bytes() == ref
    assert (tmp_path / "fj4" / "assignments.csv").read_bytes() == ref
    assert main(["compare", "--a", str(tmp_path / "serial"), "--b", str(tmp_path / "fj4")]) == 0


def test_compare(dataset, tmp_path, capsys):
    a = tmp_path / "a"
    main(["cluster", "--in", str(dataset), "--k", "4", "--out", str(a)])
    assert main(["compare", "--a", str(a), "--b", str(a)]) == 0
    assert "agreement=100.000000% centroid_linf=0.000e+00 MATCH" in capsys.readouterr().out

    # relabelled copy still matches
    b = tmp_path / "b"
    b.mkdir()
    labels = np.loadtxt(a / "assignments.csv", dtype=int)
    centers = np.loadtxt(a / "centroids.csv", delimiter=",")
    perm = np.array([2, 0, 3, 1])
    inv = np.argsort(perm)
    (b / "assignments.csv").write_text("".join(f"{v}\n" for v in inv[labels]))
    (b / "centroids.csv").write_text((a / "centroids.csv").read_text().splitlines()[0] + "\n")
    assert main(["compare", "--a", str(a), "--b", str(b)]) == 2
    dataio.write_dataset(b / "centroids.csv", Dataset(centers[perm]))
    assert main(["compare", "--a", str(a), "--b", str(b)]) == 0

    c = tmp_path / "c"
    main(["cluster", "--in", str(dataset), "--k", "4", "--seed", "1", "--max-iters", "1",
          "--out", str(c)])
    assert main(["compare", "--a", str(a), "--b", str(c)]) == 1

    k3 = tmp_path / "k3"
    main(["cluster", "--in", str(dataset), "--k", "3", "--out", str(k3)])
    assert main(["compare", "--a", str(a), "--b", str(k3)]) == 2
    assert main(["compare", "--a", str(a), "--b", str(tmp_path / "none")]) == 2


def test_bench(tmp_path, capsys, caplog):
    out = tmp_path / "bench"
    code = main(["bench", "--presets", "2d-100k,2d-200k", "--scale", "0.02",
                 "--threads", "2,4,8,16", "--strategies", "persistent",
                 "--repeats", "1", "--out", str(out)])
    assert code == 0
    assert "noise-sensitive" in caplog.text
    text = capsys.readouterr().out
    assert "p=2" in text and "p=16" in text and "2d-200k" in text
    for name in ("bench.csv", "speedup.json", "meta.json", "speedup_vs_threads.csv",
                 "efficiency_vs_threads.csv", "time_vs_n.csv"):
        assert (out / name).is_file()
    header = (out / "bench.csv").read_text().splitlines()[0]
    assert header == "dataset,n,dim,k,strategy,threads,seed,repeat,wall_time_s,iterations,converged"
    doc = json.loads((out / "speedup.json").read_text())
    assert sorted(doc["2d-100k"]["persistent"]) == ["16", "2", "4", "8"]


def test_bench_usage_errors(tmp_path):
    with pytest.raises(SystemExit) as exc:
        main(["bench", "--presets", "2d-100k", "--strategies", "gpu", "--out", str(tmp_path)])
    assert exc.value.code == 2
    assert main(["bench", "--presets", "9d-1k", "--out", str(tmp_path)]) == 2


def test_module_entry_point(tmp_path):
    proc = subprocess.run(
        [sys.executable, "-m", "lloydlab", "gen", "--preset", "2d-100k", "--n", "10",
         "--out", str(tmp_path / "d.csv")],
        capture_output=True, text=True,
    )
    assert proc.returncode == 0, proc.stderr
    assert (tmp_path / "d.csv").read_text().count("\n") == 10
