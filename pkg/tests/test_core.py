import hypothesis.extra.numpy as nph
import hypothesis.strategies as st
import numpy as np
import pytest
from hypothesis import given, settings

from conftest import loop_sq_dist
from lloydlab.core import (
    Assignments,
    Centroids,
    ConvergenceState,
    Dataset,
    UsageError,
    centroid_shift_error,
    compute_objective,
    greedy_match,
    nearest_centroid,
    squared_l2,
)

finite = st.floats(-1e6, 1e6, allow_nan=False, allow_infinity=False)


def test_dataset_invariants():
    ds = Dataset.from_flat([1.0, 2.0, 3.0, 4.0, 5.0, 6.0], dim=3)
    assert (ds.n, ds.dim) == (2, 3)
    assert ds.flat.size == ds.n * ds.dim
    assert not ds.points.flags.writeable
    with pytest.raises(UsageError):
        Dataset.from_flat([1.0, 2.0, 3.0], dim=2)
    with pytest.raises(UsageError):
        Dataset(np.array([[0.0, np.nan]]))
    with pytest.raises(UsageError):
        Dataset(np.array([[np.inf, 0.0]]))
    with pytest.raises(UsageError):
        Dataset(np.zeros((0, 2)))


def test_assignments_reject_out_of_range():
    with pytest.raises(UsageError):
        Assignments([0, 3], k=3)
    with pytest.raises(UsageError):
        Assignments([-1], k=3)


def test_convergence_state():
    assert ConvergenceState(3, 5e-7, 1e-6).converged
    assert not ConvergenceState(3, 1e-6, 1e-6).converged


def test_squared_l2_examples():
    assert squared_l2([0, 0], [0, 0]) == 0.0
    assert squared_l2([1, 2], [4, 6]) == 25.0
    with pytest.raises(UsageError):
        squared_l2([1, 2], [1, 2, 3])


def test_squared_l2_matches_loop_oracle():
    rng = np.random.default_rng(11)
    for _ in range(100):
        a, b = rng.normal(scale=50, size=(2, 3))
        assert squared_l2(a, b) == pytest.approx(loop_sq_dist(a, b), rel=1e-12)


@given(nph.arrays(np.float64, 3, elements=finite), nph.arrays(np.float64, 3, elements=finite))
def test_squared_l2_symmetric_and_zero_on_self(a, b):
    assert squared_l2(a, b) == squared_l2(b, a)
    assert squared_l2(a, a) == 0.0
    assert squared_l2(a, b) >= 0.0


def test_nearest_centroid_examples():
    c = Centroids([[0.0, 0.0], [5.0, 5.0], [-3.0, 7.0]])
    assert nearest_centroid([-3.0, 7.0], c) == 2
    tie = Centroids([[-1.0, 0.0], [1.0, 0.0]])
    assert nearest_centroid([0.0, 0.0], tie) == 0
    with pytest.raises(UsageError):
        nearest_centroid([0.0], c)


def test_nearest_centroid_matches_exhaustive_scan():
    rng = np.random.default_rng(5)
    for _ in range(200):
        centers = rng.normal(size=(8, 3))
        x = rng.normal(size=3)
        dists = [loop_sq_dist(x, m) for m in centers]
        assert nearest_centroid(x, Centroids(centers)) == int(np.argmin(dists))


@given(
    nph.arrays(np.float64, (6, 2), elements=st.integers(-3, 3).map(float)),
    nph.arrays(np.float64, 2, elements=st.integers(-3, 3).map(float)),
)
def test_nearest_centroid_is_lowest_minimiser(centers, x):
    # small integer grids force many exact ties
    j = nearest_centroid(x, Centroids(centers))
    d = [loop_sq_dist(x, m) for m in centers]
    assert d[j] == min(d)
    assert all(d[i] > d[j] for i in range(j))


def test_compute_objective_examples():
    pts = np.array([[0.0, 0.0], [3.0, 3.0]])
    assert compute_objective(Dataset(pts), Centroids(pts), Assignments([0, 1], k=2)) == 0.0
    one = compute_objective(Dataset([[1.0, 0.0]]), Centroids([[0.0, 0.0]]), Assignments([0], k=1))
    assert one == 1.0
    with pytest.raises(UsageError):
        compute_objective(Dataset(pts), Centroids(pts), Assignments([0], k=2))


def test_compute_objective_matches_double_loop():
    rng = np.random.default_rng(3)
    X = rng.normal(size=(50, 2))
    C = rng.normal(size=(3, 2))
    lab = rng.integers(0, 3, size=50)
    expected = sum(loop_sq_dist(X[i], C[lab[i]]) for i in range(50))
    got = compute_objective(Dataset(X), Centroids(C), Assignments(lab, k=3))
    assert got == pytest.approx(expected, rel=1e-10)


@settings(max_examples=50)
@given(st.integers(0, 2**32 - 1))
def test_compute_objective_permutation_invariant(seed):
    rng = np.random.default_rng(seed)
    X = rng.normal(size=(40, 3))
    C = rng.normal(size=(4, 3))
    lab = rng.integers(0, 4, size=40)
    perm = rng.permutation(40)
    a = compute_objective(Dataset(X), Centroids(C), Assignments(lab, k=4))
    b = compute_objective(Dataset(X[perm]), Centroids(C), Assignments(lab[perm], k=4))
    assert b == pytest.approx(a, rel=1e-12)


def test_centroid_shift_error_examples():
    c = Centroids([[1.0, 2.0], [3.0, 4.0]])
    assert centroid_shift_error(c, c) == 0.0
    assert centroid_shift_error(Centroids([[0.0], [0.0]]), Centroids([[1.0], [2.0]])) == 5.0
    with pytest.raises(UsageError):
        centroid_shift_error(c, Centroids([[1.0, 2.0]]))


def test_centroid_shift_error_matches_loop():
    rng = np.random.default_rng(8)
    for _ in range(20):
        p, q = rng.normal(size=(2, 8, 3))
        expected = sum(loop_sq_dist(p[k], q[k]) for k in range(8))
        assert centroid_shift_error(Centroids(p), Centroids(q)) == pytest.approx(expected, rel=1e-12)


@given(nph.arrays(np.float64, (3, 2), elements=finite), nph.arrays(np.float64, (3, 2), elements=finite))
def test_shift_zero_iff_identical(p, q):
    e = centroid_shift_error(Centroids(p), Centroids(q))
    if np.array_equal(p, q):
        assert e == 0.0
    else:
        diff = np.abs(p - q).max()
        # differences below sqrt(min subnormal) can underflow to zero when squared
        if diff > 1e-150:
            assert e > 0.0


def test_greedy_match_recovers_permutation():
    rng = np.random.default_rng(1)
    a = rng.normal(scale=10, size=(6, 3))
    perm = rng.permutation(6)
    b = a[perm] + 1e-3
    assert greedy_match(a, b).tolist() == perm.tolist()
