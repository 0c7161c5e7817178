import numpy as np
import pytest

from lloydlab import _kernels


@pytest.fixture(scope="session", autouse=True)
def _compiled():
    pts = np.zeros((1, 2))
    pts.flags.writeable = False
    _kernels.prime(pts, pts, np.zeros(1, dtype=np.int64))


def brute_lloyd(points, initial, tolerance=1e-6, max_iterations=500):
    """Textbook Lloyd iteration with numpy broadcasting; returns per-iteration labels and centers.

    Written independently of the engine: full N x K distance matrix, argmin
    (first minimum wins), then per-cluster means via boolean masks.
    """
    X = np.asarray(points, dtype=np.float64)
    C = np.array(initial, dtype=np.float64)
    labels = np.full(len(X), -1)
    history, centers, shifts = [], [], []
    for _ in range(max_iterations):
        dist = ((X[:, None, :] - C[None, :, :]) ** 2).sum(axis=2)
        new_labels = dist.argmin(axis=1)
        changed = int((new_labels != labels).sum())
        labels = new_labels
        newC = C.copy()
        for k in range(len(C)):
            members = X[labels == k]
            if len(members):
                newC[k] = members.sum(axis=0) / len(members)
        shift = float(((newC - C) ** 2).sum())
        history.append(labels.copy())
        centers.append(newC.copy())
        shifts.append(shift)
        C = newC
        if shift < tolerance or changed == 0:
            break
    return history, centers, shifts


def loop_sq_dist(a, b):
    total = 0.0
    for x, y in zip(a, b):
        total += (x - y) * (x - y)
    return total


_criteria: dict = {}


@pytest.hookimpl(hookwrapper=True)
def pytest_runtest_makereport(item, call):
    outcome = yield
    rep = outcome.get_result()
    mark = item.get_closest_marker("criterion")
    if mark is None or (rep.when != "call" and not rep.failed):
        return
    cid, title = mark.args
    detail = "; ".join(v for k, v in item.user_properties if k == "detail")
    if rep.when == "call" and hasattr(rep, "wasxfail"):
        status = "SOFT-FAIL"
    elif rep.skipped:
        status = "SKIP"
    else:
        status = "PASS" if rep.passed else "FAIL"
    _criteria[cid] = (status, title, detail)


def pytest_terminal_summary(terminalreporter):
    if not _criteria:
        return
    terminalreporter.section("acceptance criteria")
    for cid in sorted(_criteria):
        status, title, detail = _criteria[cid]
        line = f"{status:9s} C{cid} {title}"
        terminalreporter.write_line(line + (f"  [{detail}]" if detail else ""))
