import numpy as np
import pytest

from decsliding import ConstraintSet, build_topology, make_quadratic_problem, reference_optimum


@pytest.fixture
def rng():
    return np.random.default_rng(12345)


@pytest.fixture(scope="session")
def small_quadratic():
    """Strongly convex least squares on K4 with an l2 ball, plus its optimum."""
    problem = make_quadratic_problem(4, 6, 8, L=1.0, cond=5.0, mu=0.1, seed=3, spread=1.0)
    graph = build_topology("complete", 4)
    cset = ConstraintSet("l2_ball", 6, radius=1.0)
    ref = reference_optimum(problem, cset, tol=1e-12)
    return problem, graph, cset, ref


def kron_apply(graph, x):
    """Dense (L kron I_d) vec(x) reference, reshaped back to rows."""
    m, d = x.shape
    big = np.kron(graph.laplacian, np.eye(d))
    return (big @ x.reshape(-1)).reshape(m, d)


# -- acceptance report ---------------------------------------------------------------
# Every test tagged ``@pytest.mark.criterion(n, title)`` contributes to criterion n;
# the criterion passes only if all of its tests pass.

_criteria: dict[int, dict] = {}


@pytest.hookimpl(hookwrapper=True)
def pytest_runtest_makereport(item, call):
    outcome = yield
    report = outcome.get_result()
    marker = item.get_closest_marker("criterion")
    if marker is None:
        return
    number, title = marker.args
    entry = _criteria.setdefault(number, {"title": title, "ok": True, "failed": []})
    failed = report.failed or (report.skipped and hasattr(report, "wasxfail"))
    if report.when == "call" or failed:
        if failed or not report.passed:
            entry["ok"] = False
            entry["failed"].append(item.name)


def pytest_terminal_summary(terminalreporter):
    if not _criteria:
        return
    terminalreporter.section("acceptance criteria")
    for number in sorted(_criteria):
        entry = _criteria[number]
        verdict = "PASS" if entry["ok"] else "FAIL"
        line = f"criterion {number:>2}: {verdict}  {entry['title']}"
        if entry["failed"]:
            line += f"  (failing: {', '.join(entry['failed'])})"
        terminalreporter.write_line(line)
