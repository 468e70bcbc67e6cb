"""End-to-end acceptance checks.

Each test carries a ``criterion`` marker; the terminal summary prints one
PASS/FAIL line per criterion (see ``conftest.py``). Two checks are known to
miss their targets on every fixture we could build and are marked strict
xfail, so they still run in full and the summary still reports FAIL.
"""

import itertools
import math
import time

import numpy as np
import pytest

from decsliding import (
    ConstraintSet,
    IpdsConfig,
    LoPolicy,
    apply_constraint,
    build_topology,
    cgs_solve_rows,
    make_logistic_dataset,
    make_logistic_problem,
    make_quadratic_problem,
    make_schedule,
    operator_norm,
    reference_optimum,
    run_defw,
    run_ipds,
    smoothness_estimate,
    spectral_gap,
)
from decsliding.cli import main
from decsliding.ipds import ceil_int, iterations_for_target
from decsliding.metrics import worst_node_loss

from conftest import kron_apply

criterion = pytest.mark.criterion


def subproblem_value(g, u, beta, x):
    diff = x - u
    return (g * x).sum(axis=-1) + 0.5 * beta * (diff * diff).sum(axis=-1)


# -- 1: linear oracles and projections ---------------------------------------------------

def simplex_projection_bruteforce(y, mass):
    """Closest point of the simplex by enumerating every candidate support."""
    best, best_dist = None, math.inf
    d = y.size
    for size in range(1, d + 1):
        for support in itertools.combinations(range(d), size):
            idx = list(support)
            x = np.zeros(d)
            x[idx] = y[idx] - (y[idx].sum() - mass) / size
            if x.min() < 0:
                continue
            dist = float(((x - y) ** 2).sum())
            if dist < best_dist:
                best, best_dist = x, dist
    return best


@criterion(1, "linear oracles and projections match brute force")
def test_oracles_and_projection_exact():
    rng = np.random.default_rng(101)
    start = time.perf_counter()

    for n in range(1000):
        d = 1 + n % 6
        radius = float(rng.uniform(0.1, 5.0))
        cset = ConstraintSet("l1_ball", d, radius=radius)
        g = rng.normal(size=d)
        verts = np.vstack([radius * np.eye(d), -radius * np.eye(d)])
        expected = verts[np.argmin(verts @ g)]
        assert np.array_equal(cset.lo_oracle(g), expected)

    for n in range(1000):
        d = 1 + n % 20
        radius = float(rng.uniform(0.1, 5.0))
        g = rng.normal(size=d) * 10.0 ** rng.uniform(-3, 3)
        got = ConstraintSet("l2_ball", d, radius=radius).lo_oracle(g)
        np.testing.assert_allclose(got, -radius * g / np.linalg.norm(g), rtol=0, atol=1e-12)

    for n in range(1000):
        d = 1 + n % 5
        mass = float(rng.uniform(0.1, 3.0))
        y = rng.normal(size=d) * 2.0
        got = ConstraintSet("simplex", d, radius=mass).project(y)
        np.testing.assert_allclose(got, simplex_projection_bruteforce(y, mass), rtol=0, atol=1e-8)

    assert time.perf_counter() - start < 5.0


# -- 2 and 3: conditional gradient subproblem solver --------------------------------

def subproblem_batches(seed, groups=10, per_group=20):
    """Random ``(cset, g, u, beta)`` batches over l2 and l1 balls with d <= 20."""
    rng = np.random.default_rng(seed)
    for n in range(groups):
        kind = ("l2_ball", "l1_ball")[n % 2]
        d = int(rng.integers(2, 21))
        cset = ConstraintSet(kind, d, radius=float(rng.uniform(0.5, 2.0)))
        g = rng.normal(size=(per_group, d))
        u = rng.normal(size=(per_group, d))
        beta = rng.uniform(0.5, 5.0, size=per_group)
        yield cset, g, u, beta


def exact_subproblem_value(cset, g, u, beta):
    star = cset.project(u - g / beta[:, None])
    return subproblem_value(g, u, beta, star)


@criterion(2, "CGS Wolfe-gap stop certifies the primal gap; objective monotone")
def test_cgs_certificate_and_monotonicity():
    start = time.perf_counter()
    tols = (1e-4, 1e-6)
    # test-time budget per solve; rows that reach it never terminated at tol
    cap = 20_000
    terminated = total = 0
    for cset, g, u, beta in subproblem_batches(seed=0):
        n = len(beta)
        G, U, B = np.vstack([g] * len(tols)), np.vstack([u] * len(tols)), np.tile(beta, len(tols))
        T = np.repeat(tols, n)
        last = np.full(G.shape[0], np.inf)
        rises = []

        def watch(rows, x):
            vals = subproblem_value(G[rows], U[rows], B[rows], x)
            slack = 1e-12 * np.maximum(1.0, np.abs(vals))
            rises.append(int(np.count_nonzero(vals > last[rows] + slack)))
            last[rows] = vals

        res = cgs_solve_rows(cset, G, U, B, T, cap, callback=watch)
        assert sum(rises) == 0
        stopped = ~res.hit_cap
        assert np.all(res.final_gaps[stopped] <= T[stopped])
        primal = subproblem_value(G, U, B, res.points) - exact_subproblem_value(cset, G, U, B)
        assert np.all(primal[stopped] <= T[stopped])
        terminated += int(stopped.sum())
        total += G.shape[0]
    # the implication is only meaningful if most solves actually stop at tol
    assert terminated >= 0.95 * total
    assert time.perf_counter() - start < 10.0


@criterion(3, "CGS iteration bound reaches the requested accuracy")
@pytest.mark.parametrize("eps", [1e-1, 1e-2])
def test_cgs_iteration_bound(eps):
    for cset, g, u, beta in subproblem_batches(seed=1, groups=4, per_group=50):
        D = cset.diameter()
        cap = np.floor(12.0 * beta * D**2 / eps).astype(np.int64)
        res = cgs_solve_rows(cset, g, u, beta, 0.0, cap)
        primal = subproblem_value(g, u, beta, res.points) - exact_subproblem_value(cset, g, u, beta)
        assert np.all(res.lo_calls <= cap)
        assert np.all(primal <= eps)


# -- 4: graph operators ------------------------------------------------------------------

SUITE_GRAPHS = [("path", 7), ("star", 6), ("complete", 8), ("barbell", 10), ("erdos_renyi", 9), ("path", 2)]


@criterion(4, "Laplacian and operator suite")
def test_laplacian_operator_suite():
    start = time.perf_counter()
    rng = np.random.default_rng(4)
    for kind, m in SUITE_GRAPHS:
        graph = build_topology(kind, m, {"p": 0.3}, seed=0)
        lap = graph.laplacian
        assert np.array_equal(lap, lap.T)
        assert np.all(lap.sum(axis=1) == 0)
        eig = np.linalg.eigvalsh(lap)
        assert eig[0] >= -1e-12
        assert eig[1] > 1e-9
        d = 64 // m
        consensus = np.tile(rng.normal(size=d), (m, 1))
        assert np.abs(apply_constraint(graph, consensus)).max() <= 1e-12
        x = rng.normal(size=(m, d))
        np.testing.assert_allclose(apply_constraint(graph, x), kron_apply(graph, x), rtol=0, atol=1e-12)
    for m in (2, 5, 10, 17):
        complete = build_topology("complete", m)
        assert operator_norm(complete) == pytest.approx(m, abs=1e-9)
        assert spectral_gap(complete) == pytest.approx(1.0, abs=1e-9)
    gaps = {kind: spectral_gap(build_topology(kind, 10, {"p": 0.3}, seed=0)) for kind in ("path", "erdos_renyi", "complete")}
    assert gaps["path"] < gaps["erdos_renyi"] < gaps["complete"]
    assert time.perf_counter() - start < 5.0


@criterion(4, "Laplacian and operator suite")
@pytest.mark.xfail(strict=True, reason="a 10-node barbell has a larger normalized gap than a 10-node path")
def test_spectral_gap_ordering():
    gaps = {kind: spectral_gap(build_topology(kind, 10, {"p": 0.3}, seed=0)) for kind in ("barbell", "path")}
    assert gaps["barbell"] < gaps["path"]


# -- 5: parameter schedule ---------------------------------------------------------------

def direct_schedule_row(L, mu, nA, N, R, c, k):
    if mu > 0:
        tau = 2.0 * math.sqrt(L / mu)
        delta = math.ceil(2.0 * tau + 1.0)
        lam = tau / (1.0 + tau)
    else:
        tau, delta, lam = math.inf, math.inf, 1.0
    if k <= delta:
        beta, p = float(k), 4.0 * L / k
        T = max(1, ceil_int(k * R * nA / L))
        cb = max(1, ceil_int(min(N, delta) * beta * c / (p * L)))
        return (k - 1) / 2, (k - 1) / k, beta, p, T, cb
    beta = delta * lam ** (-(k - delta))
    p = 2.0 * L / (1.0 + tau)
    T = max(1, ceil_int(2.0 * (1.0 + tau) * R * nA / (L * lam ** ((k - delta) / 2))))
    cb = max(1, ceil_int((1.0 + tau) ** 2 * delta * c / (L**2 * lam ** ((k + N - 2 * delta) / 2))))
    return tau, lam, beta, p, T, cb


@criterion(5, "parameter schedule formulas, exact")
@pytest.mark.parametrize("mu", [0.0, 1.0])
def test_schedule_conformance(mu):
    L, nA, R, c = 1.0, 3.0, 0.7, 0.25
    if mu > 0:
        delta = math.ceil(2.0 * (2.0 * math.sqrt(L / mu)) + 1.0)
        assert delta == 5
        N = delta + 10
    else:
        N = 20
    sched = make_schedule(L, mu, nA, N, R, c)
    assert sched.Delta == (delta if mu > 0 else math.inf)
    rows = []
    for k in range(1, N + 1):
        tau, lam, beta, p, T, cb = direct_schedule_row(L, mu, nA, N, R, c, k)
        got = (sched.tau_k(k), sched.lambda_k(k), sched.beta_k(k), sched.p_k(k), sched.T_k(k), sched.c_k(k))
        assert got == (tau, lam, beta, p, T, cb)
        for t in range(1, T + 1):
            assert sched.eta(k, t) == (p + mu) * (t - 1) + p * T
            assert sched.q(k, t) == L * T / (4.0 * beta * R**2)
            alpha = rows[-1][2] * T / (beta * rows[-1][4]) if k >= 2 and t == 1 else 1.0
            assert sched.alpha(k, t) == alpha
        rows.append((tau, lam, beta, p, T, cb))
    if mu > 0:
        # the switch: growth is linear up to delta and geometric after it
        assert sched.beta_k(delta) == delta
        assert sched.beta_k(delta + 1) == delta / sched.lam
        assert sched.p_k(delta + 1) == 2.0 * L / (1.0 + sched.tau)


# -- 6: convergence on a desk-scale quadratic ------------------------------------------

def desk_quadratic(mu):
    problem = make_quadratic_problem(5, 10, 20, L=1.0, cond=10.0, mu=mu, seed=1, spread=1.0)
    graph = build_topology("complete", 5)
    cset = ConstraintSet("l2_ball", 10, radius=1.0)
    return problem, graph, cset, reference_optimum(problem, cset, tol=1e-12)


@criterion(6, "desk-scale convergence on a quadratic")
@pytest.mark.parametrize("mu,N,target", [(1.0 / 6.0, 60, 1e-4), (0.0, 100, 1e-2)])
def test_desk_scale_convergence(mu, N, target):
    start = time.perf_counter()
    problem, graph, cset, ref = desk_quadratic(mu)
    cfg = IpdsConfig(N=N, R=0.1, L=1.0, lo_policy=LoPolicy("fixed", tol=1e-7))
    _, record = run_ipds(problem, graph, cset, cfg, ref)
    assert abs(record.last.f_gap) <= target
    assert record.last.consensus_gap <= target
    assert time.perf_counter() - start < 30.0


# -- 7: topology invariance --------------------------------------------------------------

TOPOLOGIES = ("path", "complete", "barbell", "erdos_renyi")


@pytest.fixture(scope="module")
def logistic_l1():
    data = make_logistic_dataset(2000, 22, seed=0)
    cset = ConstraintSet("l1_ball", 22, radius=1.0)
    problem = make_logistic_problem(data, 10, seed=0)
    return data, cset, reference_optimum(problem, cset, tol=1e-9)


def topology(kind):
    return build_topology(kind, 10, {"p": 0.3}, seed=0)


@criterion(7, "sample counts do not depend on the topology")
@pytest.mark.parametrize("sigma", [0.0, 1.0])
def test_ipds_samples_topology_invariant(logistic_l1, sigma):
    data, cset, ref = logistic_l1
    problem = make_logistic_problem(data, 10, sigma=sigma, seed=0)
    c_const = 1e-4 * smoothness_estimate(problem) ** 2 if sigma > 0 else None
    cfg = IpdsConfig(N=50, c_const=c_const, lo_policy=LoPolicy("fixed", tol=1e-3, max_iter=50))
    totals = {kind: run_ipds(problem, topology(kind), cset, cfg, ref)[1].last.samples for kind in TOPOLOGIES}
    assert len(set(totals.values())) == 1
    if sigma == 0:
        assert totals["path"] == 50 * problem.n_samples
    else:
        assert totals["path"] < 50 * problem.n_samples


@criterion(7, "sample counts do not depend on the topology")
def test_defw_gradients_to_target_follow_connectivity(logistic_l1):
    data, cset, ref = logistic_l1
    problem = make_logistic_problem(data, 10, seed=0)
    target = ref[1] / problem.n_samples + 1e-4
    needed = {}
    for kind in ("path", "barbell", "complete"):
        hit = {}

        def watch(t, x, counters, hit=hit):
            if "samples" not in hit and worst_node_loss(problem, x) <= target:
                hit["samples"] = counters.samples

        run_defw(problem, topology(kind), cset, 200, ref, callback=watch)
        assert "samples" in hit, f"DeFW on {kind} missed the target"
        needed[kind] = hit["samples"]
    assert needed["path"] >= needed["barbell"] >= needed["complete"]
    assert needed["path"] > needed["complete"]


# -- 8: stochastic versus exact gradients -----------------------------------------------

@criterion(8, "stochastic gradients save samples at comparable accuracy")
def test_stochastic_sample_economy():
    start = time.perf_counter()
    data = make_logistic_dataset(2000, 22, seed=0, noise=0.1)
    graph = topology("erdos_renyi")
    cset = ConstraintSet("l1_ball", 22, radius=10.0)
    exact = make_logistic_problem(data, 10, seed=0)
    ref = reference_optimum(exact, cset, tol=1e-9)
    L = smoothness_estimate(exact)
    policy = LoPolicy("fixed", tol=0.1, max_iter=200)
    records = {}
    for sigma, c_const in ((0.0, 0.0), (1.0, 9.5e-5 * L**2)):
        problem = make_logistic_problem(data, 10, sigma=sigma, seed=0)
        cfg = IpdsConfig(N=100, c_const=c_const, lo_policy=policy)
        records[sigma] = run_ipds(problem, graph, cset, cfg, ref)[1]
    det, sto = records[0.0].last, records[1.0].last
    assert det.samples == 100 * exact.n_samples
    assert sto.samples < 0.05 * det.samples
    assert 0 < det.f_gap and sto.f_gap <= 10.0 * det.f_gap
    assert time.perf_counter() - start < 120.0


# -- 9: linear-oracle complexity ---------------------------------------------------------

@criterion(9, "total LO calls scale as 1/eps^2")
@pytest.mark.xfail(strict=True, reason="warm-started subproblems stop early; observed slope is near -1")
def test_lo_calls_scaling():
    start = time.perf_counter()
    L = 30.0
    problem = make_quadratic_problem(5, 10, 20, L=L, cond=10.0, mu=0.0, seed=1, spread=1.0)
    graph = build_topology("complete", 5)
    cset = ConstraintSet("l1_ball", 10, radius=2.0)
    x_star, f_star = reference_optimum(problem, cset, tol=1e-10)
    dist_sq = 5 * float(x_star @ x_star)
    eps_values = (0.2, 0.1, 0.05)
    calls = []
    for eps in eps_values:
        cfg = IpdsConfig(N=iterations_for_target(L, dist_sq, eps), R=1.0, L=L,
                         lo_policy=LoPolicy("scheduled", epsilon=eps))
        _, record = run_ipds(problem, graph, cset, cfg, (x_star, f_star))
        calls.append(record.last.lo_calls)
    assert time.perf_counter() - start < 180.0
    slope = np.polyfit(np.log(eps_values), np.log(calls), 1)[0]
    assert abs(slope + 2.0) <= 0.3, f"slope {slope:.3f}, LO calls {calls}"


# -- 10: determinism ---------------------------------------------------------------------

DETERMINISM_CONFIG = """\
run_id = "{run_id}"

[problem]
kind = "logistic"
sigma = 1.0
[problem.synthetic]
n_samples = 400
d = 12
seed = 5

[graph]
kind = "erdos_renyi"
m = 8
p = 0.4
seed = 2

[constraint]
kind = "l1_ball"
radius = 2.0

[algo]
name = "ipds"
N = 15
seed = 9
threads = {threads}
c_const = 0.05
[algo.lo_policy]
mode = "fixed"
tol = 1e-4
max_iter = 300
"""


@criterion(10, "byte-identical output across repeats and thread counts")
def test_determinism(tmp_path):
    outputs = []
    for n, threads in enumerate((1, 1, 8, 8)):
        cfg = tmp_path / f"run{n}.toml"
        cfg.write_text(DETERMINISM_CONFIG.format(run_id="det", threads=threads))
        out = tmp_path / f"out{n}"
        assert main(["run", "--config", str(cfg), "--out", str(out)]) == 0
        outputs.append((out / "det.csv").read_bytes())
    assert len(outputs[0]) > 200
    assert all(o == outputs[0] for o in outputs[1:])
