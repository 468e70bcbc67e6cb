"""Inexact primal-dual sliding with a conditional-gradient inner solver.

The outer loop is an accelerated scheme that touches the data oracle once per
iteration. Each outer iteration then runs ``T_k`` primal-dual steps on the
consensus constraint ``(L kron I_d) x = 0``; these reuse the same gradient
sample and only cost communication plus linear-oracle calls.
"""

from __future__ import annotations

import math
import time
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field

import numpy as np

from .cgs import cgs_solve_rows, default_cap, reduce_subproblem
from .errors import ConfigurationError, NonFiniteIterateError
from .graph import apply_constraint, operator_norm
from .metrics import RunRecord, RunRow, consensus_gap, primal_gap
from .model import OracleCounters, full_gradient, node_rng, smoothness_estimate, stochastic_gradient


def ceil_int(x: float) -> int:
    """Ceiling that ignores round-off just above an integer."""
    r = round(x)
    if abs(x - r) <= 1e-9 * max(1.0, abs(x)):
        return int(r)
    return int(math.ceil(x))


@dataclass(frozen=True)
class Schedule:
    """Step parameters for outer iterations ``k = 1..N``.

    Per-k values live in tuples indexed by ``k - 1``; use the accessor
    methods for 1-based indexing.
    """

    L: float
    mu: float
    norm_A: float
    N: int
    R: float
    c_const: float
    Delta: float
    tau: float
    lam: float
    taus: tuple
    lams: tuple
    betas: tuple
    ps: tuple
    Ts: tuple
    cs: tuple

    def tau_k(self, k: int) -> float:
        return self.taus[k - 1]

    def lambda_k(self, k: int) -> float:
        return self.lams[k - 1]

    def beta_k(self, k: int) -> float:
        return self.betas[k - 1]

    def p_k(self, k: int) -> float:
        return self.ps[k - 1]

    def T_k(self, k: int) -> int:
        return self.Ts[k - 1]

    def c_k(self, k: int) -> int:
        return self.cs[k - 1]

    def eta(self, k: int, t: int) -> float:
        p = self.ps[k - 1]
        return (p + self.mu) * (t - 1) + p * self.Ts[k - 1]

    def q(self, k: int, t: int = 1) -> float:
        return self.L * self.Ts[k - 1] / (4.0 * self.betas[k - 1] * self.R**2)

    def alpha(self, k: int, t: int) -> float:
        if k >= 2 and t == 1:
            return self.betas[k - 2] * self.Ts[k - 1] / (self.betas[k - 1] * self.Ts[k - 2])
        return 1.0

    @property
    def strongly_convex(self) -> bool:
        return self.mu > 0


def make_schedule(L: float, mu: float, norm_A: float, N: int, R: float, c_const: float) -> Schedule:
    """Evaluate the two-phase parameter schedule.

    For ``k <= Delta`` the parameters follow the convex (``mu = 0``) pattern;
    after the switch ``Delta = ceil(2 tau + 1)`` with ``tau = 2 sqrt(L/mu)``
    they grow geometrically with ratio ``1/lambda``, ``lambda = tau/(1+tau)``.
    With ``mu = 0`` the switch never happens.
    """
    vals = (L, mu, norm_A, R, c_const)
    if not all(isinstance(v, (int, float, np.floating, np.integer)) and math.isfinite(v) for v in vals):
        raise ConfigurationError(f"schedule inputs must be finite, got L={L}, mu={mu}, |A|={norm_A}, R={R}, c={c_const}")
    if L <= 0 or mu < 0 or norm_A <= 0 or R <= 0 or c_const < 0:
        raise ConfigurationError("schedule needs L > 0, mu >= 0, |A| > 0, R > 0, c >= 0")
    if int(N) != N or N < 1:
        raise ConfigurationError(f"N must be a positive integer, got {N}")
    N = int(N)

    if mu > 0:
        tau = 2.0 * math.sqrt(L / mu)
        Delta = math.ceil(2.0 * tau + 1.0)
        lam = tau / (1.0 + tau)
    else:
        tau = math.inf
        Delta = math.inf
        lam = 1.0
    first = min(N, Delta)

    taus, lams, betas, ps, Ts, cs = [], [], [], [], [], []
    for k in range(1, N + 1):
        if k <= Delta:
            tau_k = (k - 1) / 2
            lam_k = (k - 1) / k
            beta_k = float(k)
            p_k = 4.0 * L / k
            T_k = ceil_int(k * R * norm_A / L)
            c_k = ceil_int(first * beta_k * c_const / (p_k * L))
        else:
            tau_k = tau
            lam_k = lam
            beta_k = Delta * lam ** (-(k - Delta))
            p_k = 2.0 * L / (1.0 + tau)
            T_k = ceil_int(2.0 * (1.0 + tau) * R * norm_A / (L * lam ** ((k - Delta) / 2)))
            c_k = ceil_int((1.0 + tau) ** 2 * Delta * c_const / (L**2 * lam ** ((k + N - 2 * Delta) / 2)))
        taus.append(tau_k)
        lams.append(lam_k)
        betas.append(beta_k)
        ps.append(p_k)
        Ts.append(max(1, T_k))
        cs.append(max(1, c_k))
    return Schedule(
        L=float(L), mu=float(mu), norm_A=float(norm_A), N=N, R=float(R), c_const=float(c_const),
        Delta=Delta, tau=tau, lam=lam,
        taus=tuple(taus), lams=tuple(lams), betas=tuple(betas), ps=tuple(ps), Ts=tuple(Ts), cs=tuple(cs),
    )


def iterations_for_target(L: float, dist_sq: float, epsilon: float) -> int:
    """Outer iterations ``ceil(sqrt(40 L ||x0 - x*||^2 / eps))`` for the convex case."""
    return max(1, math.ceil(math.sqrt(40.0 * L * dist_sq / epsilon)))


# -- linear-oracle budget ------------------------------------------------------


@dataclass(frozen=True)
class LoPolicy:
    """How accurately each CGS subproblem is solved.

    ``mode="fixed"`` stops at Wolfe gap ``tol`` (capped by ``max_iter`` or a
    generous default). ``mode="scheduled"`` targets overall accuracy
    ``epsilon``: Wolfe gap ``epsilon/2`` with an iteration cap that grows
    with the subproblem curvature. ``C`` overrides the strongly convex cap
    constant.
    """

    mode: str = "fixed"
    tol: float = 1e-8
    epsilon: float | None = None
    C: float | None = None
    max_iter: int | None = None

    def __post_init__(self):
        if self.mode not in ("fixed", "scheduled"):
            raise ConfigurationError(f"unknown lo_policy mode {self.mode!r}")
        if self.mode == "scheduled" and not (self.epsilon and self.epsilon > 0):
            raise ConfigurationError("scheduled lo_policy needs epsilon > 0")
        if self.mode == "fixed" and not self.tol >= 0:
            raise ConfigurationError("fixed lo_policy needs tol >= 0")
        if self.mode == "fixed" and self.tol == 0 and self.max_iter is None:
            raise ConfigurationError("fixed lo_policy with tol = 0 needs max_iter")


def strongly_convex_lo_constant(schedule: Schedule, diameter: float) -> float:
    """Default constant of the strongly convex LO cap."""
    L, mu, tau, lam, Delta = schedule.L, schedule.mu, schedule.tau, schedule.lam, schedule.Delta
    R, nA = schedule.R, schedule.norm_A
    h = Delta - 1 + 2.0 / math.log(1.0 / lam)
    c_prime = 2.0 * L / ((1.0 + tau) * Delta) * h**2 + 4.0 * R * nA / ((1.0 - math.sqrt(lam)) * Delta) * h
    core = (L / (1.0 + tau) + mu) * 2.0 * (1.0 + tau) ** 2 * R**2 * nA**2 / (Delta * L**2)
    return 12.0 * diameter**2 / math.sqrt(core + c_prime)


def lo_tolerance(policy: LoPolicy, schedule: Schedule, k: int, t: int, epsilon_target=None, diameter: float = 1.0):
    """Return ``(tol, cap)`` for the subproblem at outer ``k``, inner ``t``."""
    eta = schedule.eta(k, t)
    p = schedule.p_k(k)
    if policy.mode == "fixed":
        beta = schedule.mu + eta + p
        cap = policy.max_iter if policy.max_iter is not None else default_cap(beta, diameter, policy.tol)
        return policy.tol, max(1, int(cap))
    eps = policy.epsilon if epsilon_target is None else epsilon_target
    if schedule.strongly_convex:
        C = policy.C if policy.C is not None else strongly_convex_lo_constant(schedule, diameter)
        cap = math.floor(C / eps * math.sqrt(schedule.beta_k(k) * (eta + p) / schedule.T_k(k)))
    else:
        cap = math.floor(24.0 * (eta + p) * diameter**2 / eps)
    return eps / 2.0, max(1, cap)


# -- the algorithm ---------------------------------------------------------------


@dataclass
class IpdsConfig:
    N: int = 50
    R: float | None = None
    c_const: float | None = None
    lo_policy: LoPolicy = field(default_factory=LoPolicy)
    inner_memory: str = "literal"
    query_chain: str = "separate"
    seed: int = 0
    threads: int = 1
    L: float | None = None
    norm_A: float | None = None
    x0: np.ndarray | None = None
    wall_clock: bool = False

    def __post_init__(self):
        if self.inner_memory not in ("literal", "shifted"):
            raise ConfigurationError(f"inner_memory must be 'literal' or 'shifted', got {self.inner_memory!r}")
        if self.query_chain not in ("separate", "shared"):
            raise ConfigurationError(f"query_chain must be 'separate' or 'shared', got {self.query_chain!r}")
        if int(self.threads) < 1:
            raise ConfigurationError("threads must be >= 1")


@dataclass
class IpdsState:
    x_prev: np.ndarray
    x_prevprev: np.ndarray
    x_hat_prev: np.ndarray
    z: np.ndarray
    x_inner_prev: np.ndarray
    x_inner_prevprev: np.ndarray
    v: np.ndarray | None = None
    # last gradient query point; the next one is averaged against it
    x_query: np.ndarray | None = None
    x_inner_sum: np.ndarray | None = None
    weighted_sum: np.ndarray | None = None
    weight_total: float = 0.0
    # x_{k-1}^{T_{k-1} - 1}, used by inner_memory="shifted"
    x_last_but_one: np.ndarray | None = None
    cap_hits: int = 0

    @classmethod
    def initial(cls, x0: np.ndarray) -> "IpdsState":
        x0 = np.array(x0, dtype=float)
        return cls(
            x_prev=x0.copy(), x_prevprev=x0.copy(), x_hat_prev=x0.copy(), z=np.zeros_like(x0),
            x_inner_prev=x0.copy(), x_inner_prevprev=x0.copy(), x_query=x0.copy(),
            weighted_sum=np.zeros_like(x0), x_last_but_one=x0.copy(),
        )

    def output(self) -> np.ndarray:
        return self.weighted_sum / self.weight_total


def outer_step(state: IpdsState, schedule: Schedule, k: int, problem, counters: OracleCounters, seed: int = 0,
               query_chain: str = "separate"):
    """Extrapolate, form the gradient query point and sample ``v_k`` there.

    The extrapolation uses the previous inner average. The query point is
    averaged against the previous query point (``query_chain="separate"``)
    or against the previous inner average (``"shared"``).

    This is the only place the data oracle is touched in outer iteration ``k``.
    """
    lam_k = schedule.lambda_k(k)
    tau_k = schedule.tau_k(k)
    x_tilde = state.x_prev + lam_k * (state.x_hat_prev - state.x_prevprev)
    anchor = state.x_query if query_chain == "separate" else state.x_hat_prev
    state.x_query = (x_tilde + tau_k * anchor) / (1.0 + tau_k)
    if problem.sigma > 0:
        rngs = [node_rng(seed, i, k) for i in range(problem.m)]
        state.v = stochastic_gradient(problem, state.x_query, schedule.c_k(k), rngs, counters)
    else:
        state.v = full_gradient(problem, state.x_query, counters)
    return state


def begin_inner(state: IpdsState, k: int, inner_memory: str = "literal"):
    state.x_inner_prev = state.x_prev.copy()
    if k == 1:
        state.x_inner_prevprev = state.x_prev.copy()
    elif inner_memory == "literal":
        state.x_inner_prevprev = state.x_prev.copy()
    else:
        state.x_inner_prevprev = state.x_last_but_one.copy()
    state.x_inner_sum = np.zeros_like(state.x_prev)
    return state


class _RowSolver:
    """Runs the per-node CGS solves, optionally split over a thread pool.

    Rows are independent, so any chunking gives the same numbers.
    """

    def __init__(self, cset, threads: int = 1):
        self.cset = cset
        self.threads = int(threads)
        self.pool = ThreadPoolExecutor(max_workers=self.threads) if self.threads > 1 else None

    def solve(self, g, u, beta, tol, cap):
        """Return ``(points, lo_calls per row, cap hit per row)``."""
        if self.pool is None:
            res = cgs_solve_rows(self.cset, g, u, beta, tol, cap)
            return res.points, res.lo_calls, res.hit_cap
        chunks = [c for c in np.array_split(np.arange(g.shape[0]), self.threads) if c.size]
        parts = list(self.pool.map(lambda c: cgs_solve_rows(self.cset, g[c], u[c], beta, tol, cap), chunks))
        points = np.vstack([p.points for p in parts])
        calls = np.concatenate([p.lo_calls for p in parts])
        hit = np.concatenate([p.hit_cap for p in parts])
        return points, calls, hit

    def close(self):
        if self.pool is not None:
            self.pool.shutdown()


def inner_sliding_step(state, schedule, k, t, graph, cset, lo_policy, counters, solver=None, mu=None):
    """One communication-sliding step: dual ascent on ``z``, then CGS per node."""
    mu = schedule.mu if mu is None else mu
    alpha = schedule.alpha(k, t)
    u_tilde = state.x_inner_prev + alpha * (state.x_inner_prev - state.x_inner_prevprev)
    state.z = state.z + apply_constraint(graph, u_tilde) / schedule.q(k, t)
    counters.add_comm()
    c = state.v + apply_constraint(graph, state.z)
    counters.add_comm()
    if not np.all(np.isfinite(c)):
        raise NonFiniteIterateError(f"non-finite subproblem at outer iteration {k}, inner step {t}")

    g, u, beta = reduce_subproblem(c, state.x_inner_prev, state.x_prev, mu, schedule.eta(k, t), schedule.p_k(k))
    tol, cap = lo_tolerance(lo_policy, schedule, k, t, diameter=cset.diameter())
    solver = solver if solver is not None else _RowSolver(cset)
    points, calls, hit = solver.solve(g, u, beta, tol, cap)
    counters.add_lo(int(calls.sum()))
    state.cap_hits += int(hit.sum())
    state.x_inner_prevprev = state.x_inner_prev
    state.x_inner_prev = points
    state.x_inner_sum = state.x_inner_sum + points
    return state


def finish_outer(state: IpdsState, schedule: Schedule, k: int):
    T = schedule.T_k(k)
    x_k = state.x_inner_prev
    x_hat_k = state.x_inner_sum / T
    state.x_last_but_one = state.x_inner_prevprev
    state.x_prevprev = state.x_prev
    state.x_prev = x_k
    state.x_hat_prev = x_hat_k
    state.weighted_sum = state.weighted_sum + schedule.beta_k(k) * x_hat_k
    state.weight_total += schedule.beta_k(k)
    return state


def default_x0(cset, m: int) -> np.ndarray:
    x0 = cset.project(cset.lo_oracle(np.zeros(cset.d)))
    return np.tile(x0, (m, 1))


def run_ipds(problem, graph, cset, config: IpdsConfig, reference, counters: OracleCounters | None = None,
             schedule: Schedule | None = None, callback=None):
    """Run the full method and log one record row per outer iteration.

    ``reference`` is ``(x_star, f_star)`` from the centralized solver; gaps
    are measured on the running ``beta_k``-weighted average of the inner
    averages, which is also the returned point. ``callback(k, output,
    counters)`` runs after each logged outer iteration.
    """
    counters = counters if counters is not None else OracleCounters()
    if problem.m != graph.m:
        raise ConfigurationError(f"problem has {problem.m} workers but graph has {graph.m}")
    if schedule is None:
        schedule = schedule_for(problem, graph, cset, config)
    _, f_star = reference

    if config.x0 is None:
        x0 = default_x0(cset, problem.m)
    else:
        x0 = np.broadcast_to(np.asarray(config.x0, dtype=float), (problem.m, problem.d)).copy()
        x0 = cset.project(x0)

    state = IpdsState.initial(x0)
    record = RunRecord()
    solver = _RowSolver(cset, config.threads)
    start = time.perf_counter()
    try:
        for k in range(1, schedule.N + 1):
            outer_step(state, schedule, k, problem, counters, seed=config.seed, query_chain=config.query_chain)
            begin_inner(state, k, config.inner_memory)
            for t in range(1, schedule.T_k(k) + 1):
                inner_sliding_step(state, schedule, k, t, graph, cset, config.lo_policy, counters, solver)
            finish_outer(state, schedule, k)
            out = state.output()
            wall = (time.perf_counter() - start) * 1e3 if config.wall_clock else 0.0
            row = RunRow(
                k=k,
                f_gap=primal_gap(problem, out, f_star),
                consensus_gap=consensus_gap(graph, out),
                samples=counters.samples,
                lo_calls=counters.lo_calls,
                comm_rounds=counters.comm_rounds,
                wall_ms=wall,
            )
            record.append(row)
            if not (np.all(np.isfinite(out)) and np.all(np.isfinite(state.z))):
                raise NonFiniteIterateError(f"non-finite iterate at outer iteration {k}", record=record)
            if callback is not None:
                callback(k, out, counters)
    except NonFiniteIterateError as exc:
        if exc.record is None:
            exc.record = record
        raise
    finally:
        solver.close()
    record.notes["cgs_cap_hits"] = state.cap_hits
    return state.output(), record


def schedule_for(problem, graph, cset, config: IpdsConfig) -> Schedule:
    """Fill in defaults (L from data, ||A|| from the graph, R = diameter, c = sigma^2/R^2)."""
    L = config.L if config.L is not None else smoothness_estimate(problem)
    norm_A = config.norm_A if config.norm_A is not None else operator_norm(graph)
    R = config.R if config.R is not None else cset.diameter()
    if config.c_const is not None:
        c = config.c_const
    else:
        c = problem.sigma**2 / R**2 if problem.sigma > 0 else 0.0
    return make_schedule(L, problem.mu, norm_A, config.N, R, c)
