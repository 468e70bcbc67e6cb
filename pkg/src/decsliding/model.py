"""Finite-sum local objectives, data oracles with sample accounting, and a
centralized reference solver.

Node ``i`` owns a shard of the data and the local objective

    f_i(x) = sum_{j in shard i} loss(a_j^T x, y_j) + mu * 0.5 * ||x||^2

with ``loss`` either the logistic loss ``log(1 + exp(-y s))`` or the squared
residual ``0.5 * (s - y)^2``. The data-dependent part is called ``f_tilde``.
"""

from __future__ import annotations

from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field

import numpy as np

from .errors import ConfigurationError, ConvergenceError, DataError, DimensionError

PROBLEM_KINDS = ("logistic", "quadratic")


@dataclass(frozen=True)
class Dataset:
    features: np.ndarray
    labels: np.ndarray

    def __post_init__(self):
        a = np.asarray(self.features, dtype=float)
        y = np.asarray(self.labels, dtype=float)
        if a.ndim != 2 or y.ndim != 1 or a.shape[0] != y.shape[0]:
            raise DataError(f"features {a.shape} and labels {y.shape} are inconsistent")
        if a.shape[0] == 0:
            raise DataError("dataset is empty")
        if not (np.all(np.isfinite(a)) and np.all(np.isfinite(y))):
            raise DataError("dataset contains NaN or infinite values")
        object.__setattr__(self, "features", a)
        object.__setattr__(self, "labels", y)

    @property
    def n_samples(self) -> int:
        return self.features.shape[0]

    @property
    def n_features(self) -> int:
        return self.features.shape[1]


@dataclass
class OracleCounters:
    """Cumulative oracle usage. Only ever incremented."""

    samples: int = 0
    lo_calls: int = 0
    comm_rounds: int = 0

    def add_samples(self, n: int) -> None:
        if n < 0:
            raise ValueError("counter increments must be non-negative")
        self.samples += int(n)

    def add_lo(self, n: int) -> None:
        if n < 0:
            raise ValueError("counter increments must be non-negative")
        self.lo_calls += int(n)

    def add_comm(self, n: int = 1) -> None:
        if n < 0:
            raise ValueError("counter increments must be non-negative")
        self.comm_rounds += int(n)

    def snapshot(self) -> tuple[int, int, int]:
        return self.samples, self.lo_calls, self.comm_rounds


def partition_dataset(data: Dataset, m: int, seed: int) -> list[np.ndarray]:
    """Shuffle sample indices and cut them into ``m`` contiguous blocks."""
    if m < 1 or data.n_samples < m:
        raise ConfigurationError(f"cannot split {data.n_samples} samples over {m} workers")
    perm = np.random.default_rng(seed).permutation(data.n_samples)
    return [np.sort(block) for block in np.array_split(perm, m)]


@dataclass
class ProblemSpec:
    """Decentralized finite-sum problem over ``m`` workers in ``R^d``.

    ``sigma`` is the assumed gradient-noise level: 0 means workers use full
    local gradients, a positive value switches on mini-batch sampling.
    """

    kind: str
    data: Dataset
    partition: list
    mu: float = 0.0
    sigma: float = 0.0
    threads: int = 1
    _shards: list = field(init=False, repr=False)

    def __post_init__(self):
        if self.kind not in PROBLEM_KINDS:
            raise ConfigurationError(f"unknown problem kind {self.kind!r}")
        if not (np.isfinite(self.mu) and self.mu >= 0):
            raise ConfigurationError(f"mu must be >= 0, got {self.mu}")
        if not (np.isfinite(self.sigma) and self.sigma >= 0):
            raise ConfigurationError(f"sigma must be >= 0, got {self.sigma}")
        parts = [np.asarray(p, dtype=np.int64) for p in self.partition]
        if len(parts) < 1:
            raise ConfigurationError("partition must have at least one block")
        joined = np.concatenate(parts)
        if joined.size != self.data.n_samples or np.unique(joined).size != joined.size:
            raise ConfigurationError("partition must cover every sample exactly once")
        if any(p.size == 0 for p in parts):
            raise ConfigurationError("every worker needs a non-empty shard")
        self.partition = parts
        self._shards = [(self.data.features[p], self.data.labels[p]) for p in parts]

    @property
    def m(self) -> int:
        return len(self.partition)

    @property
    def d(self) -> int:
        return self.data.n_features

    @property
    def n_samples(self) -> int:
        return self.data.n_samples

    def shard(self, i: int) -> tuple[np.ndarray, np.ndarray]:
        return self._shards[i]

    def shard_sizes(self) -> list[int]:
        return [p.size for p in self.partition]

    def _check(self, x):
        x = np.asarray(x, dtype=float)
        if x.shape != (self.m, self.d):
            raise DimensionError(f"expected stacked point of shape {(self.m, self.d)}, got {x.shape}")
        return x

    def _map_nodes(self, fn, nodes):
        if self.threads > 1 and len(nodes) > 1:
            with ThreadPoolExecutor(max_workers=self.threads) as pool:
                return list(pool.map(fn, nodes))
        return [fn(i) for i in nodes]


# -- per-datum loss pieces --------------------------------------------------


def _loss(kind, s, y):
    if kind == "logistic":
        return np.logaddexp(0.0, -y * s)
    return 0.5 * (s - y) ** 2


def _dloss(kind, s, y):
    """Derivative of the loss with respect to the score ``s``."""
    if kind == "logistic":
        # -y * sigmoid(-y s), written to avoid overflow
        z = -y * s
        return -y * np.exp(z - np.logaddexp(0.0, z))
    return s - y


def local_gradient(problem: ProblemSpec, i: int, x: np.ndarray, rows=None) -> np.ndarray:
    """Gradient of the data part of node ``i``'s objective (summed, not averaged)."""
    a, y = problem.shard(i)
    if rows is not None:
        a, y = a[rows], y[rows]
    return a.T @ _dloss(problem.kind, a @ x, y)


def full_gradient(problem: ProblemSpec, x_hat: np.ndarray, counters: OracleCounters | None = None) -> np.ndarray:
    """Row ``i`` is the exact gradient of ``f_tilde_i`` at ``x_hat[i]``.

    Charges one sample per datum, ``M`` in total.
    """
    x_hat = problem._check(x_hat)
    rows = problem._map_nodes(lambda i: local_gradient(problem, i, x_hat[i]), range(problem.m))
    if counters is not None:
        counters.add_samples(problem.n_samples)
    return np.vstack(rows)


def node_rng(seed: int, node: int, k: int) -> np.random.Generator:
    """Independent stream keyed by (run seed, worker, outer iteration)."""
    return np.random.default_rng([int(seed), int(node), int(k)])


def stochastic_gradient(
    problem: ProblemSpec,
    x_hat: np.ndarray,
    batch: int,
    rngs,
    counters: OracleCounters | None = None,
    replace: bool = True,
) -> np.ndarray:
    """Unbiased mini-batch estimate of each ``grad f_tilde_i``.

    Each worker draws ``batch`` indices uniformly from its shard and rescales
    the batch mean by the shard size. ``rngs`` holds one generator per node.
    Charges ``m * batch`` samples.
    """
    x_hat = problem._check(x_hat)
    batch = int(batch)
    if batch < 1:
        raise ConfigurationError(f"batch size must be >= 1, got {batch}")

    def one(i):
        n_i = problem.partition[i].size
        if n_i == 0:
            raise ConfigurationError(f"worker {i} has an empty shard")
        if not replace and batch > n_i:
            raise ConfigurationError("batch larger than shard when sampling without replacement")
        idx = rngs[i].choice(n_i, size=batch, replace=replace)
        return local_gradient(problem, i, x_hat[i], rows=idx) * (n_i / batch)

    rows = problem._map_nodes(one, range(problem.m))
    if counters is not None:
        counters.add_samples(problem.m * batch)
    return np.vstack(rows)


def objective_value(problem: ProblemSpec, x: np.ndarray) -> float:
    """``f(x) = sum_i f_i(x_i)``; pure instrumentation, never charged."""
    x = problem._check(x)
    total = 0.0
    for i in range(problem.m):
        a, y = problem.shard(i)
        total += float(np.sum(_loss(problem.kind, a @ x[i], y)))
    if problem.mu:
        total += problem.mu * 0.5 * float(np.sum(x * x))
    return total


def smoothness_estimate(problem: ProblemSpec) -> float:
    """Upper bound on the gradient Lipschitz constant of every ``f_tilde_i``."""
    best = 0.0
    for i in range(problem.m):
        a, _ = problem.shard(i)
        if problem.kind == "logistic":
            val = 0.25 * float(np.sum(a * a))
        else:
            val = float(np.linalg.eigvalsh(a.T @ a)[-1])
        best = max(best, val)
    return best


# -- centralized reference ----------------------------------------------------


def _consensus_parts(problem: ProblemSpec):
    a, y = problem.data.features, problem.data.labels
    mu_total = problem.m * problem.mu

    def value(x):
        return float(np.sum(_loss(problem.kind, a @ x, y))) + 0.5 * mu_total * float(x @ x)

    def grad(x):
        return a.T @ _dloss(problem.kind, a @ x, y) + mu_total * x

    curv = float(np.linalg.eigvalsh(a.T @ a)[-1]) if a.shape[1] else 0.0
    lip = (0.25 if problem.kind == "logistic" else 1.0) * curv + mu_total
    return value, grad, lip


def consensus_objective(problem: ProblemSpec):
    """Return ``(value, grad, lipschitz)`` for ``F(x) = sum_i f_i(x)`` on ``R^d``."""
    return _consensus_parts(problem)


def reference_optimum(problem: ProblemSpec, cset, tol: float = 1e-9, max_iter: int = 1_000_000, x0=None):
    """Solve ``min_{x in X} sum_i f_i(x)`` for a single shared ``x``.

    Accelerated projected gradient with function-value restarts. Stops once
    the Frank-Wolfe gap ``max_s <grad F(x), x - s>``, which bounds
    ``F(x) - F*``, is at most ``tol``.

    Returns
    -------
    x_star : ndarray, shape (d,)
    f_star : float
        ``F(x_star)``; also equal to ``objective_value`` at the replicated point.
    """
    if not tol > 0:
        raise ConfigurationError(f"tol must be positive, got {tol}")
    value, grad, lip = _consensus_parts(problem)
    if lip <= 0:
        lip = 1.0
    step = 1.0 / lip
    x = cset.project(cset.center() if x0 is None else np.asarray(x0, dtype=float))
    y = x.copy()
    theta = 1.0
    fx = value(x)
    best_x, best_f, best_gap = x.copy(), fx, np.inf
    for _ in range(max_iter):
        gx = grad(x)
        gap = float(gx @ (x - cset.lo_oracle(gx)))
        if gap < best_gap:
            best_gap = gap
        if fx < best_f:
            best_x, best_f = x.copy(), fx
        if gap <= tol:
            return x, fx
        x_new = cset.project(y - step * grad(y))
        f_new = value(x_new)
        if f_new > fx and theta > 1.0:
            # restart momentum from the current point
            theta = 1.0
            y = x.copy()
            continue
        theta_new = 0.5 * (1.0 + np.sqrt(1.0 + 4.0 * theta * theta))
        y = x_new + ((theta - 1.0) / theta_new) * (x_new - x)
        x, fx, theta = x_new, f_new, theta_new
    raise ConvergenceError(
        f"reference solver stopped after {max_iter} iterations with Frank-Wolfe gap {best_gap:.3e} > {tol:.3e}",
        best=best_x,
        value=best_f,
    )
