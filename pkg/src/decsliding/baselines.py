"""Reference algorithms measured with the same counters and records as I-PDS.

``run_defw`` is a consensus Frank-Wolfe method with gradient tracking:
each iteration gossips the iterates, refreshes every worker's full local
gradient, gossips the tracked gradients and takes a Frank-Wolfe step.
``run_projected_gradient`` is the centralized projected gradient method on
the shared-variable problem.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .errors import ConfigurationError, StepSizeError
from .metrics import RunRecord, RunRow, consensus_gap, primal_gap
from .model import OracleCounters, consensus_objective, full_gradient, smoothness_estimate


@dataclass(frozen=True)
class GossipMatrix:
    """Symmetric doubly stochastic mixing matrix supported on the graph."""

    W: np.ndarray

    @property
    def m(self) -> int:
        return self.W.shape[0]

    def mix(self, x: np.ndarray) -> np.ndarray:
        return self.W @ x

    def second_eigenvalue(self) -> float:
        """Second-largest eigenvalue modulus; below 1 on connected graphs."""
        ev = np.sort(np.abs(np.linalg.eigvalsh(self.W)))[::-1]
        return float(ev[1]) if ev.size > 1 else 0.0


def metropolis_weights(graph) -> GossipMatrix:
    """``W_ij = 1 / (1 + max(deg_i, deg_j))`` on edges, remainder on the diagonal."""
    if not graph.is_connected():
        raise ConfigurationError("metropolis weights need a connected graph")
    deg = graph.degrees()
    W = np.zeros((graph.m, graph.m))
    for i, j in sorted(graph.edges):
        W[i, j] = W[j, i] = 1.0 / (1.0 + max(deg[i], deg[j]))
    # fixed summation order keeps the diagonal reproducible
    W[np.diag_indices(graph.m)] = 1.0 - W.sum(axis=1)
    W.flags.writeable = False
    return GossipMatrix(W)


def defw_step_size(t: int, mu: float) -> float:
    if mu > 0:
        return min(1.0, 2.0 / (t + 1))
    return 2.0 / (t + 2)


def _local_gradients(problem, x_bar, counters):
    grad = full_gradient(problem, x_bar, counters)
    if problem.mu:
        grad = grad + problem.mu * x_bar
    return grad


def run_defw(problem, graph, cset, iters: int, reference, counters: OracleCounters | None = None,
             x0=None, callback=None):
    """Decentralized Frank-Wolfe with gradient tracking.

    The tracker starts at zero with a zero "previous gradient", so the first
    iteration sets it to the fresh local gradients and every iteration costs
    exactly one full pass over each shard. ``callback(t, x, counters)`` runs
    after each logged iteration.

    Returns the final stacked iterate and the per-iteration record.
    """
    if problem.sigma > 0:
        raise ConfigurationError("DeFW needs exact gradients (sigma = 0)")
    if problem.m != graph.m:
        raise ConfigurationError(f"problem has {problem.m} workers but graph has {graph.m}")
    if int(iters) < 1:
        raise ConfigurationError("iters must be >= 1")
    counters = counters if counters is not None else OracleCounters()
    _, f_star = reference
    gossip = metropolis_weights(graph)

    if x0 is None:
        x = np.tile(cset.project(cset.center()), (problem.m, 1))
    else:
        x = cset.project(np.broadcast_to(np.asarray(x0, dtype=float), (problem.m, problem.d)).copy())
    tracker = np.zeros_like(x)
    grad_prev = np.zeros_like(x)

    record = RunRecord()
    for t in range(1, int(iters) + 1):
        x_bar = gossip.mix(x)
        counters.add_comm()
        grad = _local_gradients(problem, x_bar, counters)
        tracker = gossip.mix(tracker) + grad - grad_prev
        counters.add_comm()
        grad_prev = grad
        s = cset.lo_oracle(tracker)
        counters.add_lo(problem.m)
        x = x_bar + defw_step_size(t, problem.mu) * (s - x_bar)
        record.append(RunRow(
            k=t,
            f_gap=primal_gap(problem, x, f_star),
            consensus_gap=consensus_gap(graph, x),
            samples=counters.samples,
            lo_calls=counters.lo_calls,
            comm_rounds=counters.comm_rounds,
        ))
        if callback is not None:
            callback(t, x, counters)
    return x, record


def run_projected_gradient(problem, cset, iters: int, step="auto", reference=None,
                           counters: OracleCounters | None = None, x0=None):
    """Centralized projected gradient on ``F(x) = sum_i f_i(x)``.

    ``step="auto"`` uses ``1 / (m (L + mu))``, the inverse of a Lipschitz
    bound for ``grad F`` built from the per-node smoothness estimate. Each
    iteration touches every sample once. Raises :class:`StepSizeError` when
    the objective grows for 10 consecutive iterations.
    """
    if int(iters) < 0:
        raise ConfigurationError("iters must be >= 0")
    counters = counters if counters is not None else OracleCounters()
    value, grad, _ = consensus_objective(problem)
    if step == "auto":
        step = 1.0 / (problem.m * (smoothness_estimate(problem) + problem.mu))
    step = float(step)
    if not (np.isfinite(step) and step >= 0):
        raise ConfigurationError(f"step must be a non-negative number or 'auto', got {step!r}")
    f_star = reference[1] if reference is not None else 0.0

    x = cset.project(cset.center() if x0 is None else np.asarray(x0, dtype=float))
    fx = value(x)
    rising = 0
    record = RunRecord()
    for k in range(1, int(iters) + 1):
        x = cset.project(x - step * grad(x))
        counters.add_samples(problem.n_samples)
        f_new = value(x)
        rising = rising + 1 if f_new > fx else 0
        if rising >= 10:
            raise StepSizeError(f"objective increased for 10 consecutive iterations (step={step:g})")
        fx = f_new
        record.append(RunRow(
            k=k,
            f_gap=fx - f_star,
            consensus_gap=0.0,
            samples=counters.samples,
            lo_calls=counters.lo_calls,
            comm_rounds=counters.comm_rounds,
        ))
    return x, record
