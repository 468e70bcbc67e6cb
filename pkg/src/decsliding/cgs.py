"""Conditional gradient solver for the proximal subproblems.

Each call minimizes

    phi(x) = <g, x> + (beta / 2) ||x - u||^2    over x in X

with Frank-Wolfe steps and exact line search, stopping once the Wolfe gap
``max_{v in X} <phi'(x), x - v>`` drops to the tolerance. Every iteration
spends exactly one linear-oracle call.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .errors import ConfigurationError, ParameterError


@dataclass
class CgsResult:
    point: np.ndarray
    lo_calls: int
    final_gap: float
    hit_cap: bool = False


@dataclass
class CgsBatchResult:
    """Row-wise results of independent CGS solves."""

    points: np.ndarray
    lo_calls: np.ndarray
    final_gaps: np.ndarray
    hit_cap: np.ndarray

    def __getitem__(self, i) -> CgsResult:
        return CgsResult(self.points[i], int(self.lo_calls[i]), float(self.final_gaps[i]), bool(self.hit_cap[i]))


def phi(g, u, beta, x) -> np.ndarray | float:
    diff = x - u
    return (g * x).sum(axis=-1) + 0.5 * beta * (diff * diff).sum(axis=-1)


def wolfe_gap(cset, g, u, beta, u_t):
    """Wolfe gap of the subproblem at ``u_t`` and the oracle vertex behind it.

    Costs one linear-oracle call. Returns ``(gap, v_t)``.
    """
    grad = g + beta * (u_t - u)
    v = cset.lo_oracle(grad)
    return float(grad @ (u_t - v)), v


def default_cap(beta: float, diameter: float, tol: float) -> int:
    """Iteration cap used alongside a pure tolerance stop."""
    if tol <= 0:
        raise ConfigurationError("a positive tolerance or an explicit max_iter is required")
    return max(1, 10 * int(np.floor(12.0 * beta * diameter**2 / tol)))


def cgs_solve(cset, g, u, beta: float, tol: float = 0.0, max_iter: int | None = None, callback=None) -> CgsResult:
    """Approximately solve one subproblem; see :func:`cgs_solve_rows`."""
    g = np.asarray(g, dtype=float)
    u = np.asarray(u, dtype=float)
    res = cgs_solve_rows(cset, g[None, :], u[None, :], beta, tol, max_iter, callback)
    return res[0]


def cgs_solve_rows(cset, g, u, beta, tol=0.0, max_iter=None, callback=None) -> CgsBatchResult:
    """Run independent CGS solves on the rows of ``g`` and ``u``.

    ``beta``, ``tol`` and ``max_iter`` may be scalars or per-row arrays.
    Rows whose ``u`` lies outside the set start from ``lo_oracle(g)``
    instead. The step is the exact minimizer of ``phi`` along the segment
    to the oracle vertex, clipped at 1. ``callback(rows, points)``, if
    given, sees the start points and then every step of the rows still
    running.
    """
    g = np.asarray(g, dtype=float)
    u = np.asarray(u, dtype=float)
    n = g.shape[0]
    beta = np.broadcast_to(np.asarray(beta, dtype=float), (n,))
    tol = np.broadcast_to(np.asarray(tol, dtype=float), (n,))
    if np.any(beta <= 0):
        raise ParameterError("CGS needs beta > 0")
    if max_iter is None:
        diam = cset.diameter()
        cap = np.array([default_cap(b, diam, t) for b, t in zip(beta, tol)], dtype=np.int64)
    else:
        cap = np.broadcast_to(np.asarray(max_iter, dtype=np.int64), (n,)).copy()
    if np.any(cap < 1):
        raise ConfigurationError("max_iter must be >= 1")

    x = u.copy()
    bad = ~np.asarray(cset.contains(u, 1e-9)).reshape(n)
    if bad.any():
        x[bad] = cset.lo_oracle(g[bad])

    calls = np.zeros(n, dtype=np.int64)
    gaps = np.full(n, np.inf)
    capped = np.zeros(n, dtype=bool)
    active = np.arange(n)
    lo = cset.lo_oracle
    rowsum = np.add.reduce
    # views of the still-active rows; re-gathered only when some row stops
    xa, ga, ua, ba, ta, ca = x, g, u, beta, tol, cap
    spent = 0
    if callback is not None:
        callback(active, xa)
    while True:
        grad = ga + ba[:, None] * (xa - ua)
        d = lo(grad) - xa
        spent += 1
        gap = -rowsum(grad * d, axis=1)
        denom = ba * rowsum(d * d, axis=1)
        done = (gap <= ta) | (denom == 0.0)
        alpha = np.minimum(1.0, gap / np.where(done, 1.0, denom))
        alpha[done] = 0.0
        xa = xa + alpha[:, None] * d
        if callback is not None:
            callback(active, xa)
        stop = done | (spent >= ca)
        if not stop.any():
            continue
        x[active] = xa
        calls[active] = spent
        gaps[active] = gap
        capped[active[stop & ~done]] = True
        keep = ~stop
        if not keep.any():
            break
        active = active[keep]
        xa, ga, ua, ba, ta, ca = xa[keep], g[active], u[active], beta[active], tol[active], cap[active]
    return CgsBatchResult(points=x, lo_calls=calls, final_gaps=gaps, hit_cap=capped)


def reduce_subproblem(c, x_prev, x_anchor, mu: float, eta: float, p: float):
    """Rewrite the inner proximal step in ``(g, u, beta)`` form.

    ``mu/2 ||x||^2 + <c, x> + eta/2 ||x - x_prev||^2 + p/2 ||x - x_anchor||^2``
    equals ``<g, x> + beta/2 ||x - u||^2`` up to a constant, with
    ``beta = mu + eta + p``, ``u = (eta x_prev + p x_anchor) / beta``, ``g = c``.
    """
    beta = mu + eta + p
    if not beta > 0:
        raise ParameterError(f"subproblem curvature must be positive, got beta={beta}")
    u = (eta * np.asarray(x_prev, dtype=float) + p * np.asarray(x_anchor, dtype=float)) / beta
    return np.asarray(c, dtype=float), u, beta
