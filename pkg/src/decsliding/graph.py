"""Communication topologies and the Laplacian consensus operator.

The network-wide constraint ``A x = 0`` uses ``A = L kron I_d`` where ``L`` is
the graph Laplacian. ``A`` is never materialized: a stacked point is stored as
an ``m x d`` array (one row per worker) and ``A x`` is simply ``L @ x``.
"""

from __future__ import annotations

from collections import deque
from dataclasses import dataclass, field
from itertools import combinations

import numpy as np

from .errors import ConfigurationError, DimensionError, GenerationError

TOPOLOGIES = ("path", "star", "complete", "barbell", "erdos_renyi")

MAX_ER_RETRIES = 1000


@dataclass(frozen=True)
class Graph:
    """Undirected, unweighted, connected communication graph.

    Attributes
    ----------
    kind : str
        Topology tag, one of ``TOPOLOGIES``.
    m : int
        Number of workers.
    edges : frozenset of (int, int)
        Undirected edges stored as ``(i, j)`` with ``i < j``.
    laplacian : ndarray, shape (m, m)
        Degree matrix minus adjacency matrix (read-only).
    """

    kind: str
    m: int
    edges: frozenset
    laplacian: np.ndarray = field(repr=False, compare=False)

    @classmethod
    def from_edges(cls, kind: str, m: int, edges) -> "Graph":
        norm = frozenset((min(i, j), max(i, j)) for i, j in edges)
        for i, j in norm:
            if i == j or not (0 <= i < m and 0 <= j < m):
                raise ConfigurationError(f"invalid edge ({i}, {j}) for m={m}")
        lap = np.zeros((m, m))
        for i, j in norm:
            lap[i, j] = lap[j, i] = -1.0
            lap[i, i] += 1.0
            lap[j, j] += 1.0
        lap.flags.writeable = False
        return cls(kind=kind, m=m, edges=norm, laplacian=lap)

    def degrees(self) -> np.ndarray:
        return np.diag(self.laplacian).astype(int)

    def neighbors(self, i: int) -> list[int]:
        return [j for j in range(self.m) if j != i and self.laplacian[i, j] != 0.0]

    def is_connected(self) -> bool:
        return _connected(self.m, self.edges)


def _connected(m: int, edges) -> bool:
    if m <= 1:
        return True
    adj = [[] for _ in range(m)]
    for i, j in edges:
        adj[i].append(j)
        adj[j].append(i)
    seen = {0}
    queue = deque([0])
    while queue:
        i = queue.popleft()
        for j in adj[i]:
            if j not in seen:
                seen.add(j)
                queue.append(j)
    return len(seen) == m


def build_topology(kind: str, m: int, params: dict | None = None, seed: int = 0) -> Graph:
    """Build a connected graph of the requested topology.

    ``params`` only matters for ``erdos_renyi`` (key ``p``, the edge
    probability). Erdős–Rényi draws are repeated with seeds ``seed``,
    ``seed + 1``, ... until the sample is connected.
    """
    params = dict(params or {})
    if kind not in TOPOLOGIES:
        raise ConfigurationError(f"unknown topology {kind!r}; expected one of {TOPOLOGIES}")
    if not isinstance(m, (int, np.integer)) or m < 2:
        raise ConfigurationError(f"topology needs m >= 2 workers, got {m!r}")
    m = int(m)

    if kind == "path":
        edges = [(i, i + 1) for i in range(m - 1)]
    elif kind == "star":
        edges = [(0, i) for i in range(1, m)]
    elif kind == "complete":
        edges = list(combinations(range(m), 2))
    elif kind == "barbell":
        if m % 2 or m < 6:
            raise ConfigurationError(f"barbell needs an even m >= 6, got {m}")
        h = m // 2
        edges = list(combinations(range(h), 2))
        edges += list(combinations(range(h, m), 2))
        edges.append((h - 1, h))
    else:
        p = params.get("p")
        if p is None or not (0.0 < float(p) <= 1.0):
            raise ConfigurationError(f"erdos_renyi needs 0 < p <= 1, got {p!r}")
        edges = _erdos_renyi_edges(m, float(p), int(seed))
    return Graph.from_edges(kind, m, edges)


def _erdos_renyi_edges(m: int, p: float, seed: int) -> list[tuple[int, int]]:
    iu, ju = np.triu_indices(m, k=1)
    for attempt in range(MAX_ER_RETRIES):
        rng = np.random.default_rng(seed + attempt)
        keep = rng.random(iu.size) < p
        edges = list(zip(iu[keep].tolist(), ju[keep].tolist()))
        if _connected(m, edges):
            return edges
    raise GenerationError(
        f"erdos_renyi(m={m}, p={p}) not connected after {MAX_ER_RETRIES} draws from seed {seed}"
    )


def apply_constraint(graph: Graph, x: np.ndarray) -> np.ndarray:
    """Return ``A x`` for a stacked point ``x`` of shape ``(m, d)``.

    ``A`` is symmetric, so this also computes ``A^T z``.
    """
    x = np.asarray(x, dtype=float)
    if x.ndim != 2 or x.shape[0] != graph.m:
        raise DimensionError(f"expected a stacked point with {graph.m} rows, got shape {x.shape}")
    return graph.laplacian @ x


def operator_norm(graph: Graph, tol: float = 1e-14, max_iter: int = 100_000) -> float:
    """Largest Laplacian eigenvalue, which equals ``||L kron I_d||_2``.

    Power iteration on ``L`` restricted to the complement of the consensus
    direction. Falls back to a dense eigensolve if the iteration stalls.
    """
    lap = graph.laplacian
    m = graph.m
    if m == 1 or not graph.edges:
        return 0.0
    ones = np.full(m, 1.0 / np.sqrt(m))
    v = np.random.default_rng(12345).standard_normal(m)
    v -= ones * (ones @ v)
    v /= np.linalg.norm(v)
    lam = 0.0
    for _ in range(max_iter):
        w = lap @ v
        w -= ones * (ones @ w)
        lam_new = float(v @ w)
        nrm = np.linalg.norm(w)
        if nrm == 0.0:
            break
        v = w / nrm
        if abs(lam_new - lam) <= tol * abs(lam_new):
            lam = lam_new
            # Rayleigh quotient converges quadratically; polish once more
            return float(v @ (lap @ v))
        lam = lam_new
    return float(np.linalg.eigvalsh(lap)[-1])


def laplacian_spectrum(graph: Graph) -> np.ndarray:
    """All Laplacian eigenvalues in ascending order."""
    return np.linalg.eigvalsh(graph.laplacian)


def spectral_gap(graph: Graph) -> float:
    """Normalized algebraic connectivity ``lambda_2(L) / lambda_max(L)``."""
    if graph.m < 2:
        raise ConfigurationError("spectral gap needs at least two workers")
    if not graph.is_connected():
        raise ConfigurationError(f"spectral gap undefined: {graph.kind} graph is disconnected")
    ev = laplacian_spectrum(graph)
    return float(ev[1] / ev[-1])
