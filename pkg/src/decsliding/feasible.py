"""Per-node feasible sets with linear minimization oracles and projections.

Every set is compact and convex. All array-valued methods accept a single
vector of shape ``(d,)`` or a batch of row vectors of shape ``(n, d)``; rows
are treated independently so batched and per-row calls agree bit for bit.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .errors import ConfigurationError, InputError

SET_KINDS = ("l2_ball", "l1_ball", "simplex", "box")


_add_reduce = np.add.reduce


def _rowsum(a: np.ndarray) -> np.ndarray:
    return _add_reduce(a, axis=-1)


@dataclass(frozen=True)
class ConstraintSet:
    """A compact convex set in ``R^d``.

    ``radius`` is the ball radius for ``l2_ball``/``l1_ball`` and the total
    mass for ``simplex`` (``{x >= 0, sum(x) = radius}``). ``box`` uses
    ``lower``/``upper`` (scalars or length-d sequences).
    """

    kind: str
    d: int
    radius: float = 1.0
    lower: tuple | float | None = None
    upper: tuple | float | None = None

    def __post_init__(self):
        if self.kind not in SET_KINDS:
            raise ConfigurationError(f"unknown constraint kind {self.kind!r}; expected one of {SET_KINDS}")
        if int(self.d) < 1:
            raise ConfigurationError(f"dimension must be >= 1, got {self.d}")
        if self.kind == "box":
            if self.lower is None or self.upper is None:
                raise ConfigurationError("box needs lower and upper bounds")
            lo, hi = self._bounds()
            if not (np.all(np.isfinite(lo)) and np.all(np.isfinite(hi))):
                raise ConfigurationError("box bounds must be finite")
            if np.any(hi < lo) or not np.any(hi > lo):
                raise ConfigurationError("box needs lower <= upper and a nondegenerate extent")
        elif not (np.isfinite(self.radius) and self.radius > 0):
            raise ConfigurationError(f"radius must be positive and finite, got {self.radius!r}")

    def _bounds(self) -> tuple[np.ndarray, np.ndarray]:
        lo = np.broadcast_to(np.asarray(self.lower, dtype=float), (self.d,))
        hi = np.broadcast_to(np.asarray(self.upper, dtype=float), (self.d,))
        return lo, hi

    # -- geometry -----------------------------------------------------------

    def center(self) -> np.ndarray:
        """Canonical interior point: 0 for balls, barycenter otherwise."""
        if self.kind == "simplex":
            return np.full(self.d, self.radius / self.d)
        if self.kind == "box":
            lo, hi = self._bounds()
            return 0.5 * (lo + hi)
        return np.zeros(self.d)

    def diameter(self) -> float:
        if self.kind in ("l2_ball", "l1_ball"):
            return 2.0 * self.radius
        if self.kind == "simplex":
            # a single point when d == 1
            return self.radius * np.sqrt(2.0) if self.d > 1 else 0.0
        lo, hi = self._bounds()
        return float(np.linalg.norm(hi - lo))

    def vertices(self) -> np.ndarray | None:
        """Vertex list for polytopes with few vertices (None for the l2 ball)."""
        eye = np.eye(self.d)
        if self.kind == "l1_ball":
            return self.radius * np.concatenate([eye, -eye])
        if self.kind == "simplex":
            return self.radius * eye
        if self.kind == "box":
            lo, hi = self._bounds()
            grid = np.array(np.meshgrid(*[[0, 1]] * self.d, indexing="ij")).reshape(self.d, -1).T
            return lo + grid * (hi - lo)
        return None

    # -- oracles ------------------------------------------------------------

    def lo_oracle(self, g: np.ndarray) -> np.ndarray:
        """Exact ``argmin_{x in X} <g, x>``; ties go to the lowest index.

        A zero direction returns :meth:`center`.
        """
        g = np.asarray(g, dtype=float)
        if np.isnan(g).any():
            raise InputError("lo_oracle received NaN in the direction")
        batch = g.reshape(-1, self.d)
        n = batch.shape[0]
        out = np.empty_like(batch)
        rows = np.arange(n)
        if self.kind == "l2_ball":
            nrm = np.sqrt(_rowsum(batch * batch))
            # zero rows map to the center (0)
            nrm[nrm == 0.0] = np.inf
            np.multiply(batch, (-self.radius / nrm)[:, None], out=out)
            out += 0.0
        elif self.kind == "l1_ball":
            j = np.argmax(np.abs(batch), axis=1)
            gj = batch[rows, j]
            out[:] = 0.0
            out[rows, j] = -self.radius * np.sign(gj)
        elif self.kind == "simplex":
            j = np.argmin(batch, axis=1)
            out[:] = 0.0
            out[rows, j] = self.radius
            zero = ~np.any(batch != 0.0, axis=1)
            out[zero] = self.center()
        else:
            lo, hi = self._bounds()
            mid = 0.5 * (lo + hi)
            out[:] = np.where(batch > 0, lo, np.where(batch < 0, hi, mid))
        return out.reshape(g.shape)

    def project(self, x: np.ndarray) -> np.ndarray:
        """Euclidean projection onto the set."""
        x = np.asarray(x, dtype=float)
        if not np.all(np.isfinite(x)):
            raise InputError("project received a non-finite point")
        batch = x.reshape(-1, self.d)
        if self.kind == "l2_ball":
            nrm = np.sqrt(_rowsum(batch * batch))
            scale = np.where(nrm > self.radius, self.radius / np.where(nrm > 0, nrm, 1.0), 1.0)
            out = batch * scale[:, None]
        elif self.kind == "box":
            lo, hi = self._bounds()
            out = np.clip(batch, lo, hi)
        elif self.kind == "simplex":
            out = _project_simplex_rows(batch, self.radius)
        else:
            out = batch.copy()
            outside = _rowsum(np.abs(batch)) > self.radius
            if outside.any():
                sub = batch[outside]
                out[outside] = np.sign(sub) * _project_simplex_rows(np.abs(sub), self.radius)
        return out.reshape(x.shape)

    def violation(self, x: np.ndarray) -> np.ndarray | float:
        """Constraint residual (0 inside the set)."""
        x = np.asarray(x, dtype=float)
        batch = x.reshape(-1, self.d)
        if self.kind == "l2_ball":
            res = np.sqrt(_rowsum(batch * batch)) - self.radius
        elif self.kind == "l1_ball":
            res = _rowsum(np.abs(batch)) - self.radius
        elif self.kind == "simplex":
            res = np.maximum(np.max(-batch, axis=1), np.abs(_rowsum(batch) - self.radius))
        else:
            lo, hi = self._bounds()
            res = np.max(np.maximum(lo - batch, batch - hi), axis=1)
        res = np.maximum(res, 0.0)
        return float(res[0]) if x.ndim == 1 else res

    def contains(self, x: np.ndarray, tol: float = 1e-9):
        """True where the constraint residual is at most ``tol``."""
        res = self.violation(x)
        return res <= tol


def _project_simplex_rows(v: np.ndarray, r: float) -> np.ndarray:
    """Sort-based projection of each row onto ``{x >= 0, sum x = r}``."""
    n, d = v.shape
    u = -np.sort(-v, axis=1)
    css = np.cumsum(u, axis=1) - r
    idx = np.arange(1, d + 1)
    cond = u - css / idx > 0
    rho = d - 1 - np.argmax(cond[:, ::-1], axis=1)
    theta = css[np.arange(n), rho] / (rho + 1)
    return np.maximum(v - theta[:, None], 0.0)
