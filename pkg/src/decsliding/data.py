"""Dataset ingestion (LIBSVM text format) and seeded synthetic generators."""

from __future__ import annotations

import os

import numpy as np

from .errors import ConfigurationError, DataError, ParseError
from .model import Dataset, ProblemSpec, partition_dataset


def parse_libsvm(path) -> Dataset:
    """Read ``<label> <index>:<value> ...`` lines into a dense dataset.

    Indices are 1-based and must increase within a line. Labels ``<= 0``
    become -1, everything else +1. Blank lines and ``#`` comments are skipped.
    """
    labels: list[float] = []
    rows: list[tuple[list[int], list[float]]] = []
    max_index = 0
    with open(path, encoding="utf-8") as fh:
        for lineno, raw in enumerate(fh, start=1):
            line = raw.split("#", 1)[0].strip()
            if not line:
                continue
            tokens = line.split()
            try:
                label = float(tokens[0])
            except ValueError:
                raise ParseError(f"bad label {tokens[0]!r}", lineno) from None
            idx, val = [], []
            prev = 0
            for tok in tokens[1:]:
                key, sep, value = tok.partition(":")
                if not sep:
                    raise ParseError(f"malformed token {tok!r}", lineno)
                try:
                    j = int(key)
                    v = float(value)
                except ValueError:
                    raise ParseError(f"malformed token {tok!r}", lineno) from None
                if j < 1:
                    raise ParseError(f"feature index must be >= 1, got {j}", lineno)
                if j <= prev:
                    raise ParseError(f"feature indices must be ascending ({prev} then {j})", lineno)
                prev = j
                idx.append(j)
                val.append(v)
            labels.append(1.0 if label > 0 else -1.0)
            rows.append((idx, val))
            max_index = max(max_index, prev)
    if not rows:
        raise DataError(f"no samples in {os.fspath(path)!r}")
    features = np.zeros((len(rows), max_index))
    for r, (idx, val) in enumerate(rows):
        features[r, np.asarray(idx, dtype=int) - 1] = val
    return Dataset(features, np.asarray(labels))


def write_libsvm(data: Dataset, path) -> None:
    """Write a dataset in LIBSVM format (zeros omitted, values via ``repr``)."""
    with open(path, "w", encoding="utf-8", newline="\n") as fh:
        for a, y in zip(data.features, data.labels):
            parts = ["+1" if y > 0 else "-1"]
            parts += [f"{j + 1}:{float(v)!r}" for j, v in enumerate(a) if v != 0.0]
            fh.write(" ".join(parts) + "\n")


def make_logistic_dataset(n_samples: int, d: int, seed: int, noise: float = 0.5, density: float = 1.0) -> Dataset:
    """Non-separable binary classification data with features in [-1, 1].

    Labels come from a random linear model with logistic label noise of
    scale ``noise``; ``density`` < 1 zeroes out features at random.
    """
    if n_samples < 1 or d < 1:
        raise ConfigurationError("need at least one sample and one feature")
    rng = np.random.default_rng(seed)
    a = rng.uniform(-1.0, 1.0, size=(n_samples, d))
    if density < 1.0:
        a *= rng.random((n_samples, d)) < density
    w = rng.standard_normal(d)
    score = a @ w + noise * rng.logistic(size=n_samples)
    y = np.where(score > 0, 1.0, -1.0)
    return Dataset(a, y)


def make_quadratic_problem(
    m: int,
    d: int,
    rows_per_node: int,
    L: float,
    cond: float,
    mu: float,
    seed: int,
    spread: float = 1.0,
    sigma: float = 0.0,
) -> ProblemSpec:
    """Least-squares problem whose local curvature is known exactly.

    Every node gets ``B_i = U_i diag(s) V_i^T`` with singular values spread
    geometrically from ``sqrt(L)`` down to ``sqrt(L / cond)``, so that
    ``lambda_max(B_i^T B_i) = L`` on every node. Targets ``b_i`` come from
    node-specific ground truths (offsets of scale ``spread``) so the local
    minimizers disagree.
    """
    if rows_per_node < d:
        raise ConfigurationError("rows_per_node must be >= d for the prescribed spectrum")
    if L <= 0 or cond < 1:
        raise ConfigurationError("need L > 0 and cond >= 1")
    rng = np.random.default_rng(seed)
    sv = np.sqrt(L) * np.geomspace(1.0, 1.0 / np.sqrt(cond), d)
    common = rng.standard_normal(d)
    blocks, targets = [], []
    for _ in range(m):
        u, _ = np.linalg.qr(rng.standard_normal((rows_per_node, d)))
        v, _ = np.linalg.qr(rng.standard_normal((d, d)))
        b_mat = (u * sv) @ v.T
        truth = common + spread * rng.standard_normal(d)
        blocks.append(b_mat)
        targets.append(b_mat @ truth)
    data = Dataset(np.vstack(blocks), np.concatenate(targets))
    partition = [np.arange(i * rows_per_node, (i + 1) * rows_per_node) for i in range(m)]
    return ProblemSpec("quadratic", data, partition, mu=mu, sigma=sigma)


def make_logistic_problem(data: Dataset, m: int, mu: float = 0.0, sigma: float = 0.0, seed: int = 0) -> ProblemSpec:
    return ProblemSpec("logistic", data, partition_dataset(data, m, seed), mu=mu, sigma=sigma)
