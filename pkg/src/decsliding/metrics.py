"""Optimality/consensus gaps, per-iteration run records, and CSV output."""

from __future__ import annotations

import csv
import io
import os
from dataclasses import astuple, dataclass, field

import numpy as np

from .graph import apply_constraint
from .model import objective_value

CSV_COLUMNS = ("k", "f_gap", "consensus_gap", "samples", "lo_calls", "comm_rounds", "wall_ms")


@dataclass(frozen=True)
class RunRow:
    k: int
    f_gap: float
    consensus_gap: float
    samples: int
    lo_calls: int
    comm_rounds: int
    wall_ms: float = 0.0


@dataclass
class RunRecord:
    """One row per outer iteration (or per iteration for the baselines)."""

    rows: list = field(default_factory=list)
    # free-form extras (e.g. CGS cap warnings); not written to CSV
    notes: dict = field(default_factory=dict)

    def append(self, row: RunRow) -> None:
        if self.rows:
            last = self.rows[-1]
            if row.samples < last.samples or row.lo_calls < last.lo_calls or row.comm_rounds < last.comm_rounds:
                raise ValueError("oracle counters must be non-decreasing")
        self.rows.append(row)

    def __len__(self) -> int:
        return len(self.rows)

    def __iter__(self):
        return iter(self.rows)

    def column(self, name: str) -> np.ndarray:
        if name not in CSV_COLUMNS:
            raise KeyError(f"unknown column {name!r}")
        return np.array([getattr(r, name) for r in self.rows])

    @property
    def last(self) -> RunRow:
        return self.rows[-1]


def primal_gap(problem, x: np.ndarray, f_star: float) -> float:
    return objective_value(problem, x) - f_star


def consensus_gap(graph, x: np.ndarray) -> float:
    """Euclidean norm of ``A x``; zero exactly when all rows agree."""
    return float(np.linalg.norm(apply_constraint(graph, x)))


def worst_node_loss(problem, x: np.ndarray) -> float:
    """Largest per-sample loss of any single worker's model on all the data.

    Row ``i`` of ``x`` is replicated to every worker and scored with the full
    objective divided by the sample count.
    """
    x = np.asarray(x, dtype=float)
    return max(objective_value(problem, np.tile(row, (x.shape[0], 1))) for row in x) / problem.n_samples


def _fmt(value) -> str:
    if isinstance(value, (int, np.integer)):
        return str(int(value))
    return format(float(value), ".12g")


def format_csv(record: RunRecord) -> str:
    buf = io.StringIO()
    writer = csv.writer(buf, lineterminator="\n")
    writer.writerow(CSV_COLUMNS)
    for row in record.rows:
        writer.writerow([_fmt(v) for v in astuple(row)])
    return buf.getvalue()


def write_csv(record: RunRecord, path) -> None:
    """Write the record with the stable column order and LF line endings."""
    text = format_csv(record)
    try:
        with open(path, "w", newline="", encoding="utf-8") as fh:
            fh.write(text)
    except OSError as exc:
        raise OSError(f"cannot write run record to {os.fspath(path)!r}: {exc}") from exc


def read_csv(path) -> RunRecord:
    record = RunRecord()
    with open(path, newline="", encoding="utf-8") as fh:
        reader = csv.DictReader(fh)
        missing = set(CSV_COLUMNS) - set(reader.fieldnames or ())
        if missing:
            raise ValueError(f"{os.fspath(path)!r} lacks columns {sorted(missing)}")
        for r in reader:
            record.rows.append(
                RunRow(
                    k=int(r["k"]),
                    f_gap=float(r["f_gap"]),
                    consensus_gap=float(r["consensus_gap"]),
                    samples=int(r["samples"]),
                    lo_calls=int(r["lo_calls"]),
                    comm_rounds=int(r["comm_rounds"]),
                    wall_ms=float(r["wall_ms"]),
                )
            )
    return record
