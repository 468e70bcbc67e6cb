"""Run configuration: TOML files parsed into validated, immutable records.

Layout (every table is optional except ``problem``; defaults in brackets)::

    run_id = "demo"                       # ["run"]

    [problem]
    kind = "logistic"                     # logistic | quadratic
    data_path = "data/train.svm"          # LIBSVM file, logistic only
    mu = 0.0
    sigma = 0.0
    partition_seed = 0
    [problem.synthetic]                   # used when data_path is absent
    n_samples = 2000                      # logistic: n_samples, d, seed, noise, density
    d = 22                                # quadratic: d, rows_per_node, L, cond, seed, spread

    [graph]
    kind = "erdos_renyi"                  # path | star | complete | barbell | erdos_renyi
    m = 10
    p = 0.3
    seed = 0

    [constraint]
    kind = "l1_ball"                      # l2_ball | l1_ball | simplex | box
    radius = 1.0                          # box uses lower/upper

    [algo]
    name = "ipds"                         # ipds | defw | pg
    N = 50                                # ipds outer iterations
    iters = 500                           # defw / pg iterations
    seed = 0
    threads = 1
    inner_memory = "literal"              # literal | shifted
    query_chain = "separate"              # separate | shared
    [algo.lo_policy]
    mode = "fixed"                        # fixed (tol) | scheduled (epsilon)
    tol = 1e-8

    [output]
    csv_dir = "runs"
    svg = false
"""

from __future__ import annotations

import math
import os
import sys
from dataclasses import asdict, dataclass, field

from .errors import ConfigurationError
from .feasible import SET_KINDS
from .graph import TOPOLOGIES
from .ipds import LoPolicy
from .model import PROBLEM_KINDS

if sys.version_info >= (3, 11):
    import tomllib
else:
    import tomli as tomllib

ALGORITHMS = ("ipds", "defw", "pg")

_SYNTHETIC_KEYS = {
    "logistic": {"n_samples": int, "d": int, "seed": int, "noise": float, "density": float},
    "quadratic": {"d": int, "rows_per_node": int, "L": float, "cond": float, "seed": int, "spread": float},
}


@dataclass(frozen=True)
class ProblemConfig:
    kind: str
    data_path: str | None = None
    synthetic: dict = field(default_factory=dict)
    mu: float = 0.0
    sigma: float = 0.0
    partition_seed: int = 0


@dataclass(frozen=True)
class GraphConfig:
    kind: str = "complete"
    m: int = 5
    p: float = 0.3
    seed: int = 0


@dataclass(frozen=True)
class ConstraintConfig:
    kind: str = "l2_ball"
    radius: float = 1.0
    lower: float | tuple | None = None
    upper: float | tuple | None = None


@dataclass(frozen=True)
class AlgoConfig:
    name: str = "ipds"
    N: int = 50
    iters: int = 500
    R: float | None = None
    c_const: float | None = None
    L: float | None = None
    step: float | str = "auto"
    lo_policy: LoPolicy = field(default_factory=LoPolicy)
    inner_memory: str = "literal"
    query_chain: str = "separate"
    seed: int = 0
    threads: int = 1


@dataclass(frozen=True)
class OutputConfig:
    csv_dir: str = "runs"
    svg: bool = False
    wall_clock: bool = False


@dataclass(frozen=True)
class RunConfig:
    run_id: str
    problem: ProblemConfig
    graph: GraphConfig
    constraint: ConstraintConfig
    algo: AlgoConfig
    output: OutputConfig
    reference_tol: float = 1e-9

    def to_dict(self) -> dict:
        """Plain-data echo of the configuration (for run sidecars)."""
        out = asdict(self)
        out["algo"]["lo_policy"] = asdict(self.algo.lo_policy)
        return out


# -- field validators ------------------------------------------------------------


def _fail(name, message):
    raise ConfigurationError(f"{name}: {message}")


def _table(raw, name):
    value = raw.get(name, {})
    if not isinstance(value, dict):
        _fail(name, "must be a table")
    return value


def _reject_unknown(table, allowed, prefix):
    extra = sorted(set(table) - set(allowed))
    if extra:
        _fail(f"{prefix}.{extra[0]}", f"unknown key (allowed: {', '.join(sorted(allowed))})")


def _number(table, key, prefix, default, *, minimum=None, strict=False, allow_none=False):
    name = f"{prefix}.{key}"
    value = table.get(key, default)
    if value is None and allow_none:
        return None
    if isinstance(value, bool) or not isinstance(value, (int, float)):
        _fail(name, f"must be a number, got {value!r}")
    value = float(value)
    if not math.isfinite(value):
        _fail(name, f"must be finite, got {value!r}")
    if minimum is not None:
        if strict and not value > minimum:
            _fail(name, f"must be > {minimum:g}, got {value:g}")
        if not strict and not value >= minimum:
            _fail(name, f"must be >= {minimum:g}, got {value:g}")
    return value


def _integer(table, key, prefix, default, *, minimum=None):
    name = f"{prefix}.{key}"
    value = table.get(key, default)
    if isinstance(value, bool) or not isinstance(value, int):
        _fail(name, f"must be an integer, got {value!r}")
    if minimum is not None and value < minimum:
        _fail(name, f"must be >= {minimum}, got {value}")
    return value


def _choice(table, key, prefix, default, options):
    value = table.get(key, default)
    if value not in options:
        _fail(f"{prefix}.{key}", f"must be one of {', '.join(options)}, got {value!r}")
    return value


def _parse_problem(raw, base_dir):
    t = _table(raw, "problem")
    if not t:
        _fail("problem", "table is required")
    _reject_unknown(t, ("kind", "data_path", "synthetic", "mu", "sigma", "partition_seed"), "problem")
    kind = _choice(t, "kind", "problem", None, PROBLEM_KINDS)
    data_path = t.get("data_path")
    if data_path is not None:
        if kind != "logistic":
            _fail("problem.data_path", "only logistic problems read data files")
        if not isinstance(data_path, str):
            _fail("problem.data_path", "must be a string")
        data_path = os.path.normpath(os.path.join(base_dir, data_path))
        if not os.path.isfile(data_path):
            _fail("problem.data_path", f"file not found: {data_path}")
    synthetic = t.get("synthetic", {})
    if not isinstance(synthetic, dict):
        _fail("problem.synthetic", "must be a table")
    if data_path is None and not synthetic:
        _fail("problem", "needs data_path or a synthetic table")
    allowed = _SYNTHETIC_KEYS[kind]
    _reject_unknown(synthetic, allowed, "problem.synthetic")
    syn = {}
    for key, typ in allowed.items():
        if key not in synthetic:
            continue
        if typ is int:
            syn[key] = _integer(synthetic, key, "problem.synthetic", None, minimum=0 if key == "seed" else 1)
        else:
            syn[key] = _number(synthetic, key, "problem.synthetic", None, minimum=0.0, strict=key != "noise")
    if kind == "quadratic" and "cond" in syn and syn["cond"] < 1:
        _fail("problem.synthetic.cond", f"must be >= 1, got {syn['cond']:g}")
    if "density" in syn and syn["density"] > 1:
        _fail("problem.synthetic.density", f"must be <= 1, got {syn['density']:g}")
    return ProblemConfig(
        kind=kind,
        data_path=data_path,
        synthetic=syn,
        mu=_number(t, "mu", "problem", 0.0, minimum=0.0),
        sigma=_number(t, "sigma", "problem", 0.0, minimum=0.0),
        partition_seed=_integer(t, "partition_seed", "problem", 0, minimum=0),
    )


def _parse_graph(raw):
    t = _table(raw, "graph")
    _reject_unknown(t, ("kind", "m", "p", "seed"), "graph")
    p = _number(t, "p", "graph", 0.3, minimum=0.0, strict=True)
    if p > 1:
        _fail("graph.p", f"must be <= 1, got {p:g}")
    return GraphConfig(
        kind=_choice(t, "kind", "graph", "complete", TOPOLOGIES),
        m=_integer(t, "m", "graph", 5, minimum=2),
        p=p,
        seed=_integer(t, "seed", "graph", 0, minimum=0),
    )


def _bound(value, name):
    if isinstance(value, list):
        if not all(isinstance(v, (int, float)) and not isinstance(v, bool) for v in value):
            _fail(name, "must be a number or a list of numbers")
        return tuple(float(v) for v in value)
    if isinstance(value, bool) or not isinstance(value, (int, float)):
        _fail(name, "must be a number or a list of numbers")
    return float(value)


def _parse_constraint(raw):
    t = _table(raw, "constraint")
    _reject_unknown(t, ("kind", "radius", "lower", "upper"), "constraint")
    kind = _choice(t, "kind", "constraint", "l2_ball", SET_KINDS)
    radius = _number(t, "radius", "constraint", 1.0, minimum=0.0, strict=True)
    lower = upper = None
    if kind == "box":
        if "lower" not in t or "upper" not in t:
            _fail("constraint", "box needs lower and upper")
        lower = _bound(t["lower"], "constraint.lower")
        upper = _bound(t["upper"], "constraint.upper")
    return ConstraintConfig(kind=kind, radius=radius, lower=lower, upper=upper)


def _parse_lo_policy(t):
    _reject_unknown(t, ("mode", "tol", "epsilon", "C", "max_iter"), "algo.lo_policy")
    mode = _choice(t, "mode", "algo.lo_policy", "fixed", ("fixed", "scheduled"))
    tol = _number(t, "tol", "algo.lo_policy", 1e-8, minimum=0.0)
    epsilon = _number(t, "epsilon", "algo.lo_policy", None, minimum=0.0, strict=True, allow_none=True)
    if mode == "scheduled" and epsilon is None:
        _fail("algo.lo_policy.epsilon", "required when mode = 'scheduled'")
    C = _number(t, "C", "algo.lo_policy", None, minimum=0.0, strict=True, allow_none=True)
    max_iter = t.get("max_iter")
    if max_iter is not None:
        max_iter = _integer(t, "max_iter", "algo.lo_policy", None, minimum=1)
    if mode == "fixed" and tol == 0 and max_iter is None:
        _fail("algo.lo_policy.tol", "tol = 0 needs max_iter")
    return LoPolicy(mode=mode, tol=tol, epsilon=epsilon, C=C, max_iter=max_iter)


def _parse_algo(raw):
    t = _table(raw, "algo")
    allowed = ("name", "N", "iters", "R", "c_const", "L", "step", "lo_policy", "inner_memory", "query_chain",
               "seed", "threads")
    _reject_unknown(t, allowed, "algo")
    lo = t.get("lo_policy", {})
    if not isinstance(lo, dict):
        _fail("algo.lo_policy", "must be a table")
    step = t.get("step", "auto")
    if step != "auto":
        step = _number(t, "step", "algo", None, minimum=0.0)
    return AlgoConfig(
        name=_choice(t, "name", "algo", "ipds", ALGORITHMS),
        N=_integer(t, "N", "algo", 50, minimum=1),
        iters=_integer(t, "iters", "algo", 500, minimum=1),
        R=_number(t, "R", "algo", None, minimum=0.0, strict=True, allow_none=True),
        c_const=_number(t, "c_const", "algo", None, minimum=0.0, allow_none=True),
        L=_number(t, "L", "algo", None, minimum=0.0, strict=True, allow_none=True),
        step=step,
        lo_policy=_parse_lo_policy(lo),
        inner_memory=_choice(t, "inner_memory", "algo", "literal", ("literal", "shifted")),
        query_chain=_choice(t, "query_chain", "algo", "separate", ("separate", "shared")),
        seed=_integer(t, "seed", "algo", 0, minimum=0),
        threads=_integer(t, "threads", "algo", 1, minimum=1),
    )


def _parse_output(raw, base_dir):
    t = _table(raw, "output")
    _reject_unknown(t, ("csv_dir", "svg", "wall_clock"), "output")
    csv_dir = t.get("csv_dir", "runs")
    if not isinstance(csv_dir, str) or not csv_dir:
        _fail("output.csv_dir", "must be a non-empty string")
    for key in ("svg", "wall_clock"):
        if not isinstance(t.get(key, False), bool):
            _fail(f"output.{key}", "must be true or false")
    return OutputConfig(
        csv_dir=os.path.normpath(os.path.join(base_dir, csv_dir)),
        svg=t.get("svg", False),
        wall_clock=t.get("wall_clock", False),
    )


def parse_config(raw: dict, base_dir: str = ".") -> RunConfig:
    """Validate a decoded TOML document. Relative paths resolve against ``base_dir``."""
    if not isinstance(raw, dict):
        raise ConfigurationError("config must be a table")
    _reject_unknown(raw, ("run_id", "problem", "graph", "constraint", "algo", "output", "reference"), "config")
    run_id = raw.get("run_id", "run")
    if not isinstance(run_id, str) or not run_id or any(c in run_id for c in "/\\"):
        _fail("run_id", f"must be a non-empty string without path separators, got {run_id!r}")
    ref = _table(raw, "reference")
    _reject_unknown(ref, ("tol",), "reference")
    cfg = RunConfig(
        run_id=run_id,
        problem=_parse_problem(raw, base_dir),
        graph=_parse_graph(raw),
        constraint=_parse_constraint(raw),
        algo=_parse_algo(raw),
        output=_parse_output(raw, base_dir),
        reference_tol=_number(ref, "tol", "reference", 1e-9, minimum=0.0, strict=True),
    )
    if cfg.algo.name == "defw" and cfg.problem.sigma > 0:
        _fail("algo.name", "defw needs exact gradients (problem.sigma = 0)")
    return cfg


def load_config(path) -> RunConfig:
    try:
        with open(path, "rb") as fh:
            raw = tomllib.load(fh)
    except FileNotFoundError:
        raise ConfigurationError(f"config file not found: {os.fspath(path)}") from None
    except tomllib.TOMLDecodeError as exc:
        raise ConfigurationError(f"{os.fspath(path)}: invalid TOML: {exc}") from None
    return parse_config(raw, os.path.dirname(os.path.abspath(path)))
