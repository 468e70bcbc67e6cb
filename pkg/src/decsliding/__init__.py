"""Decentralized projection-free optimization with communication and gradient sliding."""

from .baselines import GossipMatrix, metropolis_weights, run_defw, run_projected_gradient
from .cgs import CgsResult, cgs_solve, cgs_solve_rows, reduce_subproblem, wolfe_gap
from .data import make_logistic_dataset, make_logistic_problem, make_quadratic_problem, parse_libsvm, write_libsvm
from .errors import (
    ConfigurationError,
    ConvergenceError,
    DataError,
    DecSlidingError,
    DimensionError,
    GenerationError,
    InputError,
    NonFiniteIterateError,
    ParameterError,
    ParseError,
    StepSizeError,
)
from .feasible import ConstraintSet
from .graph import Graph, apply_constraint, build_topology, laplacian_spectrum, operator_norm, spectral_gap
from .ipds import IpdsConfig, LoPolicy, Schedule, lo_tolerance, make_schedule, run_ipds, schedule_for
from .metrics import RunRecord, RunRow, consensus_gap, primal_gap, read_csv, write_csv
from .model import (
    Dataset,
    OracleCounters,
    ProblemSpec,
    full_gradient,
    objective_value,
    partition_dataset,
    reference_optimum,
    smoothness_estimate,
    stochastic_gradient,
)

__version__ = "0.1.0"
