"""Command-line entry point: ``run``, ``topo-table`` and ``plot``."""

from __future__ import annotations

import argparse
import csv
import dataclasses
import json
import logging
import os
import sys

import numpy as np

from .baselines import run_defw, run_projected_gradient
from .config import RunConfig, load_config
from .data import make_logistic_dataset, make_logistic_problem, make_quadratic_problem, parse_libsvm
from .errors import DecSlidingError
from .feasible import ConstraintSet
from .graph import build_topology, operator_norm, spectral_gap
from .ipds import IpdsConfig, run_ipds, schedule_for
from .metrics import worst_node_loss, write_csv
from .model import reference_optimum, smoothness_estimate
from .plot import emit_svg_plot

log = logging.getLogger("decsliding")

TOPO_ALGOS = ("ipds", "defw")
TOPO_COLUMNS = ("topology", "spectral_gap", "norm_A") + tuple(
    f"{algo}_{col}" for algo in TOPO_ALGOS for col in ("samples_to_target", "samples_total", "final_loss")
)
BUDGET_EXCEEDED = "budget_exceeded"


@dataclasses.dataclass
class Components:
    problem: object
    graph: object
    cset: ConstraintSet
    x_star: np.ndarray
    f_star: float


def build_problem(cfg: RunConfig, m: int):
    pc = cfg.problem
    syn = dict(pc.synthetic)
    if pc.kind == "quadratic":
        return make_quadratic_problem(
            m=m,
            d=syn.get("d", 10),
            rows_per_node=syn.get("rows_per_node", 20),
            L=syn.get("L", 1.0),
            cond=syn.get("cond", 10.0),
            mu=pc.mu,
            seed=syn.get("seed", 0),
            spread=syn.get("spread", 1.0),
            sigma=pc.sigma,
        )
    if pc.data_path is not None:
        data = parse_libsvm(pc.data_path)
    else:
        data = make_logistic_dataset(
            syn.get("n_samples", 2000), syn.get("d", 22), syn.get("seed", 0),
            noise=syn.get("noise", 0.5), density=syn.get("density", 1.0),
        )
    return make_logistic_problem(data, m, mu=pc.mu, sigma=pc.sigma, seed=pc.partition_seed)


def build_constraint(cfg: RunConfig, d: int) -> ConstraintSet:
    cc = cfg.constraint
    return ConstraintSet(cc.kind, d, radius=cc.radius, lower=cc.lower, upper=cc.upper)


def build_components(cfg: RunConfig, graph_kind: str | None = None) -> Components:
    gc = cfg.graph
    graph = build_topology(graph_kind or gc.kind, gc.m, {"p": gc.p}, gc.seed)
    problem = build_problem(cfg, gc.m)
    problem.threads = cfg.algo.threads
    cset = build_constraint(cfg, problem.d)
    x_star, f_star = reference_optimum(problem, cset, tol=cfg.reference_tol)
    return Components(problem, graph, cset, x_star, f_star)


def ipds_config(cfg: RunConfig) -> IpdsConfig:
    a = cfg.algo
    return IpdsConfig(
        N=a.N, R=a.R, c_const=a.c_const, lo_policy=a.lo_policy, inner_memory=a.inner_memory,
        query_chain=a.query_chain, seed=a.seed, threads=a.threads, L=a.L, wall_clock=cfg.output.wall_clock,
    )


def execute(cfg: RunConfig, comp: Components | None = None, callback=None):
    """Run the configured algorithm; returns ``(x, record, meta)``."""
    comp = comp or build_components(cfg)
    reference = (comp.x_star, comp.f_star)
    meta = {
        "run_id": cfg.run_id,
        "config": cfg.to_dict(),
        "f_star": comp.f_star,
        "norm_A": operator_norm(comp.graph),
        "spectral_gap": spectral_gap(comp.graph),
        "L_tilde": cfg.algo.L if cfg.algo.L is not None else smoothness_estimate(comp.problem),
    }
    name = cfg.algo.name
    if name == "ipds":
        icfg = ipds_config(cfg)
        sched = schedule_for(comp.problem, comp.graph, comp.cset, icfg)
        meta["schedule"] = {"Delta": _json_float(sched.Delta), "T_total": sum(sched.Ts), "R": sched.R,
                            "c_const": sched.c_const}
        x, record = run_ipds(comp.problem, comp.graph, comp.cset, icfg, reference, schedule=sched, callback=callback)
        meta["cgs_cap_hits"] = record.notes.get("cgs_cap_hits", 0)
    elif name == "defw":
        x, record = run_defw(comp.problem, comp.graph, comp.cset, cfg.algo.iters, reference, callback=callback)
    else:
        x, record = run_projected_gradient(comp.problem, comp.cset, cfg.algo.iters, cfg.algo.step, reference)
    return x, record, meta


def _json_float(v):
    return v if np.isfinite(v) else "inf"


def cmd_run(cfg: RunConfig, out_dir: str | None = None) -> int:
    """Write ``<out>/<run_id>.csv``, ``<run_id>.meta.json`` and optionally an SVG."""
    out_dir = out_dir or cfg.output.csv_dir
    os.makedirs(out_dir, exist_ok=True)
    _, record, meta = execute(cfg)
    csv_path = os.path.join(out_dir, f"{cfg.run_id}.csv")
    write_csv(record, csv_path)
    with open(os.path.join(out_dir, f"{cfg.run_id}.meta.json"), "w", encoding="utf-8", newline="\n") as fh:
        json.dump(meta, fh, indent=2, sort_keys=True)
        fh.write("\n")
    if cfg.output.svg:
        emit_svg_plot([csv_path], "f_gap", os.path.join(out_dir, f"{cfg.run_id}.svg"))
    if meta.get("cgs_cap_hits"):
        log.warning("%d CGS solves stopped at their iteration cap", meta["cgs_cap_hits"])
    log.info("wrote %s (%d rows)", csv_path, len(record))
    return 0


def topo_rows(cfg: RunConfig, topologies, target: float):
    """Gradient samples needed by I-PDS and DeFW to reach ``target``; one row per topology.

    The loss is :func:`worst_node_loss` of the algorithm's output. A run
    that never reaches the target is marked ``budget_exceeded``.
    """
    rows = []
    for kind in topologies:
        comp = build_components(cfg, graph_kind=kind)
        row = {"topology": kind, "spectral_gap": spectral_gap(comp.graph), "norm_A": operator_norm(comp.graph)}
        for algo in TOPO_ALGOS:
            hit = {}

            def watch(k, x, counters, hit=hit, comp=comp):
                if "samples" not in hit and worst_node_loss(comp.problem, x) <= target:
                    hit["samples"] = counters.samples

            run_cfg = dataclasses.replace(cfg, algo=dataclasses.replace(cfg.algo, name=algo))
            x, record, _ = execute(run_cfg, comp, callback=watch)
            row[f"{algo}_samples_to_target"] = hit.get("samples", BUDGET_EXCEEDED)
            row[f"{algo}_samples_total"] = record.last.samples
            row[f"{algo}_final_loss"] = worst_node_loss(comp.problem, x)
        rows.append(row)
    return rows


def format_topo_table(rows) -> str:
    lines = [",".join(TOPO_COLUMNS)]
    for r in rows:
        cells = []
        for col in TOPO_COLUMNS:
            v = r[col]
            cells.append(format(v, ".12g") if isinstance(v, float) else str(v))
        lines.append(",".join(cells))
    return "\n".join(lines) + "\n"


def cmd_topo_table(cfg: RunConfig, topologies, target: float, out_path: str | None = None) -> int:
    rows = topo_rows(cfg, topologies, target)
    text = format_topo_table(rows)
    if out_path is None:
        sys.stdout.write(text)
    else:
        os.makedirs(os.path.dirname(os.path.abspath(out_path)), exist_ok=True)
        with open(out_path, "w", encoding="utf-8", newline="\n") as fh:
            fh.write(text)
    ipds_totals = {r["ipds_samples_total"] for r in rows}
    if len(ipds_totals) > 1:
        log.warning("I-PDS sample totals differ across topologies: %s", sorted(ipds_totals))
    return 0


def read_topo_table(path) -> list[dict]:
    with open(path, newline="", encoding="utf-8") as fh:
        return list(csv.DictReader(fh))


def _parser() -> argparse.ArgumentParser:
    ap = argparse.ArgumentParser(prog="decsliding", description="Decentralized projection-free optimization runs.")
    ap.add_argument("-v", "--verbose", action="store_true", help="log progress to stderr")
    sub = ap.add_subparsers(dest="command", required=True)

    run = sub.add_parser("run", help="run one configured experiment")
    run.add_argument("--config", required=True)
    run.add_argument("--out", help="output directory (overrides output.csv_dir)")

    topo = sub.add_parser("topo-table", help="samples-to-target across topologies")
    topo.add_argument("--config", required=True)
    topo.add_argument("--topologies", required=True, help="comma-separated list, e.g. path,complete,barbell")
    topo.add_argument("--target", required=True, type=float, help="target worst-node loss per sample")
    topo.add_argument("--out", help="summary CSV path (default: stdout)")

    plot = sub.add_parser("plot", help="SVG chart of a column from run CSVs")
    plot.add_argument("--column", required=True)
    plot.add_argument("--x-column", default="k")
    plot.add_argument("--out", required=True)
    plot.add_argument("csv", nargs="+")
    return ap


def main(argv=None) -> int:
    args = _parser().parse_args(argv)
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING, format="%(levelname)s: %(message)s")
    try:
        if args.command == "run":
            return cmd_run(load_config(args.config), args.out)
        if args.command == "topo-table":
            kinds = [k.strip() for k in args.topologies.split(",") if k.strip()]
            return cmd_topo_table(load_config(args.config), kinds, args.target, args.out)
        emit_svg_plot(args.csv, args.column, args.out, x_column=args.x_column)
        return 0
    except (DecSlidingError, OSError, ValueError, KeyError) as exc:
        print(f"decsliding: error: {exc}", file=sys.stderr)
        return 2

