"""Command-line experiment driver.

    ebcache <command> [--config PATH] [--out DIR] [--seed N] [--format json|csv]
                      [--parallel N]

Commands: ``analyze``, ``optimize``, ``simulate``, ``sweep``, ``fixture-fig1``.
Every run writes ``<command>.<format>`` and ``config.resolved.json`` into the
output directory. ``EBCACHE_LOG`` sets the log level (default ``WARNING``).
"""

from __future__ import annotations

import argparse
import json
import logging
import math
import os
import sys
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass
from fractions import Fraction

import numpy as np

from . import __version__
from .config import (DEFAULTS, ConfigError, as_rate_vector, config_hash, derive_seed,
                     get_path, load_config, resolve_config, set_path)
from .content import (CachePlan, Catalog, DeliveryPlan, RequestProfile,
                      select_catalog_subset, validate_plans)
from .fixtures import FIG1_RATES, fig1_expected_eb, fig1_graph, fig1_plans
from .metrics import compute_metrics, efficient_betweenness_exact
from .optimizer import (BudgetExceeded, CcpConfig, InfeasibleInstance, SolveResult,
                        assemble_p1, baseline_brr_cvr, baseline_no_match, baseline_ucs,
                        eccds_solve, exhaustive_oracle)
from .phy import PhyConfig, node_sdp
from .report import emit_report, make_report
from .simulator import SearchConfig, SimConfig, find_capacity, run_slotted_sim
from .topology import (AdjacencyGraph, NodeLayout, PathStats, build_adjacency,
                       classical_betweenness, generate_layout, path_stats, read_edge_list)

__all__ = ["main", "build_world", "solve_strategy", "World"]

log = logging.getLogger("ebcache")

COMMANDS = ("analyze", "optimize", "simulate", "sweep", "fixture-fig1")
SWEEP_COLUMNS = ["parameter", "value", "strategy", "w", "min_ratio", "capacity_bound",
                 "avg_path_length", "measured_capacity", "capacity_ratio"]

EXIT_OK, EXIT_FAIL, EXIT_USAGE, EXIT_REFUSED = 0, 1, 2, 3


class CommandError(RuntimeError):
    """A command could not complete; ``code`` is the process exit status."""

    def __init__(self, message: str, code: int = EXIT_FAIL):
        super().__init__(message)
        self.code = code


@dataclass
class World:
    layout: NodeLayout | None
    graph: AdjacencyGraph
    stats: PathStats
    catalog: Catalog
    profile: RequestProfile
    sdp: np.ndarray
    rate: float


def _graph_from_config(topo: dict, seed: int):
    kind = topo["kind"]
    if kind == "random":
        layout = generate_layout(topo["nodes"], topo["side"], derive_seed(seed, "topology"))
        return layout, build_adjacency(layout)
    if kind == "positions":
        layout = NodeLayout(np.asarray(topo["positions"], dtype=float), topo["side"])
        return layout, build_adjacency(layout)
    if kind == "fig1":
        return None, fig1_graph()
    if topo["edge_file"]:
        with open(topo["edge_file"]) as fh:
            graph = read_edge_list(fh)
    else:
        n = 1 + max(max(e) for e in topo["edges"])
        graph = AdjacencyGraph.from_edges(n, [tuple(e) for e in topo["edges"]])
    return None, graph


def build_world(cfg: dict) -> World:
    """Topology, catalogue, demand and SDP for a resolved config."""
    seed = cfg["seed"]
    layout, graph = _graph_from_config(cfg["topology"], seed)
    stats = path_stats(graph)
    n = graph.n
    cat_cfg = cfg["catalog"]
    catalog = select_catalog_subset(cat_cfg["contents"], n, cat_cfg["cache_size"],
                                    cat_cfg["zipf_beta"])
    if catalog.size < cat_cfg["contents"]:
        log.info("catalog reduced to the %d most popular contents", catalog.size)
    rate_cfg = cfg["requests"]["rate"]
    if cfg["topology"]["kind"] == "fig1" and rate_cfg == DEFAULTS["requests"]["rate"]:
        rates = np.array([float(r) for r in FIG1_RATES])
    else:
        rates = as_rate_vector(rate_cfg, n)
    profile = RequestProfile(rates)
    phy = cfg["phy"]
    if phy["sdp"] is not None:
        sdp = np.asarray(phy["sdp"], dtype=float)
        if sdp.shape != (n,) or np.any(sdp <= 0) or np.any(sdp > 1):
            raise ConfigError("$.phy.sdp", f"need {n} probabilities in (0, 1]")
    elif layout is None:
        if cfg["topology"]["kind"] != "fig1":
            raise ConfigError("$.phy.sdp", "required when the topology has no node positions")
        sdp = np.ones(n)
    else:
        pcfg = PhyConfig(tx_power_dbm=phy["tx_power_dbm"],
                         pathloss_exponent=phy["pathloss_exponent"],
                         noise_dbm=phy["noise_dbm"],
                         sinr_threshold_db=phy["sinr_threshold_db"],
                         subcarriers=phy["subcarriers"], rate=phy["rate"],
                         trials=phy["trials"], seed=derive_seed(seed, "phy"))
        sdp = node_sdp(layout, graph, pcfg).node
    return World(layout, graph, stats, catalog, profile, sdp, float(phy["rate"]))


def _ccp_config(solver: dict) -> CcpConfig:
    return CcpConfig(tau0=solver["tau0"], theta=solver["theta"], tau_max=solver["tau_max"],
                     samples=solver["samples"], tolerance=solver["tolerance"],
                     max_iterations=solver["max_iterations"], spread=solver["spread"],
                     backend=solver["backend"])


def solve_strategy(world: World, cfg: dict, strategy: str) -> SolveResult:
    """Cache and delivery plans for ``strategy`` on ``world``."""
    instance = assemble_p1(world.stats, world.catalog, world.profile, world.sdp)
    seed = cfg["seed"]
    if strategy == "eccds":
        rng = np.random.default_rng(derive_seed(seed, "solver"))
        return eccds_solve(instance, _ccp_config(cfg["solver"]), rng)
    if strategy == "ucs":
        return baseline_ucs(instance, np.random.default_rng(derive_seed(seed, "ucs")))
    if strategy == "no_match":
        return baseline_no_match(instance, np.random.default_rng(derive_seed(seed, "ucs")))
    if strategy == "brr_cvr":
        return baseline_brr_cvr(instance, classical_betweenness(world.stats))
    if strategy == "oracle":
        return exhaustive_oracle(instance, cfg["solver"]["oracle_budget"])
    raise ConfigError("$.strategy", f"unknown strategy {strategy!r}")


def _plans(world: World, cfg: dict) -> tuple[CachePlan, DeliveryPlan, str]:
    plans = cfg["plans"]
    if plans is None:
        res = solve_strategy(world, cfg, cfg["strategy"])
        return res.cache, res.delivery, res.strategy
    try:
        cache = CachePlan.from_json(plans["x"])
        delivery = DeliveryPlan.from_json(plans["y"], world.graph.n, world.catalog.size)
    except (TypeError, ValueError, IndexError) as exc:
        raise ConfigError("$.plans", str(exc)) from exc
    problems = validate_plans(cache, delivery, world.catalog)
    if problems:
        raise ConfigError("$.plans", "; ".join(str(p) for p in problems[:5]))
    return cache, delivery, "given"


# ---------------------------------------------------------------- commands

def cmd_analyze(cfg: dict) -> dict:
    world = build_world(cfg)
    cache, delivery, source = _plans(world, cfg)
    m = compute_metrics(world.stats, delivery, world.profile, world.catalog, world.sdp,
                        world.rate)
    data = {"plans": source, **m.to_json(), "min_sdp_eb_ratio": m.min_sdp_eb_ratio,
            "x": cache.to_json(), "y": delivery.to_json()}
    return _report("analyze", cfg, data, m.rows())


def cmd_optimize(cfg: dict) -> dict:
    world = build_world(cfg)
    res = solve_strategy(world, cfg, cfg["strategy"])
    m = compute_metrics(world.stats, res.delivery, world.profile, world.catalog, world.sdp,
                        world.rate)
    rows = [{**row, "sdp_eb_ratio": row["sdp"] / row["eb"] if row["eb"] > 0 else math.inf}
            for row in m.rows()]
    data = {**res.to_json(), "capacity_bound": m.capacity_bound,
            "avg_path_length": m.avg_path_length}
    return _report("optimize", cfg, data, rows)


def cmd_simulate(cfg: dict) -> dict:
    world = build_world(cfg)
    _, delivery, source = _plans(world, cfg)
    sim = cfg["sim"]
    sim_seed = derive_seed(cfg["seed"], "sim")
    rate = cfg["requests"]["rate"]
    sim_cfg = SimConfig(rate=tuple(world.profile.rates) if isinstance(rate, list)
                        else float(world.profile.rates[0]),
                        buffer=sim["buffer"], warmup=sim["warmup"], slots=sim["slots"],
                        seed=sim_seed, trace=sim["trace"])
    rep = run_slotted_sim(world.graph, world.stats, delivery, world.catalog, world.sdp,
                          world.rate, sim_cfg)
    m = compute_metrics(world.stats, delivery, world.profile, world.catalog, world.sdp,
                        world.rate)
    data = {"plans": source, **rep.to_json(), "capacity_bound": m.capacity_bound}
    if sim["capacity"]:
        cap = find_capacity(world.graph, world.stats, delivery, world.catalog, world.sdp,
                            world.rate, sim_cfg, _search_config(cfg))
        data["capacity"] = cap.to_json()
    report = _report("simulate", cfg, data, rep.rows())
    if sim["trace"]:
        report["_trace_csv"] = rep.trace_csv()
    return report


def _search_config(cfg: dict) -> SearchConfig:
    s = cfg["search"]
    return SearchConfig(tolerance=s["tolerance"], max_probes=s["max_probes"],
                        max_drop=s["max_drop"], min_delivery=s["min_delivery"])


def _sweep_point(args) -> list[dict]:
    cfg, parameter, value = args
    point = resolve_config(set_path(cfg, parameter, value))
    world = build_world(point)
    rows = []
    for strategy in point["sweep"]["strategies"]:
        res = solve_strategy(world, point, strategy)
        m = compute_metrics(world.stats, res.delivery, world.profile, world.catalog,
                            world.sdp, world.rate)
        row = {"parameter": parameter, "value": value, "strategy": strategy, "w": res.w,
               "min_ratio": m.min_sdp_eb_ratio, "capacity_bound": m.capacity_bound,
               "avg_path_length": m.avg_path_length, "measured_capacity": None,
               "capacity_ratio": None}
        if point["sweep"]["simulate"]:
            sim = point["sim"]
            sim_cfg = SimConfig(buffer=sim["buffer"], warmup=sim["warmup"], slots=sim["slots"],
                                seed=derive_seed(point["seed"], "sim"))
            cap = find_capacity(world.graph, world.stats, res.delivery, world.catalog,
                                world.sdp, world.rate, sim_cfg, _search_config(point))
            row["measured_capacity"] = cap.capacity
            if math.isfinite(m.min_sdp_eb_ratio):
                row["capacity_ratio"] = cap.capacity / m.min_sdp_eb_ratio
        rows.append(row)
    return rows


def cmd_sweep(cfg: dict, parallel: int = 1) -> dict:
    sweep = cfg["sweep"]
    parameter = sweep["parameter"]
    try:
        get_path(cfg, parameter)
    except (KeyError, TypeError):
        raise ConfigError("$.sweep.parameter", f"{parameter!r} is not a config key") from None
    jobs = [(cfg, parameter, v) for v in sweep["values"]]
    if parallel > 1 and len(jobs) > 1:
        with ProcessPoolExecutor(max_workers=parallel) as pool:
            chunks = list(pool.map(_sweep_point, jobs))
    else:
        chunks = [_sweep_point(job) for job in jobs]
    rows = [row for chunk in chunks for row in chunk]
    data = {"parameter": parameter, "values": sweep["values"],
            "strategies": sweep["strategies"], "points": len(rows)}
    return _report("sweep", cfg, data, rows, figure=sweep["figure"])


def cmd_fixture_fig1(cfg: dict) -> dict:
    graph = fig1_graph()
    stats = path_stats(graph)
    _, delivery = fig1_plans()
    coeffs = [efficient_betweenness_exact(stats, delivery, FIG1_RATES, unit)
              for unit in ((1, 0), (0, 1))]
    got = list(zip(coeffs[0], coeffs[1]))
    expected = fig1_expected_eb()
    beta = cfg["catalog"]["zipf_beta"]
    q = select_catalog_subset(2, 5, 1, beta).popularity
    rows = []
    for i, ((c1, c2), (e1, e2)) in enumerate(zip(got, expected)):
        rows.append({"node": i + 1, "q1_coeff": str(c1), "q2_coeff": str(c2),
                     "eb": float(c1) * q[0] + float(c2) * q[1],
                     "match": c1 == e1 and c2 == e2})
        print(f"node {i + 1}: b^E = {_affine(c1, c2)}")
    ok = all(r["match"] for r in rows)
    print("fixture-fig1:", "all values match" if ok else "MISMATCH")
    report = _report("fixture-fig1", cfg, {"match": ok, "zipf_beta": beta,
                                           "popularity": q.tolist()}, rows)
    report["_failed"] = not ok
    return report


def _affine(c1: Fraction, c2: Fraction) -> str:
    terms = [f"{c}*q{k}" for k, c in ((1, c1), (2, c2)) if c]
    return " + ".join(terms) if terms else "0"


def _report(kind, cfg, data, rows, figure=None) -> dict:
    return make_report(kind, data, rows, seed=cfg["seed"], config_hash=config_hash(cfg),
                       figure=figure)


# ---------------------------------------------------------------- entry point

def _parser() -> argparse.ArgumentParser:
    p = argparse.ArgumentParser(prog="ebcache",
                                description="Efficient-betweenness caching experiments.")
    p.add_argument("--version", action="version", version=f"%(prog)s {__version__}")
    p.add_argument("command", choices=COMMANDS)
    p.add_argument("--config", help="JSON experiment config (defaults apply when omitted)")
    p.add_argument("--out", help="output directory (overrides output.dir)")
    p.add_argument("--seed", type=int, help="master seed (overrides seed)")
    p.add_argument("--format", choices=("json", "csv"), help="report format")
    p.add_argument("--parallel", type=int, default=1,
                   help="worker processes for sweep grid points")
    return p


def _setup_logging() -> None:
    level = os.environ.get("EBCACHE_LOG", "WARNING").upper()
    logging.basicConfig(level=getattr(logging, level, logging.WARNING),
                        format="%(levelname)s %(name)s: %(message)s", stream=sys.stderr)


def _resolve(args) -> dict:
    cfg = load_config(args.config) if args.config else resolve_config({})
    overrides = {}
    if args.seed is not None:
        if args.seed < 0 or args.seed >= 2 ** 64:
            raise ConfigError("$.seed", "seed must be an unsigned 64-bit integer")
        overrides["seed"] = args.seed
    if args.out:
        overrides.setdefault("output", {})["dir"] = args.out
    if args.format:
        overrides.setdefault("output", {})["format"] = args.format
    if overrides:
        merged = json.loads(json.dumps(cfg))
        for key, value in overrides.items():
            if isinstance(value, dict):
                merged[key].update(value)
            else:
                merged[key] = value
        cfg = resolve_config(merged)
    return cfg


def run_command(command: str, cfg: dict, parallel: int = 1) -> dict:
    if command == "analyze":
        return cmd_analyze(cfg)
    if command == "optimize":
        return cmd_optimize(cfg)
    if command == "simulate":
        return cmd_simulate(cfg)
    if command == "sweep":
        return cmd_sweep(cfg, parallel)
    if command == "fixture-fig1":
        return cmd_fixture_fig1(cfg)
    raise CommandError(f"unknown command {command!r}", EXIT_USAGE)


def main(argv=None) -> int:
    _setup_logging()
    args = _parser().parse_args(argv)
    if args.parallel < 1:
        print("error: --parallel must be at least 1", file=sys.stderr)
        return EXIT_USAGE
    try:
        cfg = _resolve(args)
        out_dir = cfg["output"]["dir"]
        fmt = cfg["output"]["format"]
        os.makedirs(out_dir, exist_ok=True)
        echo = json.dumps(cfg, indent=2, sort_keys=True) + "\n"
        with open(os.path.join(out_dir, "config.resolved.json"), "w") as fh:
            fh.write(echo)
        log.info("resolved config:\n%s", echo)
        report = run_command(args.command, cfg, args.parallel)
    except ConfigError as exc:
        print(f"error: config {exc}", file=sys.stderr)
        return EXIT_USAGE
    except BudgetExceeded as exc:
        print(f"error: refusing to run the exhaustive oracle: {exc}", file=sys.stderr)
        return EXIT_REFUSED
    except InfeasibleInstance as exc:
        print(f"error: infeasible instance: {exc}", file=sys.stderr)
        return EXIT_FAIL
    except (ValueError, RuntimeError, OSError) as exc:
        print(f"error: {args.command}: {exc}", file=sys.stderr)
        return EXIT_FAIL

    failed = report.pop("_failed", False)
    trace = report.pop("_trace_csv", None)
    stem = args.command.replace("-", "_")
    columns = SWEEP_COLUMNS if args.command == "sweep" else None
    path = os.path.join(out_dir, f"{stem}.{fmt}")
    try:
        emit_report(report, fmt, path, columns)
        if trace is not None:
            with open(os.path.join(out_dir, f"{stem}.trace.csv"), "w", newline="") as fh:
                fh.write(trace)
    except OSError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_FAIL
    print(path)
    return EXIT_FAIL if failed else EXIT_OK


if __name__ == "__main__":
    raise SystemExit(main())
