"""Command-line front end.

Exit codes: 0 all comparisons pass, 1 a numerical comparison failed,
2 invalid input (config, graph file, flags), 3 internal error.
"""
from __future__ import annotations

import argparse
import json
import logging
import sys
import traceback
from pathlib import Path

import numpy as np

from . import checks
from . import fatgraph as fg
from . import lattice as lat
from . import partition as pt
from . import sectors as sec
from .config import ConfigError, RunConfig, bundled_graphs, load_graph_ref
from .report import to_json, write_csv, write_report

EXIT_OK, EXIT_FAIL, EXIT_INVALID, EXIT_INTERNAL = 0, 1, 2, 3

log = logging.getLogger("ymlattice")


def _rng(cfg: RunConfig, salt: int = 0):
    return np.random.default_rng([cfg.seed, salt])


# -- commands ----------------------------------------------------------------------


def cmd_partition(cfg: RunConfig) -> int:
    ctx = cfg.context()
    graph, areas = cfg.graph()
    tol = cfg.tolerances
    res = pt.full_pipeline_check(
        graph,
        areas,
        ctx,
        cfg.T,
        cfg.center(),
        effort=cfg.effort,
        seed=cfg.seed,
        quadrature_nodes=cfg.task.get("quadrature_nodes", 48),
        nsigma=tol["nsigma"],
        rtol=tol["rtol"],
    )
    rows = [
        {"name": f"{c['pair'][0]}~{c['pair'][1]}", "passed": c["passed"], "difference": c["difference"], "combined_se": c["combined_se"]}
        for c in res["comparisons"]
    ]
    for name, est in res["estimates"].items():
        log.info("%s: %.10g +- %.3g", name, est["value"], est["std_error"])
    write_report(cfg.out_dir, "partition", "partition function Z_{T,z}", rows, res)
    return EXIT_OK if res["passed"] else EXIT_FAIL


def _graph_set(cfg: RunConfig):
    refs = cfg.task.get("graphs")
    if refs is None:
        refs = [cfg.raw["graph"]] if "graph" in cfg.raw else [f"bundled:{n}" for n in bundled_graphs()]
    return {Path(r.split(":", 1)[-1]).stem: load_graph_ref(r, cfg.base) for r in refs}


def cmd_check(cfg: RunConfig, suite: str | None) -> int:
    suite = suite or cfg.task.get("suite")
    if suite not in checks.SUITES:
        raise ConfigError(f"check needs a suite, one of: {', '.join(checks.SUITES)}")
    ctx = cfg.context()
    rng = _rng(cfg)
    task = cfg.task
    if suite == "heat":
        rows = checks.heat_suite(ctx, rng, task.get("trials", 50), cfg.effort, cfg.tolerances["rtol"])
    elif suite == "gauge":
        graph, areas = cfg.graph()
        rows = checks.gauge_suite(ctx, graph, areas, rng, task.get("trials", 20), cfg.T)
    elif suite == "moves":
        graphs = _graph_set(cfg)
        rows = checks.combinatorial_suite(graphs)
        rows += checks.moves_suite(ctx, graphs, rng, task.get("trials", 100), task.get("samples", 20000))
    elif suite == "subdivision":
        graph, areas = cfg.graph()
        rows = checks.subdivision_suite(ctx, graph, areas, rng, cfg.T, cfg.center(), cfg.effort)
    elif suite == "abelian":
        rows = checks.abelian_suite(rng, task.get("trials", 20), task.get("samples", cfg.effort))
    else:
        zs = task.get("z_values")
        rows = checks.sectors_suite(
            ctx, rng, task.get("genus", 1), cfg.T, task.get("total_area", 1.0), zs, task.get("samples", 100), task.get("grid_points", 1001)
        )
    for r in rows:
        if r.get("warning"):
            log.warning("%s: %s", r["name"], r["warning"])
    write_report(cfg.out_dir, f"check_{suite}", f"check {suite}", rows)
    return EXIT_OK if all(r["passed"] for r in rows) else EXIT_FAIL


def _config_header(ctx, graph):
    cols = []
    comps = [f"x{j}" for j in range(ctx.m)] if ctx.kind == "U1" else ["w", "x", "y", "z"]
    for e in graph.orientation():
        cols += [f"e{e}_{c}" for c in comps]
    return cols


def cmd_sample(cfg: RunConfig) -> int:
    ctx = cfg.context()
    task = cfg.task
    n = task.get("samples", 10)
    rng = _rng(cfg)
    if task.get("kind", "config") == "loop":
        grid = np.linspace(0.0, task.get("total_area", 1.0), task.get("grid_points", 1001))
        batch = sec.loop_process_sample(ctx, task.get("genus", 1), cfg.T, task.get("total_area", 1.0), cfg.center(), grid, rng, size=n)
        comps = [f"x{j}" for j in range(ctx.m)] if ctx.kind == "U1" else ["w", "x", "y", "z"]
        rows = []
        for i, s in enumerate(batch):
            for k, t in enumerate(s.grid):
                rows.append([i, k, float(t)] + [float(v) for v in s.values[k]])
        write_csv(cfg.out_dir / "loop_samples.csv", ["sample", "index", "area"] + comps, rows)
        return EXIT_OK
    graph, areas = cfg.graph()
    spec = lat.MeasureSpec(ctx, graph, areas, cfg.T, cfg.center())
    method = task.get("method", "auto")
    params = {}
    if method == "mh" or (method == "auto" and ctx.kind != "U1"):
        params = {
            "burn_in": task.get("burn_in", 200),
            "thin": task.get("thin", 2),
            "n_chains": task.get("chains", 16),
            "step": task.get("step", 0.1),
        }
    g = lat.sample_config(spec, rng, n, method, **params)
    vals = lat.edge_values(graph, g)
    rows = [[float(v) for v in sample.ravel()] for sample in vals]
    write_csv(cfg.out_dir / "samples.csv", _config_header(ctx, graph), rows)
    return EXIT_OK


def cmd_reduce(cfg: RunConfig) -> int:
    graph, areas = cfg.graph()
    single, sareas = fg.contract_dual_tree(graph, areas)
    reduced, rareas, moves = checks.single_vertex_reduction(graph, areas)
    std, slog = fg.standardize(reduced)
    out = cfg.out_dir
    out.mkdir(parents=True, exist_ok=True)
    fg.save_graph(out / "single_face.json", single, sareas, "single_face")
    fg.save_graph(out / "single_vertex.json", reduced, rareas, "single_vertex")
    fg.save_graph(out / "standard.json", std, fg.AreaMap.for_graph(std, [areas.total]), "standard")
    moves = [list(m) for m in moves] + [[k, list(v) if isinstance(v, tuple) else v] for k, v in slog]
    (out / "moves.json").write_text(to_json({"genus": graph.genus, "moves": moves}))
    rows = [
        {"name": "single_face", "passed": single.face_count == 1 and single.genus == graph.genus},
        {"name": "standard_form", "passed": checks.standard_pattern_ok(std)},
    ]
    write_report(out, "reduce", "graph reduction", rows, {"genus": graph.genus, "move_count": len(moves)})
    return EXIT_OK if all(r["passed"] for r in rows) else EXIT_FAIL


def cmd_sectors(cfg: RunConfig) -> int:
    ctx = cfg.context()
    task = cfg.task
    rng = _rng(cfg)
    zs = task.get("z_values", [cfg.raw.get("measure", {}).get("z")] if "z" in cfg.raw.get("measure", {}) else None)
    if zs is None:
        zs = [1, -1] if ctx.kind == "SO3" else ([0] * ctx.m if ctx.kind == "U1" else [1],)
    for z in zs:
        ctx.center(z)
    total = task.get("total_area", 1.0)
    grid = np.linspace(0.0, total, task.get("grid_points", 1001))
    n = task.get("samples", 100)
    table = []
    rows = []
    for z in zs:
        zz = ctx.center(z)
        batch = sec.loop_process_sample(ctx, task.get("genus", 1), cfg.T, total, zz, grid, rng, size=n)
        refused = wrong = 0
        for i, s in enumerate(batch):
            est = sec.extract_obstruction(s)
            refused += est.refused
            mismatch = (not est.refused) and bool(np.any(est.o_hat != zz))
            wrong += mismatch
            table.append(
                [
                    " ".join(str(int(v)) for v in zz),
                    i,
                    "" if est.refused else " ".join(str(int(v)) for v in est.o_hat),
                    len(s.grid),
                    int(est.refused),
                    est.reason,
                    float(est.max_step),
                ]
            )
        rows.append({"name": f"sector[z={zz.tolist()}]", "passed": refused == 0 and wrong == 0, "refusals": refused, "mismatches": wrong})
    write_csv(cfg.out_dir / "sectors.csv", ["z", "sample", "o_hat", "grid_size", "refused", "reason", "max_step"], table)
    write_report(cfg.out_dir, "sectors", "bundle-class sectors", rows)
    return EXIT_OK if all(r["passed"] for r in rows) else EXIT_FAIL


# -- entry point ---------------------------------------------------------------------


def build_parser() -> argparse.ArgumentParser:
    p = argparse.ArgumentParser(prog="ymlattice", description="Discrete 2D Yang-Mills per-bundle-class measures.")
    p.add_argument("-v", "--verbose", action="store_true")
    sub = p.add_subparsers(dest="command", required=True)
    for name in ("partition", "check", "sample", "reduce", "sectors"):
        sp = sub.add_parser(name)
        sp.add_argument("--config", required=True, help="JSON run configuration")
        sp.add_argument("--seed", type=int)
        sp.add_argument("--effort", type=int)
        sp.add_argument("--out", help="output directory")
        if name == "check":
            sp.add_argument("suite", nargs="?", choices=checks.SUITES)
    return p


def main(argv=None) -> int:
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
    except SystemExit as exc:
        return EXIT_OK if exc.code == 0 else EXIT_INVALID
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING, format="%(levelname)s %(message)s")
    try:
        if args.seed is not None and args.seed < 0 or args.effort is not None and args.effort < 1:
            raise ConfigError("--seed must be >= 0 and --effort >= 1")
        cfg = RunConfig.load(args.config)
        cfg.override(args.seed, args.effort, args.out)
        cfg = RunConfig.from_dict(cfg.raw, cfg.base)
        if args.command == "partition":
            return cmd_partition(cfg)
        if args.command == "check":
            return cmd_check(cfg, args.suite)
        if args.command == "sample":
            return cmd_sample(cfg)
        if args.command == "reduce":
            return cmd_reduce(cfg)
        return cmd_sectors(cfg)
    except (ConfigError, fg.GraphError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_INVALID
    except Exception:  # pragma: no cover - reported, not hidden
        traceback.print_exc()
        return EXIT_INTERNAL


if __name__ == "__main__":
    sys.exit(main())
