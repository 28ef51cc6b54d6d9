"""Acceptance criteria 1-9.

Each test prints one ``CRITERION k: PASS|FAIL`` line with its runtime; the lines
are repeated in the terminal summary (see conftest).
"""
import time

import numpy as np
import pytest

from ymlattice import checks
from ymlattice import lattice as lat
from ymlattice import partition as pt
from ymlattice.config import bundled_graphs, load_graph_ref
from ymlattice.groups import GroupContext, cover_heat_kernel

U1 = GroupContext.U1()
SO3 = GroupContext.SO3()
SU2 = GroupContext.SU2()

RESULTS = []


def report(k, title, passed, elapsed, limit, detail=""):
    ok = passed and elapsed < limit
    line = f"CRITERION {k}: {'PASS' if ok else 'FAIL'}  {title}  ({elapsed:.1f}s, limit {limit:.0f}s){'  ' + detail if detail else ''}"
    RESULTS.append(line)
    print(line)
    assert passed, line
    assert elapsed < limit, line


def all_graphs():
    return {n: load_graph_ref(f"bundled:{n}") for n in bundled_graphs()}


def test_criterion_1_projection_identity():
    t0 = time.perf_counter()
    worst = 0.0
    for i, ctx in enumerate((U1, GroupContext.U1(2), SU2, SO3)):
        rows = checks.heat_suite(ctx, np.random.default_rng([1, i]), trials=50, effort=1000)
        worst = max(worst, rows[0]["max_rel_error"])
    report(1, "heat-kernel projection identity", worst <= 1e-8, time.perf_counter() - t0, 60, f"max rel err {worst:.2e}")


def test_criterion_2_lift_independence():
    t0 = time.perf_counter()
    rng = np.random.default_rng(2)
    worst = 0.0
    checked = 0
    for name in ("torus_two_face", "genus2_scrambled", "sphere_loop"):
        graph, areas = load_graph_ref(f"bundled:{name}")
        for ctx, z, decks in ((U1, 2, (-3, -1, 1, 2)), (SO3, -1, (-1,))):
            spec = lat.MeasureSpec(ctx, graph, areas, 0.7, z)
            for _ in range(20):
                gt = lat.lift_config(ctx, graph, lat.random_config(ctx, graph, rng))
                d0 = lat.density_D_lifted(spec, gt)
                for d in range(graph.dart_count):
                    for w in decks:
                        moved = gt.copy()
                        moved[d] = ctx.cover_mul(moved[d], ctx.deck(ctx.center(w)))
                        worst = max(worst, abs(lat.density_D_lifted(spec, moved) - d0) / abs(d0))
                        checked += 1
    report(2, "lift independence of D", worst <= 1e-10, time.perf_counter() - t0, 60, f"{checked} perturbations, max rel {worst:.2e}")


def test_criterion_3_class_decomposition():
    t0 = time.perf_counter()
    rng = np.random.default_rng(3)
    worst = 0.0
    for name in ("torus_two_face", "genus2_scrambled", "sphere_loop"):
        graph, areas = load_graph_ref(f"bundled:{name}")
        for ctx, zs in ((SO3, (1, -1)), (U1, range(-12, 13))):
            spec = lat.MeasureSpec(ctx, graph, areas, 0.6, None)
            g = lat.random_config(ctx, graph, rng, 100)
            total = sum(lat.density_D(spec.with_z(z), g) for z in zs)
            usual = lat.usual_density(spec, g)
            worst = max(worst, float(np.max(np.abs(total - usual) / np.abs(usual))))
    report(3, "sum over classes equals the usual density", worst <= 1e-8, time.perf_counter() - t0, 60, f"max rel {worst:.2e}")


def test_criterion_4_subdivision():
    t0 = time.perf_counter()
    rows = []
    for name in ("torus_two_face", "sphere_loop"):
        graph, areas = load_graph_ref(f"bundled:{name}")
        rows += checks.subdivision_suite(U1, graph, areas, np.random.default_rng(4), T=0.8, z=1)
    graph, areas = load_graph_ref("bundled:torus_two_face")
    so3 = checks.subdivision_suite(SO3, graph, areas, np.random.default_rng(5), T=0.8, z=-1, effort=100000)
    rows += so3
    ops = {r["name"] for r in rows}
    passed = all(r["passed"] for r in rows) and {"pushforward[V]", "pushforward[E1]", "pushforward[E2]"} <= ops
    wil = next(r for r in so3 if r["name"] == "pushforward[E2]")
    detail = f"SO3 Wilson {wil['coarse']:.4f}+-{wil['coarse_se']:.4f} vs {wil['refined']:.4f}+-{wil['refined_se']:.4f}"
    report(4, "subdivision invariance", passed, time.perf_counter() - t0, 600, detail)


def test_criterion_5_move_equivariance():
    t0 = time.perf_counter()
    rows = []
    for i, ctx in enumerate((U1, SO3)):
        rows += checks.moves_suite(ctx, all_graphs(), np.random.default_rng([6, i]), trials=100, ks_samples=20000)
    failed = [r["name"] for r in rows if not r["passed"]]
    worst = max(r.get("max_class_distance", 0.0) for r in rows)
    report(5, "move equivariance and nu under standardize", not failed, time.perf_counter() - t0, 300, f"max class dist {worst:.1e} {failed or ''}")


def test_criterion_6_z_agreement():
    t0 = time.perf_counter()
    ok = True
    worst = 0.0
    for name in ("torus_two_face", "torus_standard", "sphere_loop", "sphere_segment"):
        graph, areas = load_graph_ref(f"bundled:{name}")
        res = pt.full_pipeline_check(graph, areas, U1, 0.7, 2, effort=1000, seed=6)
        exact = float(cover_heat_kernel(U1, 0.7 * areas.total, np.array([2.0])))
        for k in ("direct", "reduced", "closed_form"):
            worst = max(worst, abs(res["estimates"][k]["value"] - exact) / exact)
        ok = ok and res["passed"]
    graph, areas = load_graph_ref("bundled:torus_two_face")
    parts = []
    for z in (1, -1):
        res = pt.full_pipeline_check(graph, areas, SO3, 0.3 / areas.total, z, effort=100000, seed=7)
        ok = ok and res["passed"]
        e = res["estimates"]
        parts.append(f"z={z}: " + " ".join(f"{k}={v['value']:.5f}" for k, v in e.items()))
    report(6, "three-way agreement for Z", ok and worst <= 1e-8, time.perf_counter() - t0, 900, f"U1 max rel {worst:.1e}; " + "; ".join(parts))


def test_criterion_7_abelian():
    t0 = time.perf_counter()
    rows = checks.abelian_suite(np.random.default_rng(8), probes=20, samples=100000)
    ks = next(r for r in rows if r["name"] == "sampler_vs_lattice_ks")
    report(7, "abelian representation", all(r["passed"] for r in rows), time.perf_counter() - t0, 300, f"min KS p {ks['min_pvalue']:.3f}")


def test_criterion_8_sector_separation():
    t0 = time.perf_counter()
    rows = []
    for i, ctx in enumerate((SO3, U1, SU2)):
        rows += checks.sectors_suite(ctx, np.random.default_rng([9, i]), genus=1, T=1.0, samples=100, grid_points=1001)
    refusals = sum(r["refusals"] for r in rows)
    wrong = sum(r["mismatches"] for r in rows)
    passed = all(r["passed"] for r in rows)
    report(8, "sector separation", passed, time.perf_counter() - t0, 600, f"{len(rows)} classes, {refusals} refusals, {wrong} mismatches")


def test_criterion_9_combinatorics():
    t0 = time.perf_counter()
    graphs = all_graphs()
    assert max(g.genus for g, _ in graphs.values()) == 3
    rows = checks.combinatorial_suite(graphs)
    failed = [r["name"] for r in rows if not r["passed"]]
    report(9, "combinatorial suite", not failed, time.perf_counter() - t0, 60, f"{len(graphs)} graphs {failed or ''}")
