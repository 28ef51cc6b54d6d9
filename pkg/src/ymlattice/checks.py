"""Invariance suites driven by the ``check`` command.

Every suite returns a list of result rows ``{"name", "passed", ...}``.  A suite
that ran zero trials passes vacuously and carries ``"warning": "vacuous"``.
"""
from __future__ import annotations

import math

import numpy as np
from scipy import stats
from scipy.integrate import quad

from . import fatgraph as fg
from . import lattice as lat
from . import partition as pt
from . import sectors as sec
from .groups import (
    GroupContext,
    circle_kernel,
    cover_heat_kernel,
    haar_sample,
    heat_kernel,
    projection_sum_check,
    weyl_angle_density,
)

SUITES = ("heat", "gauge", "moves", "subdivision", "abelian", "sectors")


def _row(name, passed, **extra):
    out = {"name": name, "passed": bool(passed)}
    out.update(extra)
    return out


def _random_cover(ctx: GroupContext, rng, n):
    if ctx.kind == "U1":
        return rng.normal(scale=2.0, size=(n, ctx.m))
    return haar_sample(GroupContext("SU2"), rng, n)


# -- heat kernels -------------------------------------------------------------------


def heat_suite(ctx: GroupContext, rng, trials: int = 50, effort: int = 100000, rtol: float = 1e-8):
    rows = []
    ts = np.exp(rng.uniform(np.log(0.02), np.log(3.0), trials))
    xs = _random_cover(ctx, rng, trials)
    worst = 0.0
    for t, xt in zip(ts, xs):
        lhs, rhs = projection_sum_check(ctx, float(t), xt)
        worst = max(worst, float(abs(lhs - rhs) / abs(rhs)))
    rows.append(_row("projection_identity", worst <= rtol, trials=trials, max_rel_error=worst))

    # unit mass by quadrature (U1 per coordinate; SU2/SO3 through the Weyl density)
    worst = 0.0
    for t in (0.05, 0.3, 1.5):
        if ctx.kind == "U1":
            mass = quad(lambda u: float(circle_kernel(np.array(u), t)), -0.5, 0.5, limit=200)[0] ** ctx.m
        else:
            def f(th, t=t):
                q = np.array([math.cos(th), math.sin(th), 0.0, 0.0])
                return float(heat_kernel(ctx, t, q)) * weyl_angle_density(th)
            mass = quad(f, 0, math.pi, limit=200)[0]
        worst = max(worst, abs(mass - 1))
    rows.append(_row("unit_mass", worst <= 1e-8, max_abs_error=worst))

    # semigroup: int p_s(x y^-1) p_t(y) dy = p_{s+t}(x)
    s, t = 0.2, 0.35
    x = haar_sample(ctx, rng)
    if ctx.kind == "U1":
        n = 400
        nodes = (np.arange(n) + 0.5) / n
        grids = np.meshgrid(*([nodes] * ctx.m), indexing="ij")
        y = np.stack([g.ravel() for g in grids], axis=-1)
        val = float(np.mean(heat_kernel(ctx, s, ctx.mul(x, ctx.inv(y))) * heat_kernel(ctx, t, y)))
        target = float(heat_kernel(ctx, s + t, x))
        rows.append(_row("semigroup", abs(val - target) <= 1e-8 * target, value=val, target=target))
    else:
        y = haar_sample(ctx, rng, effort)
        vals = heat_kernel(ctx, s, ctx.mul(x, ctx.inv(y))) * heat_kernel(ctx, t, y)
        val, se = float(vals.mean()), float(vals.std(ddof=1) / math.sqrt(effort))
        target = float(heat_kernel(ctx, s + t, x))
        rows.append(_row("semigroup", abs(val - target) <= 3 * se, value=val, std_error=se, target=target))
    return rows


# -- gauge ----------------------------------------------------------------------


def gauge_suite(ctx: GroupContext, graph: fg.FatGraph, areas: fg.AreaMap, rng, trials: int = 20, T: float = 1.0):
    if trials == 0:
        return [_row("gauge", True, trials=0, warning="vacuous")]
    bad_obs = bad_class = bad_proj = bad_D = 0
    spec = lat.MeasureSpec(ctx, graph, areas, T, None)
    for _ in range(trials):
        g = lat.random_config(ctx, graph, rng)
        gt = lat.lift_config(ctx, graph, g)
        if ctx.kind == "U1":
            gt = gt + rng.integers(-2, 3, size=gt.shape)
        elif ctx.kind == "SO3":
            gt = gt * rng.choice([-1.0, 1.0], size=(graph.dart_count, 1))
        j = lat.random_gauge(ctx, graph, rng)
        moved = lat.gauge_apply(ctx, graph, j, gt)
        if not lat.is_lifted_configuration(ctx, graph, moved):
            bad_proj += 1
        if np.any(lat.obstruction(ctx, graph, moved) != lat.obstruction(ctx, graph, gt)):
            bad_obs += 1
        for F in range(graph.face_count):
            a = lat.boundary_holonomy_lift(ctx, graph, gt, F)
            b = lat.boundary_holonomy_lift(ctx, graph, moved, F)
            if ctx.cover_class_distance(a, b) > 1e-9:
                bad_class += 1
        d0 = lat.density_D_lifted(spec, gt)
        d1 = lat.density_D_lifted(spec, moved)
        if abs(d0 - d1) > 1e-10 * abs(d0):
            bad_D += 1
    return [
        _row("projection_constraint_preserved", bad_proj == 0, trials=trials, failures=bad_proj),
        _row("obstruction_invariant", bad_obs == 0, trials=trials, failures=bad_obs),
        _row("boundary_classes_invariant", bad_class == 0, trials=trials, failures=bad_class),
        _row("density_invariant", bad_D == 0, trials=trials, failures=bad_D),
    ]


# -- moves ----------------------------------------------------------------------


def single_vertex_reduction(graph: fg.FatGraph, areas: fg.AreaMap):
    """Contract a dual spanning tree, then Whitehead-contract a spanning tree.

    Returns ``(graph, areas, log)``: a single-face single-vertex graph of the same
    genus and total area, with the list of moves applied.
    """
    log = []
    tree = fg.spanning_tree_dual(graph)
    current, current_areas = fg.contract_dual_tree(graph, areas, tree)
    if tree:
        log.append(("contract_dual_tree", sorted(tree)))
    while current.vertex_count > 1:
        e = next(d for d in range(current.dart_count) if current.target(d) != current.source(d))
        current = fg.whitehead(current, e)
        current_areas = fg.AreaMap.for_graph(current, [areas.total])
        log.append(("W", e))
    return current, current_areas, log


def standard_pattern_ok(graph: fg.FatGraph) -> bool:
    g = graph.genus
    if graph.face_count != 1 or graph.vertex_count != 1:
        return False
    if graph.dart_count == 0:
        return True
    word = fg.face_word_from(graph, 0)
    return fg.standard_order(graph, 0) == g and len(word) == 4 * g


def moves_suite(ctx: GroupContext, graphs: dict, rng, trials: int = 100, ks_samples: int = 20000, alpha: float = 0.01):
    rows = []
    for name, (graph, areas) in graphs.items():
        single = graph if graph.face_count == 1 else fg.contract_dual_tree(graph, areas)[0]
        worst = 0.0
        count = 0
        for e in range(single.dart_count):
            r = pt.move_equivariance_check(single, e, "K", ctx, trials, rng)
            worst = max(worst, r["max_class_distance"])
            count += 1
            if single.target(e) != single.source(e):
                r = pt.move_equivariance_check(single, e, "W", ctx, trials, rng)
                worst = max(worst, r["max_class_distance"])
                count += 1
        rows.append(_row(f"move_equivariance[{name}]", worst <= 1e-9, moves=count, trials=trials, max_class_distance=worst))
        reduced, _, _ = single_vertex_reduction(graph, areas)
        std, log = fg.standardize(reduced)
        pattern = standard_pattern_ok(std)
        rows.append(_row(f"standard_pattern[{name}]", pattern, genus=std.genus, moves=len(log)))
        if reduced.dart_count and not ctx.abelian:
            a = pt.nu_angles(pt.NuSampler(reduced), ctx, rng, ks_samples)
            b = pt.nu_angles(pt.NuSampler(std), ctx, rng, ks_samples)
            p = float(stats.ks_2samp(a, b).pvalue)
            rows.append(_row(f"nu_standardize_ks[{name}]", p > alpha, pvalue=p, samples=ks_samples))
    return rows


def combinatorial_suite(graphs: dict):
    """Euler bookkeeping under every move, standard-form conformance, dual-tree contraction."""
    rows = []
    for name, (graph, areas) in graphs.items():
        ok = True
        problems = []
        for e in range(graph.dart_count):
            if graph.target(e) != graph.source(e):
                w = fg.whitehead(graph, e)
                if (w.face_count, w.genus, w.vertex_count, w.edge_count) != (
                    graph.face_count, graph.genus, graph.vertex_count - 1, graph.edge_count - 1
                ):
                    ok = False
                    problems.append(("W", e))
            if graph.face_count == 1:
                k = fg.cut_paste(graph, e)
                if (k.face_count, k.genus, k.edge_count) != (1, graph.genus, graph.edge_count) or (
                    graph.vertex_count == 1 and k.vertex_count != 1
                ):
                    ok = False
                    problems.append(("K", e))
            for op, loc in (("V", e), ("E1", e)):
                s, _ = fg.elementary_subdivide(graph, areas, op, loc)
                if s.genus != graph.genus or s.face_count != graph.face_count or s.vertex_count != graph.vertex_count + 1:
                    ok = False
                    problems.append((op, e))
            F = graph.face_of[e]
            other = [d for d in graph.faces[F] if d != e]
            if other:
                half = areas.face_area[graph.face_key(F)] / 2
                s, sa = fg.elementary_subdivide(graph, areas, "E2", (e, other[0], half))
                if s.genus != graph.genus or s.face_count != graph.face_count + 1 or abs(sa.total - areas.total) > 1e-12:
                    ok = False
                    problems.append(("E2", e))
        rows.append(_row(f"move_bookkeeping[{name}]", ok, problems=problems[:5]))
        single, sareas = fg.contract_dual_tree(graph, areas)
        rows.append(
            _row(
                f"dual_tree_contraction[{name}]",
                single.face_count == 1
                and single.genus == graph.genus
                and single.vertex_count == graph.vertex_count
                and abs(sareas.total - areas.total) < 1e-12,
            )
        )
        reduced, _, _ = single_vertex_reduction(graph, areas)
        std, _ = fg.standardize(reduced)
        rows.append(_row(f"standardize[{name}]", standard_pattern_ok(std) and std == fg.FatGraph.standard(graph.genus)))
        again, log = fg.standardize(std)
        rows.append(_row(f"standardize_idempotent[{name}]", again == std and log == []))
    return rows


# -- subdivisions -------------------------------------------------------------------


def default_refinement_log(graph: fg.FatGraph, areas: fg.AreaMap):
    F = 0
    cyc = graph.faces[F]
    d1 = cyc[0]
    d2 = cyc[len(cyc) // 2] if len(cyc) > 1 else None
    log = [("V", d1), ("E1", d1)]
    if d2 is not None and d2 != d1:
        log.append(("E2", (d1, d2, 0.3 * areas.face_area[graph.face_key(F)])))
    return log


def subdivision_suite(ctx: GroupContext, graph: fg.FatGraph, areas: fg.AreaMap, rng, T: float = 1.0, z=None, effort: int = 100000, log=None):
    if log is None:
        log = default_refinement_log(graph, areas)
    report = lat.pushforward_check(ctx, graph, areas, log, T, z, effort, rng)
    return [_row(f"pushforward[{s['op']}]", s["passed"], **{k: v for k, v in s.items() if k != "passed"}) for s in report["steps"]]


# -- Abelian ---------------------------------------------------------------------


def abelian_suite(rng, probes: int = 20, samples: int = 100000, alpha: float = 0.01):
    rows = []
    cases = [
        sec.AbelianSpec(1, (0.3, 0.7), 1.0, (2,)),
        sec.AbelianSpec(1, (0.2, 0.5, 0.3), 0.6, (-3,)),
        sec.AbelianSpec(2, (0.25, 0.35, 0.4), 0.8, (1, -2)),
    ]
    for spec in cases:
        pts = [rng.random((spec.n - 1, spec.m)) for _ in range(probes)]
        r = sec.abelian_identity_check(spec, pts)
        rows.append(_row(f"DL_DR[m={spec.m},n={spec.n},z={list(spec.z)}]", r["passed"], max_rel_error=r["max_rel_error"]))
    # sampler against the lattice sampler on a two-face torus
    graph = fg.FatGraph.standard(1)
    graph, areas = fg.elementary_subdivide(graph, fg.AreaMap.uniform(graph), "E2", (0, 2, 0.35))
    ctx = GroupContext.U1()
    spec = lat.MeasureSpec(ctx, graph, areas, 0.9, [2])
    latt = lat.face_holonomies(ctx, graph, lat.sample_config(spec, rng, samples))[..., 0]
    aspec = sec.AbelianSpec(1, tuple(areas.as_list(graph)), 0.9, (2,))
    _, proj = sec.abelian_face_sampler(aspec, rng, samples)
    proj = proj[..., 0]
    pmin = 1.0
    for F in range(graph.face_count):
        pmin = min(pmin, float(stats.ks_2samp(latt[:, F], proj[:, F]).pvalue))
    s1 = np.mod(latt[:, 0] - latt[:, 1], 1.0)
    s2 = np.mod(proj[:, 0] - proj[:, 1], 1.0)
    pmin = min(pmin, float(stats.ks_2samp(s1, s2).pvalue))
    rows.append(_row("sampler_vs_lattice_ks", pmin > alpha, min_pvalue=pmin, samples=samples))
    return rows


# -- sectors -----------------------------------------------------------------------


def sectors_suite(ctx: GroupContext, rng, genus: int = 1, T: float = 1.0, total_area: float = 1.0, zs=None, samples: int = 100, grid_points: int = 1001):
    if zs is None:
        zs = [1, -1] if ctx.kind == "SO3" else ([[3] * ctx.m, [-2] * ctx.m] if ctx.kind == "U1" else [1])
    rows = []
    grid = np.linspace(0.0, total_area, grid_points)
    for z in zs:
        batch = sec.loop_process_sample(ctx, genus, T, total_area, z, grid, rng, size=samples)
        est = [sec.extract_obstruction(s) for s in batch]
        refused = sum(e.refused for e in est)
        wrong = sum((not e.refused) and bool(np.any(e.o_hat != ctx.center(z))) for e in est)
        rows.append(
            _row(
                f"sector[z={np.atleast_1d(z).tolist()}]",
                refused == 0 and wrong == 0,
                samples=samples,
                refusals=refused,
                mismatches=wrong,
                max_step=max(e.max_step for e in est),
                refinements=sum(s.refinements for s in batch),
            )
        )
    return rows
