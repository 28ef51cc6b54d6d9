"""Partition functions: the single-face measure nu, reduction moves and the closed form."""
from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from . import fatgraph as fg
from .groups import (
    GroupContext,
    UnsupportedGroup,
    commutator_lift,
    cover_heat_kernel,
    haar_sample,
    make_rng,
)
from .lattice import (
    MeasureSpec,
    PartitionEstimate,
    _mc_mean,
    expand_config,
    partition_estimate,
    word_product,
)

__all__ = [
    "NuSampler",
    "PartitionEstimate",
    "character_sum_Z",
    "closed_form_Z",
    "full_pipeline_check",
    "reduced_graph_Z",
    "move_equivariance_check",
    "nu_sample",
]


@dataclass(frozen=True)
class NuSampler:
    """A single-face graph together with the word of its face."""

    graph: fg.FatGraph

    def __post_init__(self):
        if self.graph.face_count != 1:
            raise fg.GraphError("nu is defined for single-face graphs")

    @property
    def word(self) -> tuple[int, ...]:
        return self.graph.faces[0]


def _edge_lifts(ctx: GroupContext, graph: fg.FatGraph, edge_vals):
    """Lifted configuration with ``gt(e^-1) = gt(e)^-1`` from values on the orientation."""
    orient = graph.orientation()
    lifted = ctx.lift(edge_vals)
    out = np.empty(lifted.shape[:-2] + (graph.dart_count, ctx.dim))
    out[..., list(orient), :] = lifted
    out[..., [graph.alpha[e] for e in orient], :] = ctx.cover_inv(lifted)
    return out


def h_gamma(ctx: GroupContext, graph: fg.FatGraph, g):
    """Lifted holonomy of the unique face; ``g`` is a configuration on all darts."""
    edge_vals = np.asarray(g)[..., list(graph.orientation()), :]
    return word_product(ctx, _edge_lifts(ctx, graph, edge_vals), graph.faces[0], cover=True)


def nu_sample(sampler: NuSampler, ctx: GroupContext, rng, size=None):
    """Draw from ``nu_Gamma``: the lifted face holonomy of a Haar configuration."""
    rng = make_rng(rng)
    graph = sampler.graph
    shape = () if size is None else tuple(np.atleast_1d(size))
    if graph.dart_count == 0:
        return ctx.cover_identity(shape) if shape else ctx.cover_identity()
    vals = haar_sample(ctx, rng, shape + (graph.edge_count,))
    return word_product(ctx, _edge_lifts(ctx, graph, vals), sampler.word, cover=True)


def nu_angles(sampler: NuSampler, ctx: GroupContext, rng, size: int):
    """Class angles of ``nu_Gamma`` samples (the 1D shadow used for comparisons)."""
    return ctx.cover_class_angle(nu_sample(sampler, ctx, rng, size))


# -- moves and their changes of variables ------------------------------------


def _k_change(graph: fg.FatGraph, e: int, ctx: GroupContext, g):
    """Cut-and-paste change of variables: ``k(e) = g(d)^-1 g(e)`` with ``d`` before ``e^-1``."""
    d = fg._inverse(graph.phi)[graph.alpha[e]]
    new = fg.cut_paste(graph, e)
    if d == e:
        return new, g
    k = np.array(g, copy=True)
    ke = ctx.mul(ctx.inv(g[..., d, :]), g[..., e, :])
    k[..., e, :] = ke
    k[..., graph.alpha[e], :] = ctx.inv(ke)
    return new, k


def _w_change(graph: fg.FatGraph, e: int, ctx: GroupContext, g):
    """Whitehead change of variables: gauge at ``target(e)`` by ``g(e)``, then drop ``e``."""
    new, keep = fg._whitehead(graph, e)
    v = graph.target(e)
    j = ctx.identity(g.shape[:-2] + (graph.vertex_count,))
    j[..., v, :] = g[..., e, :]
    tgt = [graph.target(x) for x in range(graph.dart_count)]
    src = [graph.source(x) for x in range(graph.dart_count)]
    moved = ctx.mul(ctx.mul(ctx.inv(j[..., tgt, :]), g), j[..., src, :])
    return new, moved[..., keep, :]


def move_equivariance_check(graph: fg.FatGraph, dart: int, move: str, ctx: GroupContext, trials: int = 100, rng=0) -> dict:
    """Check ``h_Gamma(g) ~ h_{move(Gamma)}(cov(g))`` on random ``g`` (class level).

    ``move`` is ``"K"`` (cut-and-paste at ``dart``) or ``"W"`` (Whitehead
    contraction of ``dart``).  Both sides are compared through their cover class
    angle (U1: coordinates).
    """
    if graph.face_count != 1:
        raise fg.GraphError("move equivariance is stated for single-face graphs")
    rng = make_rng(rng)
    g = expand_config(ctx, graph, haar_sample(ctx, rng, (trials, graph.edge_count)))
    if move == "K":
        new, cov = _k_change(graph, dart, ctx, g)
    elif move == "W":
        new, cov = _w_change(graph, dart, ctx, g)
    else:
        raise ValueError(f"unknown move {move!r}")
    before = h_gamma(ctx, graph, g)
    after = h_gamma(ctx, new, cov)
    dist = ctx.cover_class_distance(before, after)
    worst = float(np.max(dist)) if trials else 0.0
    return {
        "move": move,
        "dart": int(dart),
        "trials": int(trials),
        "max_class_distance": worst,
        "passed": worst <= 1e-9,
        "faces_after": new.face_count,
        "genus_after": new.genus,
    }


# -- closed forms -------------------------------------------------------------


def closed_form_Z(ctx: GroupContext, genus: int, T: float, total_area: float, z=None, effort: int = 100000, rng=0) -> PartitionEstimate:
    """``int_{G^{2g}} p~_{T sigma(M)}([a1,b1]...[ag,bg] z)`` by Haar MC; exact when it is constant."""
    if genus < 0:
        raise ValueError("genus must be non-negative")
    t = T * total_area
    zz = ctx.center(z)
    if genus == 0 or ctx.abelian:
        return PartitionEstimate(float(cover_heat_kernel(ctx, t, ctx.deck(zz))), 0.0, "closed_form", 0)
    seed = rng if isinstance(rng, int) else None
    rng = make_rng(rng)
    vals = []
    left = int(effort)
    while left > 0:
        k = min(left, 50000)
        x = haar_sample(ctx, rng, (k, 2 * genus))
        prod = ctx.cover_identity(k)
        for i in range(genus):
            prod = ctx.cover_mul(prod, commutator_lift(ctx, x[:, 2 * i], x[:, 2 * i + 1]))
        vals.append(cover_heat_kernel(ctx, t, ctx.cover_mul(prod, ctx.deck(zz))))
        left -= k
    v, se = _mc_mean(np.concatenate(vals))
    return PartitionEstimate(v, se, "closed_form", int(effort), [seed] if seed is not None else [])


def character_sum_Z(ctx: GroupContext, genus: int, T: float, total_area: float, z=None) -> PartitionEstimate:
    """Character expansion of the closed form.

    With ``s = casimir_scale T sigma(M) / 2`` and ``n`` the dimension of the SU(2)
    irreducible, ``SO3: Z = (1/2) sum_n n^(2-2g) eps_n(z) exp(-s (n^2 - 1))`` where
    ``eps_n(+1) = 1`` and ``eps_n(-1) = (-1)^(n+1)``; ``SU2: Z = sum_n n^(2-2g) exp(-s (n^2-1))``.
    """
    if ctx.kind == "U1":
        raise UnsupportedGroup("character sums are implemented for SU2 and SO3")
    zz = int(ctx.center(z)[0])
    s = ctx.casimir_scale * T * total_area / 2
    total = 0.0
    n = 1
    while True:
        w = math.exp(-s * (n * n - 1))
        sign = 1 if (zz == 1 or n % 2 == 1) else -1
        total += n ** (2 - 2 * genus) * sign * w
        if n > 1 and (n + 1) ** 2 * math.exp(-s * ((n + 1) ** 2 - 1)) < ctx.series_tol * 1e-3:
            break
        n += 1
    if ctx.kind == "SO3":
        total /= 2
    return PartitionEstimate(total, 0.0, "character_sum", n)


def reduced_graph_Z(graph: fg.FatGraph, ctx: GroupContext, T: float, total_area: float, z=None, effort: int = 100000, rng=0) -> PartitionEstimate:
    """``int p~_{T sigma(M)}(x z) d nu_Gamma(x)`` for a single-face graph, by MC."""
    sampler = NuSampler(graph)
    zz = ctx.center(z)
    t = T * total_area
    if graph.dart_count == 0 or ctx.abelian:
        # nu is the Dirac mass at the identity in these cases
        return PartitionEstimate(float(cover_heat_kernel(ctx, t, ctx.deck(zz))), 0.0, "reduced", 0)
    seed = rng if isinstance(rng, int) else None
    rng = make_rng(rng)
    vals = []
    left = int(effort)
    while left > 0:
        k = min(left, 50000)
        x = nu_sample(sampler, ctx, rng, k)
        vals.append(cover_heat_kernel(ctx, t, ctx.cover_mul(x, ctx.deck(zz))))
        left -= k
    v, se = _mc_mean(np.concatenate(vals))
    return PartitionEstimate(v, se, "reduced", int(effort), [seed] if seed is not None else [])


def full_pipeline_check(
    graph: fg.FatGraph,
    areas: fg.AreaMap,
    ctx: GroupContext,
    T: float = 1.0,
    z=None,
    effort: int = 100000,
    seed: int = 0,
    quadrature_nodes: int = 48,
    nsigma: float = 3.0,
    rtol: float = 1e-8,
) -> dict:
    """Compute ``Z_{T,z}`` by direct integration, via the reduced graph and in closed form.

    For U1 the direct value uses quadrature when the grid is small enough; for
    SO3/SU2 the character sum is added as a fourth, exact, value.
    """
    spec = MeasureSpec(ctx, graph, areas, T, z)
    # stream i is default_rng([seed, i]); logged in each estimate
    seeds = [[seed, i] for i in range(3)]
    dims = graph.edge_count * ctx.m
    if ctx.kind == "U1" and quadrature_nodes**dims <= 2_000_000:
        direct = partition_estimate(spec, "quadrature", quadrature_nodes)
        # the refinement difference is an upper error estimate, not a standard error
        direct.std_error = 0.0 if direct.std_error < rtol * abs(direct.value) else direct.std_error
    else:
        direct = partition_estimate(spec, "mc", effort, np.random.default_rng(seeds[0]))
    reduced_graph, reduced_areas = fg.contract_dual_tree(graph, areas)
    reduced = reduced_graph_Z(reduced_graph, ctx, T, reduced_areas.total, spec.z, effort, np.random.default_rng(seeds[1]))
    closed = closed_form_Z(ctx, graph.genus, T, areas.total, spec.z, effort, np.random.default_rng(seeds[2]))
    estimates = {"direct": direct, "reduced": reduced, "closed_form": closed}
    for est, sd in zip(estimates.values(), seeds):
        if est.std_error > 0 or est.method == "mc":
            est.seeds = [sd]
    if ctx.kind != "U1":
        estimates["character_sum"] = character_sum_Z(ctx, graph.genus, T, areas.total, spec.z)
    names = list(estimates)
    comparisons = []
    for i, a in enumerate(names):
        for b in names[i + 1:]:
            ea, eb = estimates[a], estimates[b]
            comparisons.append(
                {
                    "pair": [a, b],
                    "difference": ea.value - eb.value,
                    "combined_se": math.hypot(ea.std_error, eb.std_error),
                    "passed": ea.agrees(eb, nsigma, rtol),
                }
            )
    return {
        "group": ctx.kind,
        "m": ctx.m,
        "genus": graph.genus,
        "faces": graph.face_count,
        "edges": graph.edge_count,
        "T": T,
        "total_area": areas.total,
        "z": [int(v) for v in spec.z],
        "seed": seed,
        "estimates": {k: v.to_dict() for k, v in estimates.items()},
        "comparisons": comparisons,
        "passed": all(c["passed"] for c in comparisons),
    }
