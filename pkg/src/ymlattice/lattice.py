"""Lattice gauge fields on fat graphs and the per-class discrete measures.

A configuration is an array ``g`` of shape ``(..., 2a, dim)`` holding a group
element on every dart, with ``g[alpha(e)] = g[e]^-1``.  A lifted configuration
``gt`` has the same layout with cover elements, constrained only by
``project(gt[alpha(e)]) = project(gt[e])^-1``.

Holonomy uses the reverse-order convention: along the word ``e_1 ... e_n`` it
is ``g(e_n) ... g(e_1)``, so that ``h_{c1 c2} = h_{c2} h_{c1}``.
"""
from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import Sequence

import numpy as np

from . import fatgraph as fg
from .groups import (
    GroupContext,
    UnsupportedGroup,
    cover_heat_kernel,
    cover_heat_sample,
    haar_sample,
    heat_kernel,
    make_rng,
)


# -- configurations -------------------------------------------------------


def expand_config(ctx: GroupContext, graph: fg.FatGraph, values, orientation=None):
    """Spread values given on an orientation (shape ``(..., a, dim)``) over all darts."""
    orientation = graph.orientation() if orientation is None else tuple(orientation)
    values = np.asarray(values, dtype=float)
    out = np.empty(values.shape[:-2] + (graph.dart_count, ctx.dim))
    idx = np.array(orientation, dtype=int)
    out[..., idx, :] = values
    out[..., [graph.alpha[e] for e in orientation], :] = ctx.inv(values)
    return out


def edge_values(graph: fg.FatGraph, g, orientation=None):
    orientation = graph.orientation() if orientation is None else tuple(orientation)
    return np.asarray(g)[..., list(orientation), :]


def random_config(ctx: GroupContext, graph: fg.FatGraph, rng, size=None):
    """Haar-distributed configuration."""
    shape = () if size is None else tuple(np.atleast_1d(size))
    return expand_config(ctx, graph, haar_sample(ctx, rng, shape + (graph.edge_count,)))


def lift_config(ctx: GroupContext, graph: fg.FatGraph, g):
    """Principal lift of every dart separately (U1: coordinates in [-1/2, 1/2))."""
    return ctx.lift(g)


def project_config(ctx: GroupContext, gt):
    return ctx.project(gt)


def is_lifted_configuration(ctx: GroupContext, graph: fg.FatGraph, gt, tol: float = 1e-9) -> bool:
    gt = np.asarray(gt, dtype=float)
    p = ctx.project(gt)
    q = ctx.inv(ctx.project(gt[..., list(graph.alpha), :]))
    if ctx.kind == "U1":
        d = np.mod(p - q + 0.5, 1.0) - 0.5
        return bool(np.all(np.abs(d) < tol))
    return bool(np.all(np.abs(p - q) < tol))


def word_product(ctx: GroupContext, g, word: Sequence[int], cover: bool = False):
    """Reverse-order product ``g(e_n) ... g(e_1)`` over the darts of ``word``."""
    g = np.asarray(g, dtype=float)
    mul = ctx.cover_mul if cover else ctx.mul
    out = ctx.identity(g.shape[:-2]) if g.ndim > 2 else ctx.identity()
    for d in word:
        out = mul(g[..., d, :], out)
    return out


def holonomy(ctx: GroupContext, graph: fg.FatGraph, g, word: Sequence[int]):
    """Discrete holonomy along a path; the empty word gives the identity."""
    if any(not 0 <= d < graph.dart_count for d in word):
        raise fg.GraphError("word uses unknown darts")
    if not fg.is_word(graph, word):
        raise fg.GraphError("darts of the word do not concatenate")
    return word_product(ctx, g, word)


def boundary_holonomy_lift(ctx: GroupContext, graph: fg.FatGraph, gt, face: int):
    """Lifted holonomy around face ``face`` read from its smallest dart.

    Only its conjugacy class is intrinsic.
    """
    return word_product(ctx, gt, graph.faces[face], cover=True)


def face_holonomies(ctx: GroupContext, graph: fg.FatGraph, g, cover: bool = False):
    """Boundary holonomies of all faces, shape ``(..., f, dim)``."""
    return np.stack([word_product(ctx, g, w, cover=cover) for w in graph.faces], axis=-2)


def obstruction(ctx: GroupContext, graph: fg.FatGraph, gt, orientation=None):
    """The class ``prod_{e in E+} gt(e) gt(e^-1)`` in the deck group."""
    gt = np.asarray(gt, dtype=float)
    orientation = graph.orientation() if orientation is None else tuple(orientation)
    prod = ctx.cover_identity(gt.shape[:-2]) if gt.ndim > 2 else ctx.cover_identity()
    for e in orientation:
        prod = ctx.cover_mul(prod, ctx.cover_mul(gt[..., e, :], gt[..., graph.alpha[e], :]))
    return ctx.deck_of(prod)


# -- gauge transformations ------------------------------------------------------


@dataclass(frozen=True, eq=False)
class GaugeTransform:
    """Vertex labels in the cover and dart labels in the deck group."""

    vertex_part: np.ndarray
    center_part: np.ndarray

    def validate(self, ctx: GroupContext, graph: fg.FatGraph) -> None:
        if self.vertex_part.shape[-2:] != (graph.vertex_count, ctx.dim):
            raise ValueError("vertex part has the wrong shape")
        if self.center_part.shape[-2:] != (graph.dart_count, ctx.center_dim):
            raise ValueError("centre part has the wrong shape")
        for cyc in graph.faces:
            prod = ctx.center_identity()
            for e in cyc:
                prod = ctx.center_mul(prod, self.center_part[..., e, :])
            if np.any(prod != ctx.center_identity()):
                raise ValueError("centre labels around a face must multiply to one")


def identity_gauge(ctx: GroupContext, graph: fg.FatGraph) -> GaugeTransform:
    return GaugeTransform(ctx.cover_identity(graph.vertex_count), ctx.center_identity(graph.dart_count))


def random_gauge(ctx: GroupContext, graph: fg.FatGraph, rng, spread: int = 2) -> GaugeTransform:
    """Random element of the discrete gauge group.

    Vertex labels are lifts of Haar elements (shifted by random deck elements for
    U1); dart labels are random with the last dart of each face fixing the product.
    """
    rng = make_rng(rng)
    vert = ctx.lift(haar_sample(ctx, rng, graph.vertex_count))
    if ctx.kind == "U1":
        vert = vert + rng.integers(-spread, spread + 1, size=vert.shape)
        z = rng.integers(-spread, spread + 1, size=(graph.dart_count, ctx.m))
    elif ctx.kind == "SO3":
        vert = vert * rng.choice([-1.0, 1.0], size=(graph.vertex_count, 1))
        z = rng.choice([-1, 1], size=(graph.dart_count, 1))
    else:
        z = np.ones((graph.dart_count, 1), dtype=int)
    for cyc in graph.faces:
        if not cyc:
            continue
        prod = ctx.center_identity()
        for e in cyc[:-1]:
            prod = ctx.center_mul(prod, z[e])
        z[cyc[-1]] = ctx.center_inv(prod)
    return GaugeTransform(vert, z)


def gauge_apply(ctx: GroupContext, graph: fg.FatGraph, j: GaugeTransform, gt):
    """``(j . gt)(e) = j_target(e)^-1 gt(e) j_source(e) z_e``."""
    j.validate(ctx, graph)
    gt = np.asarray(gt, dtype=float)
    tgt = [graph.target(e) for e in range(graph.dart_count)]
    src = [graph.source(e) for e in range(graph.dart_count)]
    jt = j.vertex_part[..., tgt, :]
    js = j.vertex_part[..., src, :]
    out = ctx.cover_mul(ctx.cover_mul(ctx.cover_inv(jt), gt), js)
    return ctx.cover_mul(out, ctx.deck(j.center_part))


def gauge_apply_base(ctx: GroupContext, graph: fg.FatGraph, vertex_values, g):
    """Projected gauge action on a configuration: ``j_target^-1 g(e) j_source``."""
    tgt = [graph.target(e) for e in range(graph.dart_count)]
    src = [graph.source(e) for e in range(graph.dart_count)]
    vertex_values = np.asarray(vertex_values, dtype=float)
    jt = vertex_values[..., tgt, :]
    js = vertex_values[..., src, :]
    return ctx.mul(ctx.mul(ctx.inv(jt), g), js)


def gauge_fix(ctx: GroupContext, graph: fg.FatGraph, g, tree=None, root: int = 0):
    """Gauge-fix along a spanning tree of the graph.

    ``j_v`` is the holonomy along the tree path from ``root`` to ``v``.  Returns
    the transformed configuration (identity on tree darts) and the loop
    coordinates ``{e: h_{lambda_e}(g)}`` for ``e`` in the orientation off the tree.
    """
    if tree is None:
        tree = fg.spanning_tree(graph, root)
    tree = frozenset(tree)
    if not fg.is_spanning_tree(graph, tree):
        raise fg.GraphError("not a spanning tree of the graph")
    g = np.asarray(g, dtype=float)
    batch = g.shape[:-2]
    j = {root: ctx.identity(batch) if batch else ctx.identity()}
    todo = [root]
    while todo:
        u = todo.pop()
        for d in sorted(tree):
            if graph.source(d) == u and graph.target(d) not in j:
                j[graph.target(d)] = ctx.mul(g[..., d, :], j[u])
                todo.append(graph.target(d))
    verts = np.stack([j[v] for v in range(graph.vertex_count)], axis=-2)
    fixed = gauge_apply_base(ctx, graph, verts, g)
    loops = {e: fixed[..., e, :] for e in graph.orientation() if e not in tree}
    return fixed, loops


# -- measures -------------------------------------------------------------------


@dataclass(frozen=True, eq=False)
class MeasureSpec:
    """Parameters of the discrete measure ``P_{T,z}`` on a fat graph."""

    ctx: GroupContext
    graph: fg.FatGraph
    areas: fg.AreaMap
    T: float
    z: np.ndarray = None

    def __post_init__(self):
        if not self.T > 0:
            raise ValueError("temperature must be positive")
        object.__setattr__(self, "z", self.ctx.center(self.z))
        object.__setattr__(self, "areas", fg.AreaMap.for_graph(self.graph, self.areas))

    @property
    def face_times(self) -> np.ndarray:
        return self.T * np.array(self.areas.as_list(self.graph))

    @property
    def total_time(self) -> float:
        return self.T * self.areas.total

    def with_z(self, z) -> "MeasureSpec":
        return MeasureSpec(self.ctx, self.graph, self.areas, self.T, z)


def _gauss(x, t):
    return np.exp(-(x**2) / (2 * t)) / math.sqrt(2 * math.pi * t)


def _u1_lattice_sum(x, times, z, tol):
    """``sum_{k in Z^f, sum k = z} prod_F phi_{t_F}(x_F + k_F)`` for scalar coordinates.

    ``x`` has shape ``(B, f)``, ``z`` shape ``(B,)`` or scalar.  Each ``k_F`` runs
    over a window around the optimum of the constrained quadratic, wide enough
    that the discarded Gaussian mass is negligible against ``tol``.
    """
    x = np.asarray(x, dtype=float)
    B, f = x.shape
    z = np.broadcast_to(np.asarray(z, dtype=float), (B,))
    tM = float(np.sum(times))
    L = max(-math.log(tol * 1e-6), 1.0)
    centre = np.rint(-x + np.outer(z + x.sum(axis=1), times / tM)).astype(np.int64)
    acc = np.ones((B, 1))
    offset = np.zeros(B, dtype=np.int64)
    for F in range(f):
        W = int(math.ceil(math.sqrt(2 * times[F] * L))) + 2
        ks = np.arange(-W, W + 1)
        u = _gauss(x[:, F, None] + centre[:, F, None] + ks, times[F])
        new = np.zeros((B, acc.shape[1] + 2 * W))
        for i in range(2 * W + 1):
            new[:, i:i + acc.shape[1]] += acc * u[:, i, None]
        acc = new
        offset = offset + centre[:, F] - W
    idx = np.rint(z).astype(np.int64) - offset
    ok = (idx >= 0) & (idx < acc.shape[1])
    out = np.zeros(B)
    out[ok] = acc[ok, idx[ok]]
    return out


def density_D_lifted(spec: MeasureSpec, gt):
    """``D_{T,z}`` at ``pi(gt)`` evaluated through the lift ``gt``.

    For a lift with ``gt(e^-1) = gt(e)^-1`` on every edge this is
    ``sum_{prod z_F = z} prod_F p~_{T sigma(F)}(h~_F z_F)``.  A general lift
    shifts the face holonomies by central labels whose product is the
    obstruction ``o(gt)``, so the constraint becomes ``prod z_F = z o(gt)^-1``;
    the value then depends on ``pi(gt)`` only.
    """
    ctx, graph = spec.ctx, spec.graph
    gt = np.asarray(gt, dtype=float)
    batch = gt.shape[:-2]
    times = spec.face_times
    if graph.dart_count == 0:
        val = cover_heat_kernel(ctx, times[0], ctx.deck(spec.z))
        return np.broadcast_to(val, batch).copy() if batch else val
    h = face_holonomies(ctx, graph, gt, cover=True)
    zeff = ctx.center_mul(spec.z, ctx.center_inv(obstruction(ctx, graph, gt)))
    if ctx.kind == "U1":
        flat = h.reshape((-1, graph.face_count, ctx.m))
        zf = zeff.reshape((-1, ctx.m))
        out = np.ones(flat.shape[0])
        for j in range(ctx.m):
            out *= _u1_lattice_sum(flat[:, :, j], times, zf[:, j], ctx.series_tol)
        return out.reshape(batch) if batch else out[0]
    a = np.stack([cover_heat_kernel(ctx, times[F], h[..., F, :]) for F in range(graph.face_count)], axis=-1)
    if ctx.kind == "SU2":
        return np.prod(a, axis=-1)
    b = np.stack([cover_heat_kernel(ctx, times[F], -h[..., F, :]) for F in range(graph.face_count)], axis=-1)
    sign = zeff[..., 0]
    return 0.5 * (np.prod(a + b, axis=-1) + sign * np.prod(a - b, axis=-1))


def density_D(spec: MeasureSpec, g):
    """Density of ``Z_{T,z} P_{T,z}`` w.r.t. Haar measure, at the configuration ``g``."""
    return density_D_lifted(spec, lift_config(spec.ctx, spec.graph, g))


def density_D_bruteforce(spec: MeasureSpec, gt):
    """Direct enumeration of the face labels (finite deck groups only)."""
    ctx, graph = spec.ctx, spec.graph
    elems = ctx.center_elements()
    h = face_holonomies(ctx, graph, gt, cover=True)
    zeff = ctx.center_mul(spec.z, ctx.center_inv(obstruction(ctx, graph, gt)))
    times = spec.face_times
    total = 0.0
    import itertools

    for labels in itertools.product(elems, repeat=graph.face_count):
        prod = ctx.center_identity()
        for w in labels:
            prod = ctx.center_mul(prod, w)
        if np.any(prod != zeff):
            continue
        term = 1.0
        for F, w in enumerate(labels):
            term = term * cover_heat_kernel(ctx, times[F], ctx.cover_mul(h[..., F, :], ctx.deck(w)))
        total = total + term
    return total


def usual_density(spec: MeasureSpec, g):
    """``prod_F p_{T sigma(F)}(h_F(g))``; the bundle class of ``spec`` is ignored."""
    ctx, graph = spec.ctx, spec.graph
    times = spec.face_times
    g = np.asarray(g, dtype=float)
    if graph.dart_count == 0:
        val = heat_kernel(ctx, times[0], ctx.identity())
        return np.broadcast_to(val, g.shape[:-2]).copy() if g.ndim > 2 else val
    h = face_holonomies(ctx, graph, g)
    return np.prod(np.stack([heat_kernel(ctx, times[F], h[..., F, :]) for F in range(graph.face_count)], axis=-1), axis=-1)


# -- partition functions ----------------------------------------------------


@dataclass
class PartitionEstimate:
    value: float
    std_error: float
    method: str
    effort: int
    seeds: list = field(default_factory=list)

    def agrees(self, other: "PartitionEstimate", nsigma: float = 3.0, rtol: float = 1e-8) -> bool:
        err = math.hypot(self.std_error, other.std_error)
        return abs(self.value - other.value) <= nsigma * err + rtol * max(abs(self.value), abs(other.value))

    def to_dict(self) -> dict:
        return {
            "value": self.value,
            "std_error": self.std_error,
            "method": self.method,
            "effort": self.effort,
            "seeds": list(self.seeds),
        }


def _mc_mean(values) -> tuple[float, float]:
    values = np.asarray(values, dtype=float)
    return float(values.mean()), float(values.std(ddof=1) / math.sqrt(values.size))


def _quadrature(spec: MeasureSpec, n: int, chunk: int = 200000) -> float:
    ctx, graph = spec.ctx, spec.graph
    dims = graph.edge_count * ctx.m
    nodes = (np.arange(n) + 0.5) / n
    total = 0.0
    count = n**dims
    for start in range(0, count, chunk):
        idx = np.arange(start, min(count, start + chunk))
        digits = np.stack(np.unravel_index(idx, (n,) * dims), axis=-1) if dims else np.zeros((len(idx), 0), int)
        vals = nodes[digits].reshape(len(idx), graph.edge_count, ctx.m)
        total += float(np.sum(density_D(spec, expand_config(ctx, graph, vals))))
    return total / count


def partition_estimate(spec: MeasureSpec, method: str = "mc", effort: int = 100000, rng=0) -> PartitionEstimate:
    """Estimate ``Z_{T,z} = int D_{T,z} dg``.

    ``quadrature`` (U1 only) uses the periodic midpoint rule with ``effort``
    nodes per coordinate and reports the difference to the half-resolution rule
    as its error bound.  ``mc`` averages ``D`` over ``effort`` Haar samples.
    """
    ctx, graph = spec.ctx, spec.graph
    if graph.edge_count == 0:
        v = float(density_D(spec, np.zeros((0, ctx.dim))))
        return PartitionEstimate(v, 0.0, "direct", 0)
    if method == "quadrature":
        if ctx.kind != "U1":
            raise UnsupportedGroup("quadrature is only available for U1")
        dims = graph.edge_count * ctx.m
        n = int(effort)
        if n**dims > 5_000_000:
            raise ValueError(f"quadrature grid {n}^{dims} is too large")
        fine = _quadrature(spec, n)
        coarse = _quadrature(spec, max(n // 2, 1))
        return PartitionEstimate(fine, abs(fine - coarse), "direct", n)
    if method == "mc":
        seed = rng if isinstance(rng, int) else None
        rng = make_rng(rng)
        vals = []
        left = int(effort)
        while left > 0:
            k = min(left, 50000)
            vals.append(density_D(spec, random_config(ctx, graph, rng, k)))
            left -= k
        v, se = _mc_mean(np.concatenate(vals))
        return PartitionEstimate(v, se, "direct", int(effort), [seed] if seed is not None else [])
    raise ValueError(f"unknown method {method!r}")


def lifted_partition_estimate(spec: MeasureSpec, effort: int = 100000, rng=0) -> PartitionEstimate:
    """``Z~_{T,z}``: integral over the lifted configuration space (finite deck group).

    Sums over the deck labels ``(z_1, ..., z_r)`` with product ``z`` of the
    integral over ``G~^r`` (cover volume ``|Pi|`` per factor) of
    ``prod_F p~(h~_F(g~_1, g~_1^-1 z_1, ...))``.
    """
    import itertools

    ctx, graph = spec.ctx, spec.graph
    if ctx.kind == "U1":
        raise UnsupportedGroup("the lifted normalization is infinite for U1")
    rng = make_rng(rng)
    orient = graph.orientation()
    r = len(orient)
    vol = float(ctx.deck_order)
    times = spec.face_times
    gt_edges = haar_sample(GroupContext("SU2"), rng, (int(effort), r))
    total = np.zeros(int(effort))
    for labels in itertools.product(ctx.center_elements(), repeat=r):
        prod = ctx.center_identity()
        for w in labels:
            prod = ctx.center_mul(prod, w)
        if np.any(prod != spec.z):
            continue
        gt = np.empty((int(effort), graph.dart_count, 4))
        for i, e in enumerate(orient):
            gt[:, e] = gt_edges[:, i]
            gt[:, graph.alpha[e]] = ctx.cover_mul(ctx.cover_inv(gt_edges[:, i]), ctx.deck(labels[i]))
        h = face_holonomies(ctx, graph, gt, cover=True)
        term = np.ones(int(effort))
        for F in range(graph.face_count):
            term *= cover_heat_kernel(ctx, times[F], h[:, F])
        total += term
    v, se = _mc_mean(total * vol**r)
    return PartitionEstimate(v, se, "lifted", int(effort))


# -- sampling -----------------------------------------------------------------------


def incidence_matrix(graph: fg.FatGraph, orientation=None) -> np.ndarray:
    """``B[F, i]``: signed number of times edge ``i`` of the orientation occurs on face ``F``."""
    orientation = graph.orientation() if orientation is None else tuple(orientation)
    pos = {e: i for i, e in enumerate(orientation)}
    B = np.zeros((graph.face_count, len(orientation)))
    for F, cyc in enumerate(graph.faces):
        for d in cyc:
            if d in pos:
                B[F, pos[d]] += 1
            else:
                B[F, pos[graph.alpha[d]]] -= 1
    return B


def u1_face_law_sample(spec: MeasureSpec, rng, n: int):
    """Real face variables ``W ~ N(0, diag(t))`` conditioned on ``sum W = z`` (per coordinate).

    Drawn through the conditional covariance ``diag(t) - t t^T / t_M``; returns
    shape ``(n, f, m)``.
    """
    rng = make_rng(rng)
    t = spec.face_times
    tM = t.sum()
    cov = np.diag(t) - np.outer(t, t) / tM
    lam, vec = np.linalg.eigh(cov)
    root = vec * np.sqrt(np.clip(lam, 0, None))
    xi = rng.standard_normal((n, spec.ctx.m, len(t)))
    W = np.einsum("fk,nmk->nfm", root, xi)
    return W + np.outer(t / tM, spec.z)[None]


def sample_config_exact_u1(spec: MeasureSpec, rng, n: int):
    """Exact sampler for U1: face holonomies from the conditioned Gaussian, then a
    uniform point of the fibre of the face-holonomy map."""
    ctx, graph = spec.ctx, spec.graph
    if ctx.kind != "U1":
        raise UnsupportedGroup("exact sampling is implemented for U1 only")
    rng = make_rng(rng)
    if graph.edge_count == 0:
        return np.zeros((n, 0, ctx.m))
    y = np.mod(u1_face_law_sample(spec, rng, n), 1.0)
    B = incidence_matrix(graph)
    g0 = rng.random((n, graph.edge_count, ctx.m))
    r = y - np.einsum("fa,nam->nfm", B, g0)
    r = np.mod(r + 0.5, 1.0) - 0.5
    r[:, -1, :] = -r[:, :-1, :].sum(axis=1)
    pinv = np.linalg.pinv(B)
    delta = np.einsum("af,nfm->nam", pinv, r)
    return expand_config(ctx, graph, np.mod(g0 + delta, 1.0))


def sample_config_mh(
    spec: MeasureSpec,
    rng,
    n_samples: int,
    burn_in: int = 200,
    thin: int = 2,
    n_chains: int = 64,
    step: float | None = 0.1,
):
    """Metropolis-Hastings targeting ``D_{T,z} / Z_{T,z}`` w.r.t. Haar measure.

    One sweep updates every edge in turn by right multiplication with a
    symmetric increment: a heat-kernel step of time ``step`` or, when ``step``
    is None, an independent Haar element.  Returns ``(samples, acceptance)``.
    """
    ctx, graph = spec.ctx, spec.graph
    rng = make_rng(rng)
    a = graph.edge_count
    if a == 0:
        return np.zeros((n_samples, 0, ctx.dim)), 1.0
    state = haar_sample(ctx, rng, (n_chains, a))
    dens = density_D(spec, expand_config(ctx, graph, state))
    out = []
    sweeps = 0
    accepted = 0
    proposed = 0
    need = n_samples
    while need > 0:
        for i in range(a):
            if step is None:
                prop_i = haar_sample(ctx, rng, n_chains)
            else:
                prop_i = ctx.mul(state[:, i], ctx.project(cover_heat_sample(ctx, step, rng, n_chains)))
            cand = state.copy()
            cand[:, i] = prop_i
            cd = density_D(spec, expand_config(ctx, graph, cand))
            with np.errstate(divide="ignore", invalid="ignore"):
                ratio = np.where(dens > 0, cd / dens, 1.0)
            ok = rng.random(n_chains) < ratio
            state[ok] = cand[ok]
            dens[ok] = cd[ok]
            accepted += int(ok.sum())
            proposed += n_chains
        sweeps += 1
        if sweeps > burn_in and (sweeps - burn_in) % thin == 0:
            out.append(state.copy())
            need -= n_chains
    samples = np.concatenate(out)[:n_samples]
    return expand_config(ctx, graph, samples), accepted / proposed


def sample_config(spec: MeasureSpec, rng, n_samples: int = 1, method: str = "auto", **chain_params):
    """Sample configurations from ``P_{T,z}``; exact for U1 unless ``method='mh'``."""
    if method == "auto":
        method = "exact" if spec.ctx.kind == "U1" else "mh"
    if method == "exact":
        return sample_config_exact_u1(spec, rng, n_samples)
    if method == "mh":
        return sample_config_mh(spec, rng, n_samples, **chain_params)[0]
    raise ValueError(f"unknown sampling method {method!r}")


# -- refinement ---------------------------------------------------------------


def refinement_words(graph: fg.FatGraph, op: str, location) -> list[list[int]]:
    """For each dart of ``graph``, the word in the refined graph that replaces it."""
    words = [[d] for d in range(graph.dart_count)]
    n = graph.dart_count
    if op == "V":
        e = int(location)
        words[e] = [n, e]
        words[graph.alpha[e]] = [n + 1, graph.alpha[e]]
    elif op not in ("E1", "E2"):
        raise fg.GraphError(f"unknown subdivision op {op!r}")
    return words


def restrict_config(ctx: GroupContext, words, g2):
    """Configuration on the coarse graph induced by one on the refined graph."""
    return np.stack([word_product(ctx, g2, w) for w in words], axis=-2)


def pushforward_check(
    ctx: GroupContext,
    graph: fg.FatGraph,
    areas: fg.AreaMap,
    log: Sequence[tuple],
    T: float = 1.0,
    z=None,
    effort: int = 100000,
    rng=0,
    probes: int = 5,
    nodes: int = 400,
) -> dict:
    """Check that each logged refinement step pushes ``P_{T,z}`` forward correctly.

    V and E1 steps: ``D`` of the refined graph equals ``D`` of the coarse graph at
    the restricted configuration, pointwise.  E2 steps: for U1, integrating ``D``
    of the refined graph over the new edge reproduces ``D`` of the coarse graph
    (periodic midpoint rule with ``nodes`` nodes per coordinate); otherwise a
    Wilson-loop expectation is compared between the two graphs by MC.
    """
    rng = make_rng(rng)
    steps = []
    ok_all = True
    for op, location in log:
        g2, a2 = fg.elementary_subdivide(graph, areas, op, location)
        s1 = MeasureSpec(ctx, graph, areas, T, z)
        s2 = MeasureSpec(ctx, g2, a2, T, z)
        words = refinement_words(graph, op, location)
        step = {"op": op, "location": _jsonable(location)}
        if op in ("V", "E1"):
            x2 = random_config(ctx, g2, rng, probes)
            d2 = density_D(s2, x2)
            d1 = density_D(s1, restrict_config(ctx, words, x2))
            err = float(np.max(np.abs(d2 - d1) / np.abs(d1)))
            step.update(method="pointwise", max_rel_error=err, passed=err <= 1e-10)
        elif ctx.kind == "U1":
            n = graph.dart_count
            x1 = random_config(ctx, graph, rng, probes)
            d1 = density_D(s1, x1)
            grids = np.meshgrid(*([(np.arange(nodes) + 0.5) / nodes] * ctx.m), indexing="ij")
            pts = np.stack([gg.ravel() for gg in grids], axis=-1)
            errs = []
            for p in range(probes):
                cfg = np.empty((len(pts), n + 2, ctx.m))
                cfg[:, :n] = x1[p]
                cfg[:, n] = pts
                cfg[:, n + 1] = ctx.inv(pts)
                integral = float(np.mean(density_D(s2, cfg)))
                errs.append(abs(integral - d1[p]) / abs(d1[p]))
            err = max(errs)
            step.update(method="quadrature", max_rel_error=err, passed=err <= 1e-8)
        else:
            loop = graph.faces[0]
            w1 = _wilson_estimate(s1, loop, lambda g: g, effort, rng)
            w2 = _wilson_estimate(s2, loop, lambda g: g, effort, rng)
            diff = abs(w1[0] - w2[0])
            se = math.hypot(w1[1], w2[1])
            step.update(
                method="wilson_mc",
                coarse=w1[0],
                coarse_se=w1[1],
                refined=w2[0],
                refined_se=w2[1],
                passed=diff <= 3 * se,
            )
        ok_all = ok_all and step["passed"]
        steps.append(step)
        graph, areas = g2, a2
    return {"passed": ok_all, "steps": steps}


def _jsonable(x):
    if isinstance(x, (tuple, list)):
        return [_jsonable(v) for v in x]
    if isinstance(x, (np.integer,)):
        return int(x)
    if isinstance(x, (np.floating,)):
        return float(x)
    return x


def wilson_character(ctx: GroupContext, x):
    """Character of the defining representation: 1 + 2 cos(angle) on SO3, trace on SU2, cos on U1."""
    x = np.asarray(x, dtype=float)
    if ctx.kind == "U1":
        return np.cos(2 * math.pi * x[..., 0])
    if ctx.kind == "SO3":
        return 1 + 2 * np.cos(ctx.class_angle(x))
    return 2 * x[..., 0]


def _wilson_estimate(spec: MeasureSpec, loop, restrict, effort, rng):
    """Ratio estimate of ``E_{P_{T,z}}[chi(h_loop)]`` from Haar samples, with delta-method error."""
    ctx, graph = spec.ctx, spec.graph
    g = random_config(ctx, graph, rng, int(effort))
    d = density_D(spec, g)
    w = wilson_character(ctx, word_product(ctx, restrict(g), loop))
    num, den = d * w, d
    mn, md = num.mean(), den.mean()
    r = mn / md
    resid = (num - r * den) / md
    return float(r), float(resid.std(ddof=1) / math.sqrt(len(d)))
