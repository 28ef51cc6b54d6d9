"""Abelian Gaussian representation and the bundle-class statistic ``o``."""
from __future__ import annotations

import itertools
import math
from dataclasses import dataclass, field

import numpy as np

from .groups import (
    GroupContext,
    bridge_sample,
    commutator_lift,
    cover_heat_kernel,
    cover_heat_kernel_max,
    haar_sample,
    make_rng,
    qconj,
    qmul,
)

# consecutive projected values must be closer than this for the continuous lift
SO3_STEP_LIMIT = math.pi / 2
U1_STEP_LIMIT = 0.25
# heat time per grid step: SU(2) kernel parameter s <= 0.05 (typical angle ~0.27,
# far below the limit above); U1 increments with sd <= U1_STEP_LIMIT / 6
SU2_TIME_LIMIT_S = 0.05
U1_TIME_LIMIT = (U1_STEP_LIMIT / 6) ** 2


# -- Abelian Gaussian representation -------------------------------------------------


@dataclass(frozen=True, eq=False)
class AbelianSpec:
    m: int
    face_areas: tuple
    T: float
    z: tuple

    def __post_init__(self):
        areas = tuple(float(a) for a in self.face_areas)
        if not areas or any(a <= 0 for a in areas):
            raise ValueError("need at least one face, all areas positive")
        if not self.T > 0:
            raise ValueError("temperature must be positive")
        z = tuple(int(v) for v in np.atleast_1d(self.z))
        if len(z) != self.m:
            raise ValueError("z must have m integer components")
        object.__setattr__(self, "face_areas", areas)
        object.__setattr__(self, "z", z)

    @property
    def n(self) -> int:
        return len(self.face_areas)

    @property
    def sigma(self) -> np.ndarray:
        return np.array(self.face_areas)

    @property
    def sigma_M(self) -> float:
        return float(sum(self.face_areas))

    @property
    def zvec(self) -> np.ndarray:
        return np.array(self.z, dtype=float)


def abelian_face_sampler(spec: AbelianSpec, rng, size: int = 1):
    """Draw ``X_i + (sigma_i / sigma_M) z`` with ``X_i = Y_i - (sigma_i/sigma_M) S``.

    Returns ``(real, projected)`` of shape ``(size, n, m)``; ``projected`` is the
    real value reduced mod 1 (the point ``e(.)`` of the torus).
    """
    rng = make_rng(rng)
    s = spec.sigma
    Y = rng.standard_normal((size, spec.n, spec.m)) * np.sqrt(spec.T * s)[None, :, None]
    S = Y.sum(axis=1, keepdims=True)
    X = Y - (s / spec.sigma_M)[None, :, None] * S
    real = X + np.outer(s / spec.sigma_M, spec.zvec)[None]
    return real, np.mod(real, 1.0)


def _radius(t: float, tail: float = 1e-12) -> int:
    return int(math.ceil(math.sqrt(2 * t * -math.log(tail * 1e-4)))) + 2


def _lattice_points(spec: AbelianSpec, x):
    """Candidate integer vectors ``w_1..w_{n-1}`` (one box per face and coordinate)."""
    n, m = spec.n, spec.m
    boxes = []
    for i in range(n - 1):
        for j in range(m):
            c = int(round(-x[i, j] + spec.sigma[i] / spec.sigma_M * spec.z[j]))
            R = _radius(spec.T * spec.sigma[i])
            boxes.append(np.arange(c - R, c + R + 1))
    grids = np.meshgrid(*boxes, indexing="ij") if boxes else []
    pts = np.stack([g.ravel() for g in grids], axis=-1) if boxes else np.zeros((1, 0))
    return pts.reshape(-1, n - 1, m)


def _full_x(x):
    x = np.asarray(x, dtype=float)
    return np.concatenate([x, -x.sum(axis=0, keepdims=True)], axis=0)


def abelian_DL(spec: AbelianSpec, x):
    """``sum_{z_1..z_{n-1}} exp(-(1/2T) sum_{i<=n} |x_i + z_i|^2 / sigma_i)``, ``z_n = z - sum``."""
    x = np.asarray(x, dtype=float).reshape(spec.n - 1, spec.m)
    xs = _full_x(x)
    w = _lattice_points(spec, x)
    zn = spec.zvec - w.sum(axis=1)
    zz = np.concatenate([w, zn[:, None, :]], axis=1)
    q = np.sum(np.sum((xs[None] + zz) ** 2, axis=2) / spec.sigma[None], axis=1)
    return float(np.sum(np.exp(-q / (2 * spec.T))))


def abelian_DR(spec: AbelianSpec, x):
    """``sum_w exp(-(1/2T) sum_{i<=n} |x_i + w_i - (sigma_i/sigma_M) z|^2 / sigma_i)``, ``w_n = z - sum``."""
    x = np.asarray(x, dtype=float).reshape(spec.n - 1, spec.m)
    xs = _full_x(x)
    w = _lattice_points(spec, x)
    wn = spec.zvec - w.sum(axis=1)
    ww = np.concatenate([w, wn[:, None, :]], axis=1)
    shift = np.outer(spec.sigma / spec.sigma_M, spec.zvec)
    q = np.sum(np.sum((xs[None] + ww - shift[None]) ** 2, axis=2) / spec.sigma[None], axis=1)
    return float(np.sum(np.exp(-q / (2 * spec.T))))


def abelian_norm(spec: AbelianSpec) -> float:
    """``((2 pi T)^(n-1) prod(sigma) / sigma_M)^(-m/2)``."""
    return ((2 * math.pi * spec.T) ** (spec.n - 1) * float(np.prod(spec.sigma)) / spec.sigma_M) ** (-spec.m / 2)


def abelian_density(spec: AbelianSpec, x):
    """Density of ``(x_1..x_{n-1})`` (mod 1) under the face law, w.r.t. Lebesgue measure."""
    return abelian_norm(spec) * abelian_DR(spec, x)


def abelian_identity_check(spec: AbelianSpec, probes, rtol: float = 1e-8) -> dict:
    """Verify ``exp(|z|^2 / (2 T sigma_M)) D_L = D_R`` at each probe ``(n-1, m)`` point."""
    if spec.n < 2:
        raise ValueError("the identity involves at least two faces")
    pref = math.exp(float(spec.zvec @ spec.zvec) / (2 * spec.T * spec.sigma_M))
    rows = []
    worst = 0.0
    for x in probes:
        dl = abelian_DL(spec, x)
        dr = abelian_DR(spec, x)
        err = abs(pref * dl - dr) / abs(dr)
        worst = max(worst, err)
        rows.append({"x": np.asarray(x).tolist(), "lhs": pref * dl, "rhs": dr, "rel_error": err})
    tail = math.exp(-(_radius(spec.T * max(spec.sigma)) - 2) ** 2 / (2 * spec.T * max(spec.sigma)))
    return {"probes": rows, "max_rel_error": worst, "tail_bound": tail, "passed": worst <= rtol}


def abelian_mixture_check(spec: AbelianSpec, probes, zmax: int | None = None, rtol: float = 1e-8) -> dict:
    """Summing the per-class densities with weights ``P(Z=z)`` gives the z-free law.

    The z-free density of the face holonomies is ``prod_i p_{T sigma_i}(x_i) /
    p_{T sigma_M}(0)`` with circle heat kernels.
    """
    from .groups import circle_kernel

    if zmax is None:
        zmax = _radius(spec.T * spec.sigma_M)
    ks = np.arange(-zmax, zmax + 1)
    zs = np.array(list(itertools.product(ks, repeat=spec.m)))
    weights = np.exp(-np.sum(zs**2, axis=1) / (2 * spec.T * spec.sigma_M))
    weights /= weights.sum()
    rows = []
    worst = 0.0
    for x in probes:
        x = np.asarray(x, dtype=float).reshape(spec.n - 1, spec.m)
        mix = sum(
            w * abelian_density(AbelianSpec(spec.m, spec.face_areas, spec.T, tuple(z)), x) for w, z in zip(weights, zs)
        )
        xs = _full_x(x)
        free = np.prod([np.prod(circle_kernel(xs[i], spec.T * spec.sigma[i])) for i in range(spec.n)])
        free /= np.prod(circle_kernel(np.zeros(spec.m), spec.T * spec.sigma_M))
        err = abs(mix - free) / free
        worst = max(worst, err)
        rows.append({"x": x.tolist(), "mixture": mix, "free": free, "rel_error": err})
    return {"probes": rows, "max_rel_error": worst, "passed": worst <= rtol}


# -- loop process and the obstruction statistic ------------------------------------------


@dataclass
class LoopProcessSample:
    ctx: GroupContext
    grid: np.ndarray
    values: np.ndarray
    lifted: np.ndarray
    handles: np.ndarray
    z: np.ndarray
    T: float
    refinements: int = 0


@dataclass
class SectorEstimate:
    o_hat: np.ndarray | None
    confidence: float
    refused: bool = False
    reason: str = ""
    max_step: float = 0.0
    extra: dict = field(default_factory=dict)


def step_sizes(ctx: GroupContext, values):
    """Distance between consecutive projected values (SO3 rotation angle, U1 sup-norm)."""
    a, b = values[:-1], values[1:]
    if ctx.kind == "U1":
        d = np.mod(b - a + 0.5, 1.0) - 0.5
        return np.max(np.abs(d), axis=-1)
    return ctx.class_angle(qmul(qconj(a), b))


def step_limit(ctx: GroupContext) -> float:
    return U1_STEP_LIMIT if ctx.kind == "U1" else SO3_STEP_LIMIT


def time_step_limit(ctx: GroupContext) -> float:
    """Largest heat time ``T * (t_{k+1} - t_k)`` between grid points.

    A coarse grid can hide a large excursion between two close projected
    values, so small projected steps alone do not certify the lift.
    """
    return U1_TIME_LIMIT if ctx.kind == "U1" else 2 * SU2_TIME_LIMIT_S / ctx.casimir_scale


def _too_coarse(ctx: GroupContext, sample) -> np.ndarray:
    return sample.T * np.diff(sample.grid) > time_step_limit(ctx) * (1 + 1e-9)


def sample_handles(ctx: GroupContext, genus: int, t: float, z, rng, size: int):
    """Handle holonomies ``(a_i, b_i)`` from their law under ``P_{T,z}`` on the standard graph.

    Their density w.r.t. Haar is proportional to ``p~_t([a1,b1]...[ag,bg] z)``;
    it is constant for U1.  Drawn by rejection from Haar proposals using the
    maximum of ``p~_t``, attained at the identity.
    """
    rng = make_rng(rng)
    if genus == 0:
        return np.zeros((size, 0, ctx.dim))
    if ctx.abelian:
        return haar_sample(ctx, rng, (size, 2 * genus))
    top = cover_heat_kernel_max(ctx, t)
    out = np.empty((size, 2 * genus, ctx.dim))
    filled = 0
    while filled < size:
        k = max(2 * (size - filled), 64)
        cand = haar_sample(ctx, rng, (k, 2 * genus))
        w = commutator_product(ctx, cand) if genus else None
        dens = cover_heat_kernel(ctx, t, ctx.cover_mul(w, ctx.deck(z)))
        ok = rng.random(k) < dens / top
        take = cand[ok][: size - filled]
        out[filled: filled + len(take)] = take
        filled += len(take)
    return out


def commutator_product(ctx: GroupContext, handles):
    handles = np.asarray(handles, dtype=float)
    genus = handles.shape[-2] // 2
    prod = ctx.cover_identity(handles.shape[:-2]) if handles.ndim > 2 else ctx.cover_identity()
    for i in range(genus):
        prod = ctx.cover_mul(prod, commutator_lift(ctx, handles[..., 2 * i, :], handles[..., 2 * i + 1, :]))
    return prod


def _refine(ctx: GroupContext, sample: LoopProcessSample, rng, max_rounds: int):
    """Insert bridge midpoints on steps that exceed the continuity limit."""
    limit = step_limit(ctx)
    tlimit = time_step_limit(ctx) * (1 + 1e-9)
    grid, path = sample.grid, sample.lifted
    rounds = 0
    while rounds < max_rounds:
        bad = (step_sizes(ctx, ctx.project(path)) >= limit) | (sample.T * np.diff(grid) > tlimit)
        if not np.any(bad):
            break
        rounds += 1
        new_grid = [grid[0]]
        new_path = [path[0]]
        for k in range(len(grid) - 1):
            if bad[k]:
                dt = sample.T * (grid[k + 1] - grid[k])
                rel = ctx.cover_mul(ctx.cover_inv(path[k]), path[k + 1])
                mid = bridge_sample(ctx, dt, [0.0, dt / 2, dt], rel, rng)[1]
                new_grid.append((grid[k] + grid[k + 1]) / 2)
                new_path.append(ctx.cover_mul(path[k], mid))
            new_grid.append(grid[k + 1])
            new_path.append(path[k + 1])
        grid, path = np.array(new_grid), np.array(new_path)
    sample.grid, sample.lifted, sample.values = grid, path, ctx.project(path)
    sample.refinements += rounds
    return sample


def loop_process_sample(
    ctx: GroupContext,
    genus: int,
    T: float,
    total_area: float,
    z,
    grid,
    rng,
    size: int | None = None,
    refine: int = 6,
):
    """Sample the loop process ``X_t = H_{l_t}`` on an area grid.

    Handle holonomies come from their law under ``P_{T,z}``; the lifted loop
    is a Brownian bridge on the cover of length ``T sigma(M)`` from the unit to
    ``[H~_a1, H~_b1] ... [H~_ag, H~_bg] z``.  Steps whose projected size
    reaches the continuity limit, or whose heat time exceeds
    :func:`time_step_limit`, are refined by bridge midpoints, at most
    ``refine`` rounds.
    """
    rng = make_rng(rng)
    zz = ctx.center(z)
    grid = np.asarray(grid, dtype=float)
    if grid[0] != 0 or abs(grid[-1] - total_area) > 1e-12 * total_area or np.any(np.diff(grid) <= 0):
        raise ValueError("grid must increase from 0 to the total area")
    n = 1 if size is None else int(size)
    t = T * total_area
    handles = sample_handles(ctx, genus, t, zz, rng, n)
    endpoint = ctx.cover_mul(commutator_product(ctx, handles), ctx.deck(zz))
    paths = bridge_sample(ctx, t, T * grid, endpoint, rng)
    out = []
    for i in range(n):
        s = LoopProcessSample(ctx, grid.copy(), ctx.project(paths[i]), paths[i], handles[i], zz, T)
        if refine:
            s = _refine(ctx, s, rng, refine)
        out.append(s)
    return out[0] if size is None else out


def continuous_lift(ctx: GroupContext, values):
    """Continuous lift of a discrete path starting at the identity.

    Returns ``(lift, max_step)``; the lift is only meaningful when ``max_step``
    is below :func:`step_limit`.
    """
    values = np.asarray(values, dtype=float)
    steps = step_sizes(ctx, values)
    if ctx.kind == "U1":
        d = np.mod(np.diff(values, axis=0) + 0.5, 1.0) - 0.5
        start = ctx.lift(values[0])
        lift = np.concatenate([start[None], start + np.cumsum(d, axis=0)])
        return lift, float(steps.max(initial=0.0))
    lift = np.empty_like(values)
    cur = values[0] if values[0, 0] > 0 else -values[0]
    lift[0] = cur
    for k in range(1, len(values)):
        q = values[k]
        cur = q if float(np.dot(cur, q)) >= 0 else -q
        lift[k] = cur
    return lift, float(steps.max(initial=0.0))


def extract_obstruction(sample: LoopProcessSample) -> SectorEstimate:
    """``o = X~'_end ([H~_a1, H~_b1] ...)^-1`` from the projected path.

    Refuses when some projected step reaches the continuity limit or some grid
    interval exceeds :func:`time_step_limit`.
    """
    ctx = sample.ctx
    steps = step_sizes(ctx, sample.values)
    limit = step_limit(ctx)
    good = float(np.mean(steps < limit)) if len(steps) else 1.0
    if np.any(steps >= limit):
        return SectorEstimate(None, good, True, "continuity threshold violated", float(steps.max()))
    if np.any(_too_coarse(ctx, sample)):
        return SectorEstimate(None, good, True, "grid too coarse for the heat time", float(steps.max(initial=0.0)))
    if ctx.kind != "U1" and ctx.class_angle(sample.values[0]) > 1e-9:
        return SectorEstimate(None, good, True, "path does not start at the identity", float(steps.max()))
    lift, worst = continuous_lift(ctx, sample.values)
    comm = commutator_product(ctx, sample.handles)
    o = ctx.cover_mul(lift[-1], ctx.cover_inv(comm)) if not ctx.abelian else lift[-1] - comm
    try:
        o_hat = ctx.deck_of(o, tol=1e-6)
    except ValueError:
        return SectorEstimate(None, good, True, "endpoint is not central", worst)
    return SectorEstimate(o_hat, good, False, "", worst)
