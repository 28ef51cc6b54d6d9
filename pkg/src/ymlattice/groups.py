"""Compact groups, their universal covers and heat kernels.

Three structure groups are supported:

``U1`` (with ``m`` factors)
    G = (R/Z)^m with circumference-1 circles, cover R^m, deck group Z^m.
    Elements are float arrays of shape ``(..., m)``; centre elements are int
    arrays of shape ``(..., m)``.
``SU2``
    Simply connected, G equals its cover, trivial deck group.
``SO3``
    G = SO(3) as unit quaternions modulo sign, cover SU(2), deck group {+1, -1}.

Quaternions are float arrays of shape ``(..., 4)`` in ``(w, x, y, z)`` order.
For the two quaternion groups a centre element is an int array of shape
``(..., 1)`` holding the sign.

Heat kernels solve ``(1/2) Laplacian - d/dt`` and are densities with respect to
the Riemannian volume.  G carries its unit-volume bi-invariant metric and the
cover the pulled-back one, so the cover has volume ``|Pi|``.  On SU(2) a metric
is a round 3-sphere of radius ``R`` and the Laplacian acts on the n-dimensional
irreducible block by ``-(n^2 - 1) / R^2``; ``casimir_scale`` is ``1 / R^2``:

* SO3 context: ``vol SU(2) = 2``, ``R^3 = 1 / pi^2``, casimir_scale = ``pi^(4/3)``.
* SU2 context: ``vol SU(2) = 1``, ``R^3 = 1 / (2 pi^2)``, casimir_scale = ``(2 pi^2)^(2/3)``.
* U1: the Laplacian eigenvalue of ``exp(2 pi i k x)`` is ``4 pi^2 k^2``; the
  recorded casimir_scale is ``4 pi^2``.
"""
from __future__ import annotations

import logging
import math
from dataclasses import dataclass
from functools import lru_cache

import numpy as np

log = logging.getLogger(__name__)

KINDS = ("U1", "SU2", "SO3")

# below this value of casimir_scale * t / 2 the SU(2) kernel is summed over images
_IMAGE_SWITCH = 1.0
# below this time the circle kernel is summed over images
_U1_SWITCH = 0.5


class UnsupportedGroup(ValueError):
    pass


# -- quaternion helpers --------------------------------------------------


def qmul(a, b):
    a = np.asarray(a, dtype=float)
    b = np.asarray(b, dtype=float)
    aw, ax, ay, az = np.moveaxis(a, -1, 0)
    bw, bx, by, bz = np.moveaxis(b, -1, 0)
    return np.stack(
        [
            aw * bw - ax * bx - ay * by - az * bz,
            aw * bx + ax * bw + ay * bz - az * by,
            aw * by - ax * bz + ay * bw + az * bx,
            aw * bz + ax * by - ay * bx + az * bw,
        ],
        axis=-1,
    )


def qconj(q):
    q = np.asarray(q, dtype=float)
    return q * np.array([1.0, -1.0, -1.0, -1.0])


def qcanon(q, eps: float = 1e-12):
    """Representative of ``{q, -q}`` whose first non-negligible coordinate is positive."""
    q = np.asarray(q, dtype=float)
    big = np.abs(q) > eps
    first = np.argmax(big, axis=-1)
    lead = np.take_along_axis(q, first[..., None], axis=-1)
    sign = np.where(lead < 0, -1.0, 1.0)
    return q * sign


def qangle(q):
    """Class angle ``theta`` in [0, pi] of an SU(2) element (eigenvalues exp(+-i theta))."""
    q = np.asarray(q, dtype=float)
    return np.arctan2(np.linalg.norm(q[..., 1:], axis=-1), q[..., 0])


def quat_from_axis_angle(axis, theta):
    """SU(2) element with class angle ``theta`` about ``axis`` (a rotation by ``2 theta``)."""
    axis = np.asarray(axis, dtype=float)
    axis = axis / np.linalg.norm(axis, axis=-1, keepdims=True)
    theta = np.asarray(theta, dtype=float)
    return np.concatenate([np.cos(theta)[..., None], np.sin(theta)[..., None] * axis], axis=-1)


def random_unit_vectors(rng, size, dim: int = 3):
    v = rng.standard_normal(tuple(np.atleast_1d(size)) + (dim,) if size is not None else (dim,))
    return v / np.linalg.norm(v, axis=-1, keepdims=True)


# -- the group context ---------------------------------------------------


@dataclass(frozen=True)
class GroupContext:
    """A structure group together with its universal cover and deck group."""

    kind: str
    m: int = 1
    series_tol: float = 1e-10
    casimir_scale: float | None = None

    def __post_init__(self):
        if self.kind not in KINDS:
            raise UnsupportedGroup(f"unsupported group kind {self.kind!r}")
        if self.kind != "U1":
            object.__setattr__(self, "m", 1)
        if not (isinstance(self.m, int) and self.m >= 1):
            raise ValueError("m must be a positive integer")
        if not self.series_tol > 0:
            raise ValueError("series_tol must be positive")
        if self.casimir_scale is None:
            c = {"U1": 4 * math.pi**2, "SU2": (2 * math.pi**2) ** (2 / 3), "SO3": math.pi ** (4 / 3)}[self.kind]
            object.__setattr__(self, "casimir_scale", c)
        elif not self.casimir_scale > 0:
            raise ValueError("casimir_scale must be positive")

    @classmethod
    def U1(cls, m: int = 1, **kw) -> "GroupContext":
        return cls("U1", m, **kw)

    @classmethod
    def SU2(cls, **kw) -> "GroupContext":
        return cls("SU2", **kw)

    @classmethod
    def SO3(cls, **kw) -> "GroupContext":
        return cls("SO3", **kw)

    # -- shapes and basic elements --

    @property
    def abelian(self) -> bool:
        return self.kind == "U1"

    @property
    def dim(self) -> int:
        """Length of the trailing axis for group and cover elements."""
        return self.m if self.kind == "U1" else 4

    @property
    def center_dim(self) -> int:
        return self.m if self.kind == "U1" else 1

    @property
    def deck_order(self) -> float:
        """|Pi|: infinite for U1, 1 for SU2, 2 for SO3."""
        return {"U1": math.inf, "SU2": 1, "SO3": 2}[self.kind]

    def identity(self, shape=()):
        shape = tuple(np.atleast_1d(shape)) if shape != () else ()
        if self.kind == "U1":
            return np.zeros(shape + (self.m,))
        out = np.zeros(shape + (4,))
        out[..., 0] = 1.0
        return out

    cover_identity = identity

    def center(self, z=None):
        """Normalize a user-supplied centre element (int, sign or int vector)."""
        if z is None:
            return np.zeros(self.center_dim, dtype=int) if self.kind == "U1" else np.ones(1, dtype=int)
        arr = np.array(z, dtype=float)
        if arr.ndim == 0:
            arr = arr.reshape(1)
        if arr.shape[-1] != self.center_dim:
            raise ValueError(f"centre element for {self.kind} needs {self.center_dim} component(s)")
        if np.any(arr != np.round(arr)):
            raise ValueError("centre elements are integral")
        arr = arr.astype(int)
        if self.kind == "SO3" and np.any(np.abs(arr) != 1):
            raise ValueError("SO3 centre elements are +1 or -1")
        if self.kind == "SU2" and np.any(arr != 1):
            raise ValueError("SU2 has a trivial deck group")
        return arr

    def center_identity(self, shape=()):
        shape = tuple(np.atleast_1d(shape)) if shape != () else ()
        if self.kind == "U1":
            return np.zeros(shape + (self.m,), dtype=int)
        return np.ones(shape + (1,), dtype=int)

    def center_mul(self, a, b):
        return np.add(a, b) if self.kind == "U1" else np.multiply(a, b)

    def center_inv(self, a):
        return -np.asarray(a) if self.kind == "U1" else np.asarray(a)

    def center_elements(self):
        """All elements of a finite deck group."""
        if self.kind == "SO3":
            return [np.array([1]), np.array([-1])]
        if self.kind == "SU2":
            return [np.array([1])]
        raise UnsupportedGroup("the deck group of U1 is infinite")

    def deck(self, z):
        """Embed a centre element into the cover."""
        z = np.asarray(z)
        if self.kind == "U1":
            return z.astype(float)
        return np.asarray(z[..., :1], dtype=float) * self.identity(z.shape[:-1])

    def deck_of(self, xt, tol: float = 1e-6):
        """Inverse of ``deck`` on (near-)central cover elements; raises otherwise."""
        xt = np.asarray(xt, dtype=float)
        if self.kind == "U1":
            z = np.round(xt)
            if np.any(np.abs(xt - z) > tol):
                raise ValueError("cover element is not in the deck group")
            return z.astype(int)
        if np.any(np.linalg.norm(xt[..., 1:], axis=-1) > tol) or np.any(np.abs(np.abs(xt[..., 0]) - 1) > tol):
            raise ValueError("cover element is not central")
        return np.where(xt[..., :1] > 0, 1, -1).astype(int)

    # -- group laws --

    def mul(self, a, b):
        if self.kind == "U1":
            return np.mod(np.add(a, b), 1.0)
        p = qmul(a, b)
        return qcanon(p) if self.kind == "SO3" else p

    def inv(self, a):
        if self.kind == "U1":
            return np.mod(-np.asarray(a, dtype=float), 1.0)
        p = qconj(a)
        return qcanon(p) if self.kind == "SO3" else p

    def cover_mul(self, a, b):
        return np.add(a, b) if self.kind == "U1" else qmul(a, b)

    def cover_inv(self, a):
        return -np.asarray(a, dtype=float) if self.kind == "U1" else qconj(a)

    def project(self, xt):
        xt = np.asarray(xt, dtype=float)
        if self.kind == "U1":
            return np.mod(xt, 1.0)
        return qcanon(xt) if self.kind == "SO3" else xt

    def lift(self, x):
        """Principal lift: U1 coordinates in [-1/2, 1/2), quaternions as stored."""
        x = np.asarray(x, dtype=float)
        if self.kind == "U1":
            return np.mod(x + 0.5, 1.0) - 0.5
        return x.copy()

    # -- conjugacy classes --

    def class_angle(self, x):
        """Class invariant of a G element.

        SO3: rotation angle in [0, pi]; SU2: class angle in [0, pi]; U1: the element.
        """
        x = np.asarray(x, dtype=float)
        if self.kind == "U1":
            return x
        th = qangle(x)
        if self.kind == "SO3":
            return 2 * np.minimum(th, math.pi - th)
        return th

    def cover_class_angle(self, xt):
        xt = np.asarray(xt, dtype=float)
        return xt if self.kind == "U1" else qangle(xt)

    def class_distance(self, x, y):
        """Distance between the class invariants of two G elements."""
        a, b = self.class_angle(x), self.class_angle(y)
        if self.kind == "U1":
            d = np.mod(a - b + 0.5, 1.0) - 0.5
            return np.max(np.abs(d), axis=-1)
        return np.abs(a - b)

    def cover_class_distance(self, xt, yt):
        a, b = self.cover_class_angle(xt), self.cover_class_angle(yt)
        if self.kind == "U1":
            return np.max(np.abs(a - b), axis=-1)
        return np.abs(a - b)


# -- heat kernels ----------------------------------------------------------


def _check_time(t):
    if not np.all(np.asarray(t) > 0):
        raise ValueError("heat kernel time must be positive")


def _n_images(s: float, tol: float) -> int:
    # terms beyond K are below exp(-(pi K)^2 / s) relative
    return 2 + int(math.ceil(math.sqrt(max(s, 1e-300) * max(-math.log(tol * 1e-6), 1.0)) / math.pi))


def su2_kernel_images(theta, s, tol: float = 1e-14):
    """``sum_n n sin(n theta)/sin(theta) exp(-s (n^2 - 1))`` via its image sum.

    Accurate to full relative precision for small ``s``; ``theta`` in [0, pi].
    """
    theta = np.clip(np.asarray(theta, dtype=float), 1e-7, math.pi - 1e-7)
    K = _n_images(s, tol)
    acc = np.zeros_like(theta)
    low = theta <= math.pi / 2
    # pairing k with -k (cancellation near theta = 0)
    th = theta[low]
    if th.size:
        part = th * np.exp(-(th**2) / (4 * s)) / np.sin(th)
        for k in range(1, K + 1):
            q = 2 * math.pi * k - th
            eps = np.log1p(2 * th / q) - 2 * math.pi * k * th / s
            part = part + q * np.exp(-(q**2) / (4 * s)) * np.expm1(eps) / np.sin(th)
        acc[low] = part
    # pairing k with -k-1 (cancellation near theta = pi)
    dl = math.pi - theta[~low]
    if dl.size:
        part = np.zeros_like(dl)
        for k in range(0, K + 1):
            mid = math.pi * (2 * k + 1)
            a = mid - dl
            eps = np.log1p(2 * dl / a) - mid * dl / s
            part = part - a * np.exp(-(a**2) / (4 * s)) * np.expm1(eps) / np.sin(dl)
        acc[~low] = part
    return math.exp(s) * math.sqrt(math.pi / s) / (4 * s) * acc


def su2_kernel_series(theta, s, tol: float = 1e-14, odd_only: bool = False):
    """Character series ``sum_n n chi_n(theta) exp(-s (n^2 - 1))``.

    ``chi_n(theta) = U_{n-1}(cos theta)`` is evaluated by the Chebyshev recurrence.
    Truncated once the tail bound ``sum_{n>N} n^2 exp(-s(n^2-1))`` drops below ``tol``.
    """
    theta = np.asarray(theta, dtype=float)
    x = np.cos(theta)
    u_prev = np.zeros_like(x)
    u = np.ones_like(x)
    total = np.zeros_like(x)
    n = 1
    while True:
        w = math.exp(-s * (n * n - 1))
        if not (odd_only and n % 2 == 0):
            total = total + n * u * w
        # crude tail bound: geometric in n once s * n is large
        tail = (n + 1) ** 2 * math.exp(-s * ((n + 1) ** 2 - 1)) / max(1 - math.exp(-s * (2 * n + 3)), 1e-300)
        if tail < tol * 1e-3 and n > 2:
            break
        u_prev, u = u, 2 * x * u - u_prev
        n += 1
        if n > 200000:
            raise RuntimeError("character series failed to converge")
    return total


def su2_kernel(theta, s, tol: float = 1e-14):
    """Heat kernel on SU(2) w.r.t. normalized Haar measure, in terms of ``s = c t / 2``."""
    if s < _IMAGE_SWITCH:
        return su2_kernel_images(theta, s, tol)
    return su2_kernel_series(theta, s, tol)


def _wrapped_gaussian(x, t, tol):
    x = np.mod(np.asarray(x, dtype=float) + 0.5, 1.0) - 0.5
    N = 1 + int(math.ceil(math.sqrt(2 * t * max(-math.log(tol * 1e-6), 1.0))))
    ns = np.arange(-N, N + 1)
    return np.sum(np.exp(-((x[..., None] + ns) ** 2) / (2 * t)), axis=-1) / math.sqrt(2 * math.pi * t)


def _circle_fourier(x, t, tol):
    x = np.asarray(x, dtype=float)
    K = 1 + int(math.ceil(math.sqrt(max(-math.log(tol * 1e-6), 1.0) / (2 * math.pi**2 * t))))
    ks = np.arange(1, K + 1)
    return 1 + 2 * np.sum(np.exp(-2 * math.pi**2 * ks**2 * t) * np.cos(2 * math.pi * ks * x[..., None]), axis=-1)


def circle_kernel(x, t, tol: float = 1e-14):
    """Heat kernel on R/Z (unit circumference) w.r.t. Lebesgue measure."""
    return _wrapped_gaussian(x, t, tol) if t < _U1_SWITCH else _circle_fourier(x, t, tol)


def heat_kernel(ctx: GroupContext, t: float, x):
    """Heat kernel ``p_t(x)`` on G w.r.t. the unit-volume Riemannian measure."""
    _check_time(t)
    tol = ctx.series_tol
    x = np.asarray(x, dtype=float)
    if ctx.kind == "U1":
        return np.prod(circle_kernel(x, t, tol), axis=-1)
    s = ctx.casimir_scale * t / 2
    th = qangle(x)
    if ctx.kind == "SU2":
        return su2_kernel(th, s, tol)
    if s >= _IMAGE_SWITCH:
        return su2_kernel_series(th, s, tol, odd_only=True)
    return 0.5 * (su2_kernel_images(th, s, tol) + su2_kernel_images(math.pi - th, s, tol))


def cover_heat_kernel(ctx: GroupContext, t: float, xt):
    """Heat kernel ``p~_t`` on the cover w.r.t. the pulled-back Riemannian measure."""
    _check_time(t)
    xt = np.asarray(xt, dtype=float)
    if ctx.kind == "U1":
        return np.exp(-np.sum(xt**2, axis=-1) / (2 * t)) / (2 * math.pi * t) ** (ctx.m / 2)
    s = ctx.casimir_scale * t / 2
    val = su2_kernel(qangle(xt), s, ctx.series_tol)
    return val / 2 if ctx.kind == "SO3" else val


def cover_heat_kernel_max(ctx: GroupContext, t: float) -> float:
    """Supremum of ``p~_t``, attained at the identity."""
    return float(cover_heat_kernel(ctx, t, ctx.cover_identity()))


def projection_sum_check(ctx: GroupContext, t: float, xt):
    """Return ``(sum_z p~_t(xt z), p_t(project(xt)))``.

    For U1 the lattice sum runs over a box around ``-round(xt)`` wide enough for
    the Gaussian tail to fall below ``series_tol``.
    """
    _check_time(t)
    xt = np.asarray(xt, dtype=float)
    rhs = heat_kernel(ctx, t, ctx.project(xt))
    if ctx.kind == "U1":
        N = 1 + int(math.ceil(math.sqrt(2 * t * max(-math.log(ctx.series_tol * 1e-6), 1.0))))
        offs = np.arange(-N, N + 1)
        grids = np.meshgrid(*([offs] * ctx.m), indexing="ij")
        zs = np.stack([g.ravel() for g in grids], axis=-1)
        base = -np.round(xt)
        lhs = np.sum(cover_heat_kernel(ctx, t, xt[..., None, :] + base[..., None, :] + zs), axis=-1)
    else:
        lhs = sum(cover_heat_kernel(ctx, t, ctx.cover_mul(xt, ctx.deck(z))) for z in ctx.center_elements())
    return lhs, rhs


# -- sampling --------------------------------------------------------------


def make_rng(seed) -> np.random.Generator:
    if isinstance(seed, np.random.Generator):
        return seed
    return np.random.default_rng(seed)


def haar_sample(ctx: GroupContext, rng, size=None):
    """Haar-distributed elements of G, shape ``size + (dim,)``."""
    rng = make_rng(rng)
    shape = () if size is None else tuple(np.atleast_1d(size))
    if ctx.kind == "U1":
        return rng.random(shape + (ctx.m,))
    q = rng.standard_normal(shape + (4,))
    q /= np.linalg.norm(q, axis=-1, keepdims=True)
    return qcanon(q) if ctx.kind == "SO3" else q


def weyl_angle_density(theta):
    """Density of the SU(2) class angle under normalized Haar measure."""
    return 2 / math.pi * np.sin(theta) ** 2


@lru_cache(maxsize=64)
def _angle_table(s: float, points: int = 8001):
    """Tabulated inverse CDF of the class angle of the SU(2) heat kernel at ``s``."""
    hi = min(math.pi, math.sqrt(4 * s * 60.0) + 1e-9)
    th = np.linspace(0.0, hi, points)
    dens = su2_kernel(th, s) * weyl_angle_density(th)
    cdf = np.concatenate([[0.0], np.cumsum((dens[1:] + dens[:-1]) / 2 * np.diff(th))])
    cdf /= cdf[-1]
    return th, cdf


def cover_heat_sample(ctx: GroupContext, t: float, rng, size=None):
    """Draw from ``p~_t`` on the cover (a Brownian increment of duration ``t``)."""
    _check_time(t)
    rng = make_rng(rng)
    shape = () if size is None else tuple(np.atleast_1d(size))
    if ctx.kind == "U1":
        return rng.standard_normal(shape + (ctx.m,)) * math.sqrt(t)
    th_grid, cdf = _angle_table(float(ctx.casimir_scale * t / 2))
    theta = np.interp(rng.random(shape), cdf, th_grid)
    axis = random_unit_vectors(rng, shape if shape else None)
    return quat_from_axis_angle(axis, theta)


def commutator_lift(ctx: GroupContext, a, b):
    """``[a~, b~] = a~ b~ a~^-1 b~^-1`` for any lifts; independent of the lifts chosen."""
    if ctx.kind == "U1":
        a = np.asarray(a, dtype=float)
        return np.zeros(np.broadcast_shapes(a.shape, np.shape(b)))
    at, bt = ctx.lift(a), ctx.lift(b)
    return qmul(qmul(at, bt), qmul(qconj(at), qconj(bt)))


def bridge_sample(ctx: GroupContext, total_time: float, grid, endpoint, rng):
    """Brownian bridge on the cover from the identity to ``endpoint`` over ``total_time``.

    ``grid`` is an increasing sequence of times in ``[0, total_time]`` starting at
    0.  ``endpoint`` may carry leading batch axes; the result has shape
    ``batch + (len(grid), dim)``.  Points are drawn by sequential conditioning:
    for U1 each step is an exact Gaussian bridge step, for SU(2) a heat-kernel
    increment is proposed and accepted with probability
    ``p~_rem(x^-1 endpoint) / p~_rem(1)`` where ``rem`` is the time left.
    """
    _check_time(total_time)
    rng = make_rng(rng)
    grid = np.asarray(grid, dtype=float)
    if grid.size == 0:
        raise ValueError("empty grid")
    if grid[0] != 0 or np.any(np.diff(grid) < 0) or grid[-1] > total_time * (1 + 1e-12):
        raise ValueError("grid must start at 0, increase, and stay within [0, total_time]")
    y0 = np.asarray(endpoint, dtype=float)
    batch = y0.shape[:-1]
    y = y0.reshape(-1, y0.shape[-1])
    n = y.shape[0]
    x = ctx.cover_identity(n)
    path = [x]
    proposals = 0
    for k in range(1, grid.size):
        dt = grid[k] - grid[k - 1]
        rem = total_time - grid[k]
        if rem <= total_time * 1e-14:
            x = y.copy()
        elif dt <= 0:
            x = x.copy()
        elif ctx.kind == "U1":
            left = rem + dt
            mean = x + dt / left * (y - x)
            x = mean + rng.standard_normal(y.shape) * math.sqrt(dt * rem / left)
        else:
            x, used = _su2_bridge_step(ctx, x, y, dt, rem, rng)
            proposals += used
        path.append(x)
    if proposals:
        log.debug("bridge rejection sampler: %d proposals for %d points", proposals, n * (grid.size - 1))
    return np.stack(path, axis=-2).reshape(batch + (grid.size, y0.shape[-1]))


def _su2_bridge_step(ctx: GroupContext, x, y, dt, rem, rng, max_reps: int = 8192):
    """One exact conditional step of the SU(2) bridge by rejection.

    A path still pending after a round gets twice as many i.i.d. proposals in
    the next one; the first accepted proposal is kept, so each path still
    receives an exact rejection sample.
    """
    x = x.copy()
    top = cover_heat_kernel_max(ctx, rem)
    pending = np.arange(x.shape[0])
    reps = 1
    used = 0
    while pending.size:
        xs = np.repeat(x[pending], reps, axis=0)
        ys = np.repeat(y[pending], reps, axis=0)
        cand = qmul(xs, cover_heat_sample(ctx, dt, rng, size=xs.shape[0]))
        ratio = cover_heat_kernel(ctx, rem, qmul(qconj(cand), ys)) / top
        ok = (rng.random(ratio.shape) < ratio).reshape(pending.size, reps)
        used += ratio.size
        hit = ok.any(axis=1)
        first = ok.argmax(axis=1)
        rows = np.nonzero(hit)[0]
        x[pending[rows]] = cand.reshape(pending.size, reps, -1)[rows, first[rows]]
        pending = pending[~hit]
        reps = min(2 * reps, max_reps)
    return x, used


def singular_set_member(ctx: GroupContext, x, tol: float = 1e-9):
    """Whether ``x`` lies in the singular set S (some nontrivial deck translate is conjugate).

    Only SO3 has a non-trivial test: a rotation is singular iff its angle is pi,
    i.e. the SU(2) lift has spectrum {i, -i}.
    """
    if ctx.kind != "SO3":
        raise UnsupportedGroup(
            "singular-set membership is only meaningful for SO3 "
            "(U1 translations are fixed-point free, SU2 has no deck group)"
        )
    return np.abs(np.asarray(x, dtype=float)[..., 0]) < tol
