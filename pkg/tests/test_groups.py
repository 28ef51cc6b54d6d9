import math

import numpy as np
import pytest
from hypothesis import given
from hypothesis import strategies as st
from scipy import stats
from scipy.integrate import quad

from ymlattice.groups import (
    GroupContext,
    UnsupportedGroup,
    bridge_sample,
    circle_kernel,
    commutator_lift,
    cover_heat_kernel,
    haar_sample,
    heat_kernel,
    projection_sum_check,
    qangle,
    qconj,
    qmul,
    quat_from_axis_angle,
    singular_set_member,
    su2_kernel_images,
    su2_kernel_series,
    weyl_angle_density,
)

U1 = GroupContext.U1()
SU2 = GroupContext.SU2()
SO3 = GroupContext.SO3()


def quat(theta, axis=(1.0, 0.0, 0.0)):
    return quat_from_axis_angle(np.array(axis), theta)


# frozen from 30-digit mpmath evaluations of the theta and character series
FROZEN = [
    (U1, 0.1, np.array([0.0]), 1.27856699941568444547585868736),
    (SO3, 1.0, np.array([1.0, 0, 0, 0]), 1.00000009145855843445876396169),
    (SO3, 0.3, np.array([math.cos(math.pi / 3), math.sin(math.pi / 3), 0, 0]), 0.999999679923622287615659787193),
    (SU2, 0.4, np.array([math.cos(0.7), 0, math.sin(0.7), 0]), 1.03826457060602026146497830473),
]


@pytest.mark.parametrize("ctx,t,x,expected", FROZEN)
def test_heat_kernel_frozen(ctx, t, x, expected):
    assert heat_kernel(ctx, t, x) == pytest.approx(expected, rel=1e-12)


def test_cover_kernel_frozen_so3():
    x = np.array([math.cos(0.7), 0, math.sin(0.7), 0])
    assert cover_heat_kernel(SO3, 0.4, x) == pytest.approx(0.598026979639605808146127195909, rel=1e-12)


def test_u1_long_time_uniform():
    assert heat_kernel(U1, 10.0, np.array([0.37])) == pytest.approx(1.0, abs=1e-8)


def test_u1_cover_is_gaussian():
    assert cover_heat_kernel(U1, 1.0, np.array([0.0])) == pytest.approx((2 * math.pi) ** -0.5, rel=1e-14)
    x = np.array([0.3, -1.2])
    expected = stats.multivariate_normal(np.zeros(2), 0.7 * np.eye(2)).pdf(x)
    assert cover_heat_kernel(GroupContext.U1(2), 0.7, x) == pytest.approx(expected, rel=1e-12)


def test_su2_cover_equals_base(rng):
    x = haar_sample(SU2, rng, 5)
    np.testing.assert_allclose(cover_heat_kernel(SU2, 0.6, x), heat_kernel(SU2, 0.6, x), rtol=1e-14)


def test_so3_cover_not_sign_invariant():
    x = quat(0.4)
    assert cover_heat_kernel(SO3, 0.5, x) != pytest.approx(cover_heat_kernel(SO3, 0.5, -x), rel=1e-3)


def test_nonpositive_time_rejected():
    with pytest.raises(ValueError):
        heat_kernel(SO3, 0.0, quat(0.1))
    with pytest.raises(ValueError):
        cover_heat_kernel(U1, -1.0, np.array([0.0]))


@pytest.mark.parametrize("s", [0.2, 0.5, 1.0, 3.0])
def test_image_form_matches_series(s):
    th = np.linspace(0.01, math.pi - 0.01, 60)
    np.testing.assert_allclose(su2_kernel_images(th, s), su2_kernel_series(th, s), rtol=1e-11)


@given(st.floats(0.02, 3.0), st.floats(-3.0, 3.0))
def test_projection_identity_u1(t, x):
    lhs, rhs = projection_sum_check(U1, t, np.array([x]))
    assert abs(lhs - rhs) <= 1e-8 * rhs


@given(st.floats(0.02, 3.0), st.floats(0.0, math.pi), st.integers(0, 2))
def test_projection_identity_so3(t, theta, axis):
    ax = np.eye(3)[axis]
    lhs, rhs = projection_sum_check(SO3, t, quat(theta, ax))
    assert abs(lhs - rhs) <= 1e-8 * abs(rhs)


def test_projection_identity_named_examples():
    lhs, rhs = projection_sum_check(U1, 0.5, np.array([0.2]))
    assert lhs == pytest.approx(rhs, rel=1e-12)
    lhs, rhs = projection_sum_check(SO3, 1.0, np.array([1.0, 0, 0, 0]))
    assert lhs == pytest.approx(rhs, rel=1e-12)
    lhs, rhs = projection_sum_check(SU2, 0.7, quat(1.1))
    assert lhs == rhs


@given(st.floats(0.05, 2.0), st.floats(0.0, math.pi))
def test_class_function(t, theta):
    rng = np.random.default_rng(int(1000 * t))
    y = haar_sample(SU2, rng)
    x = quat(theta, (0.0, 0.6, 0.8))
    conj = qmul(qmul(y, x), qconj(y))
    assert heat_kernel(SU2, t, conj) == pytest.approx(heat_kernel(SU2, t, x), rel=1e-10)


@pytest.mark.parametrize("ctx", [U1, SU2, SO3], ids=["U1", "SU2", "SO3"])
def test_unit_mass(ctx):
    for t in (0.05, 0.4, 2.0):
        if ctx.kind == "U1":
            mass = quad(lambda u: float(circle_kernel(np.array(u), t)), -0.5, 0.5, limit=200)[0]
        else:
            mass = quad(lambda th: float(heat_kernel(ctx, t, quat(th))) * weyl_angle_density(th), 0, math.pi, limit=200)[0]
        assert mass == pytest.approx(1.0, abs=1e-9)


def test_kernel_positive():
    th = np.linspace(0, math.pi, 101)
    for t in (0.02, 0.3, 3.0):
        assert np.all(heat_kernel(SO3, t, np.stack([np.cos(th), np.sin(th), 0 * th, 0 * th], -1)) > 0)


def test_haar_u1_character_mean(rng):
    x = haar_sample(U1, rng, 100000)[:, 0]
    assert abs(np.mean(np.exp(2j * math.pi * x))) < 3 / math.sqrt(100000) * 1.5


def test_haar_su2_trace_mean(rng):
    q = haar_sample(SU2, rng, 100000)
    assert abs(q[:, 0].mean()) < 3 * math.sqrt(0.25 / 100000)


def test_haar_so3_weyl_density(rng):
    ang = SO3.class_angle(haar_sample(SO3, rng, 50000))
    # rotation-angle density on SO(3) is (1 - cos a) / pi
    cdf = lambda a: (a - np.sin(a)) / math.pi
    assert stats.kstest(ang, cdf).pvalue > 0.01


def test_so3_canonical_representative(rng):
    q = haar_sample(SO3, rng, 1000)
    first = np.where(np.abs(q[:, 0]) > 1e-12, q[:, 0], q[:, 1])
    assert np.all(first > 0)
    np.testing.assert_allclose(np.linalg.norm(q, axis=1), 1.0, atol=1e-12)


def test_commutator_lift_examples(rng):
    a, b = haar_sample(U1, rng, 2)
    np.testing.assert_array_equal(commutator_lift(U1, a, b), np.zeros(1))
    a = haar_sample(SO3, rng)
    np.testing.assert_allclose(commutator_lift(SO3, a, a), [1, 0, 0, 0], atol=1e-12)


def test_commutator_lift_sign_independent(rng):
    a, b = haar_sample(SO3, rng, 2)
    ref = commutator_lift(SO3, a, b)
    for sa in (1, -1):
        for sb in (1, -1):
            np.testing.assert_allclose(commutator_lift(SO3, sa * a, sb * b), ref, atol=1e-14)


def test_group_law_u1m():
    ctx = GroupContext.U1(2)
    x = np.array([0.3, 0.9])
    np.testing.assert_allclose(ctx.mul(x, ctx.inv(x)), [0, 0], atol=1e-15)
    xt = np.array([2.3, -0.1])
    np.testing.assert_allclose(ctx.project(ctx.cover_mul(xt, ctx.deck([3, -4]))), ctx.project(xt), atol=1e-12)


def test_deck_is_central(rng):
    xt = haar_sample(SU2, rng)
    d = SO3.deck(np.array([-1]))
    np.testing.assert_allclose(qmul(xt, d), qmul(d, xt), atol=1e-15)
    np.testing.assert_allclose(SO3.project(qmul(xt, d)), SO3.project(xt), atol=1e-15)


def test_center_validation():
    with pytest.raises(ValueError):
        SO3.center(2)
    with pytest.raises(ValueError):
        GroupContext.U1(2).center([1])
    with pytest.raises(UnsupportedGroup):
        GroupContext("SU3")


def test_bridge_u1_mean_and_variance(rng):
    n = 4000
    end = np.array([3.0])
    paths = bridge_sample(U1, 1.0, [0.0, 0.5, 1.0], np.broadcast_to(end, (n, 1)), rng)
    mid = paths[:, 1, 0]
    assert abs(mid.mean() - 1.5) < 3 * math.sqrt(0.25 / n)
    np.testing.assert_allclose(paths[:, -1, 0], 3.0)
    paths = bridge_sample(U1, 1.0, [0.0, 0.3, 1.0], np.zeros((n, 1)), rng)
    var = paths[:, 1, 0].var()
    # sample variance has sd ~ var * sqrt(2/n)
    assert abs(var - 0.3 * 0.7) < 3 * 0.21 * math.sqrt(2 / n)


def test_bridge_su2_midpoint_density(rng):
    """Midpoint class angle vs the two-kernel density ratio, integrated over the sphere."""
    T, tm = 0.8, 0.35
    y = quat(1.2)
    n = 3000
    paths = bridge_sample(SO3, T, [0.0, tm, T], np.broadcast_to(y, (n, 4)), rng)
    np.testing.assert_allclose(paths[:, -1], np.broadcast_to(y, (n, 4)), atol=1e-12)
    ang = qangle(paths[:, 1])
    # oracle: density of the class angle of x under p~_tm(x) p~_{T-tm}(x^-1 y) / p~_T(y)
    m = 200000
    xs = haar_sample(SU2, np.random.default_rng(7), m)
    w = cover_heat_kernel(SO3, tm, xs) * cover_heat_kernel(SO3, T - tm, qmul(qconj(xs), y))
    w /= w.sum()
    ref_ang = qangle(xs)
    order = np.argsort(ref_ang)
    cdf_x, cdf_y = ref_ang[order], np.cumsum(w[order])
    p = stats.kstest(ang, lambda a: np.interp(a, cdf_x, cdf_y)).pvalue
    assert p > 0.01


def test_singular_set():
    # quat(theta) is a rotation by 2 theta
    assert singular_set_member(SO3, quat(math.pi / 2, (0.0, 0.6, 0.8)))
    assert not singular_set_member(SO3, np.array([1.0, 0, 0, 0]))
    assert not singular_set_member(SO3, quat(math.pi / 4))
    with pytest.raises(UnsupportedGroup):
        singular_set_member(U1, np.array([0.5]))
