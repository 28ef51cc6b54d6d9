import math

import numpy as np
import pytest
from hypothesis import given
from hypothesis import strategies as st
from scipy import stats

from ymlattice import fatgraph as fg
from ymlattice import partition as pt
from ymlattice.config import load_graph_ref
from ymlattice.fatgraph import AreaMap, FatGraph, GraphError
from ymlattice.groups import GroupContext, commutator_lift, cover_heat_kernel, haar_sample, heat_kernel

U1 = GroupContext.U1()
SO3 = GroupContext.SO3()
SU2 = GroupContext.SU2()

# frozen: 25-digit mpmath sums of (1/2) sum_n n^(2-2g) eps_n(z) exp(-s (n^2 - 1)), s = pi^(4/3) * 0.3 / 2
SO3_Z = {
    (1, 1): 0.5650763633117670806470569,
    (1, -1): 0.4389240190381753780585767,
    (0, 1): 0.7704983819735532710881742,
    (0, -1): 0.2655060834205932493617009,
}


@pytest.mark.parametrize("genus,z", list(SO3_Z))
def test_character_sum_frozen(genus, z):
    est = pt.character_sum_Z(SO3, genus, 0.3, 1.0, z)
    assert est.value == pytest.approx(SO3_Z[genus, z], rel=1e-13)
    assert est.std_error == 0.0


def test_character_sum_genus0_is_cover_kernel():
    for z in (1, -1):
        x = SO3.deck(np.array([z]))
        assert pt.character_sum_Z(SO3, 0, 0.45, 1.0, z).value == pytest.approx(float(cover_heat_kernel(SO3, 0.45, x)), rel=1e-12)


@given(st.integers(0, 3), st.floats(0.05, 3.0))
def test_character_sum_over_classes(genus, t):
    """Summing over Pi gives the SO3 base-group series: odd irreducibles only, weight 1."""
    total = sum(pt.character_sum_Z(SO3, genus, t, 1.0, z).value for z in (1, -1))
    s = SO3.casimir_scale * t / 2
    base = sum(n ** (2 - 2 * genus) * math.exp(-s * (n * n - 1)) for n in range(1, 400, 2))
    assert total == pytest.approx(base, rel=1e-12)


def test_character_sum_large_time_limit():
    for z in (1, -1):
        assert pt.character_sum_Z(SO3, 1, 50.0, 1.0, z).value == pytest.approx(0.5, abs=1e-12)


def test_character_sum_rejects_u1():
    with pytest.raises(ValueError):
        pt.character_sum_Z(U1, 1, 1.0, 1.0, 0)


def test_closed_form_exact_cases():
    assert pt.closed_form_Z(U1, 0, 1.0, 1.0, 0).value == pytest.approx((2 * math.pi) ** -0.5, rel=1e-14)
    v = pt.closed_form_Z(U1, 1, 0.5, 1.4, 2).value
    assert v == pytest.approx(float(cover_heat_kernel(U1, 0.7, np.array([2.0]))), rel=1e-14)
    with pytest.raises(ValueError):
        pt.closed_form_Z(U1, -1, 1.0, 1.0, 0)


@pytest.mark.parametrize("z", [1, -1])
def test_closed_form_vs_character_sum(z):
    mc = pt.closed_form_Z(SO3, 1, 0.3, 1.0, z, 100000, np.random.default_rng(11))
    assert abs(mc.value - SO3_Z[1, z]) < 3 * mc.std_error


def test_nu_sample_examples(rng):
    empty = pt.NuSampler(FatGraph.standard(0))
    np.testing.assert_array_equal(pt.nu_sample(empty, SO3, rng, 3), np.tile([1.0, 0, 0, 0], (3, 1)))
    torus = pt.NuSampler(FatGraph.standard(1))
    np.testing.assert_allclose(pt.nu_sample(torus, U1, rng, 5), 0.0, atol=1e-12)
    with pytest.raises(GraphError):
        pt.NuSampler(FatGraph((1, 0), (1, 0)))


def test_nu_standard_torus_is_commutator_law():
    torus = pt.NuSampler(FatGraph.standard(1))
    a = pt.nu_angles(torus, SO3, np.random.default_rng(1), 20000)
    x = haar_sample(SO3, np.random.default_rng(2), (20000, 2))
    b = SO3.cover_class_angle(commutator_lift(SO3, x[:, 0], x[:, 1]))
    assert stats.ks_2samp(a, b).pvalue > 0.01


@pytest.mark.parametrize("name", ["genus2_scrambled", "torus_two_face", "genus3_mixed"])
def test_move_equivariance(name, rng):
    graph, areas = load_graph_ref(f"bundled:{name}")
    single, _ = fg.contract_dual_tree(graph, areas)
    for ctx in (U1, SO3):
        for e in range(single.dart_count):
            r = pt.move_equivariance_check(single, e, "K", ctx, 25, rng)
            assert r["passed"], r
            if single.target(e) != single.source(e):
                r = pt.move_equivariance_check(single, e, "W", ctx, 25, rng)
                assert r["passed"], r


def test_move_equivariance_k_trivial_on_standard(rng):
    r = pt.move_equivariance_check(FatGraph.standard(1), 0, "K", SO3, 10, rng)
    assert r["passed"] and r["max_class_distance"] < 1e-12


def test_move_equivariance_preconditions(rng):
    with pytest.raises(GraphError):
        pt.move_equivariance_check(FatGraph((1, 0), (1, 0)), 0, "K", SO3, 5, rng)
    with pytest.raises(GraphError):
        pt.move_equivariance_check(FatGraph.standard(1), 0, "W", SO3, 5, rng)


def test_nu_invariant_under_cut_paste():
    graph, _ = load_graph_ref("bundled:genus2_scrambled")
    moved = fg.cut_paste(graph, 3)
    a = pt.nu_angles(pt.NuSampler(graph), SO3, np.random.default_rng(5), 20000)
    b = pt.nu_angles(pt.NuSampler(moved), SO3, np.random.default_rng(6), 20000)
    assert stats.ks_2samp(a, b).pvalue > 0.01


def test_reduced_graph_z_u1_exact(rng):
    est = pt.reduced_graph_Z(FatGraph.standard(2), U1, 0.4, 2.0, 3, 1000, rng)
    assert est.value == pytest.approx(float(cover_heat_kernel(U1, 0.8, np.array([3.0]))), rel=1e-12)


@pytest.mark.parametrize("name", ["torus_two_face", "torus_standard", "sphere_loop", "sphere_segment"])
def test_full_pipeline_u1(name):
    graph, areas = load_graph_ref(f"bundled:{name}")
    res = pt.full_pipeline_check(graph, areas, U1, 0.7, 2, effort=20000, seed=1)
    assert res["passed"], res
    exact = float(cover_heat_kernel(U1, 0.7 * areas.total, np.array([2.0])))
    for k in ("direct", "reduced", "closed_form"):
        assert res["estimates"][k]["value"] == pytest.approx(exact, rel=1e-8)


def test_full_pipeline_so3_sphere():
    graph, areas = load_graph_ref("bundled:sphere_loop")
    res = pt.full_pipeline_check(graph, areas, SO3, 0.3, -1, effort=50000, seed=4)
    assert res["passed"], res
    assert res["estimates"]["character_sum"]["value"] == pytest.approx(SO3_Z[0, -1], rel=1e-12)
