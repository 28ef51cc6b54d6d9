import json

import pytest
from hypothesis import assume, given
from hypothesis import strategies as st

from ymlattice import fatgraph as fg
from ymlattice.config import bundled_graphs, load_graph_ref
from ymlattice.fatgraph import AreaMap, FatGraph, GraphError

PAIRS = lambda a: tuple(d ^ 1 for d in range(2 * a))


@st.composite
def fat_graphs(draw, max_edges=5):
    a = draw(st.integers(1, max_edges))
    sigma = draw(st.permutations(range(2 * a)))
    try:
        return FatGraph(tuple(sigma), PAIRS(a))
    except GraphError:
        assume(False)


@st.composite
def single_face_graphs(draw, max_genus=3):
    """Random gluing of a 4g-gon, one vertex not required."""
    g = draw(st.integers(1, max_genus))
    word = draw(st.permutations(range(4 * g)))
    pairing = draw(st.permutations(range(4 * g)))
    alpha = [0] * (4 * g)
    for i in range(0, 4 * g, 2):
        x, y = pairing[i], pairing[i + 1]
        alpha[x], alpha[y] = y, x
    try:
        return FatGraph.from_phi([word], alpha)
    except GraphError:
        assume(False)


def euler(graph):
    return graph.vertex_count - graph.edge_count + graph.face_count


# -- basic structure ------------------------------------------------------------------


def test_standard_torus_one_face():
    t = FatGraph.standard(1)
    assert t.faces == [(0, 1, 2, 3)]
    assert t.genus == 1 and t.vertex_count == 1


@pytest.mark.parametrize("g", range(5))
def test_standard_genus_and_edges(g):
    s = FatGraph.standard(g)
    assert s.genus == g
    assert s.edge_count == 2 * g
    assert s.face_count == 1 and (s.vertex_count == 1 or g == 0)


def test_single_pair_sphere():
    seg = FatGraph((0, 1), (1, 0))
    assert (seg.vertex_count, seg.edge_count, seg.face_count, seg.genus) == (2, 1, 1, 0)
    loop = FatGraph((1, 0), (1, 0))
    assert loop.faces == [(0,), (1,)]
    assert loop.genus == 0


def test_invalid_inputs_rejected():
    with pytest.raises(GraphError):
        FatGraph((0, 1, 2, 3), (1, 0, 3, 2))  # disconnected
    with pytest.raises(GraphError):
        FatGraph((0, 1), (0, 1))  # alpha has fixed points
    with pytest.raises(GraphError):
        FatGraph((0, 0), (1, 0))
    with pytest.raises(GraphError):
        FatGraph((0, 1, 2), (1, 0, 2))


@given(fat_graphs())
def test_faces_partition_darts(graph):
    darts = sorted(d for f in graph.faces for d in f)
    assert darts == list(range(graph.dart_count))
    assert euler(graph) == 2 - 2 * graph.genus
    assert graph.genus >= 0


@given(fat_graphs())
def test_source_target_convention(graph):
    for e in range(graph.dart_count):
        assert graph.source(graph.phi[e]) == graph.target(e)
        assert graph.source(e) == graph.target(graph.alpha[e])


def test_dual_graph():
    loop = FatGraph((1, 0), (1, 0))
    dual = fg.dual_graph(loop)
    assert dual.vertex_count == 2 and dual.edge_count == 1
    t = fg.dual_graph(FatGraph.standard(2))
    assert t.vertex_count == 1 and set(t.source) == {0} and set(t.target) == {0}


@given(fat_graphs())
def test_dual_spanning_tree(graph):
    tree = fg.spanning_tree_dual(graph)
    assert len(tree) == 2 * (graph.face_count - 1)
    assert all(graph.alpha[d] in tree for d in tree)
    assert fg.is_dual_spanning_tree(graph, tree)
    assert tree == fg.spanning_tree_dual(graph)


def test_dual_tree_examples():
    assert fg.spanning_tree_dual(FatGraph.standard(2)) == frozenset()
    assert fg.spanning_tree_dual(FatGraph((1, 0), (1, 0))) == frozenset({0, 1})


# -- moves ---------------------------------------------------------------------------


@given(fat_graphs())
def test_contract_dual_tree(graph):
    areas = AreaMap.uniform(graph, 2.5)
    single, sa = fg.contract_dual_tree(graph, areas)
    assert single.face_count == 1
    assert single.genus == graph.genus
    assert single.vertex_count == graph.vertex_count
    assert sa.total == pytest.approx(2.5)


def test_contract_two_face_torus():
    graph, areas = load_graph_ref("bundled:torus_two_face")
    single, _ = fg.contract_dual_tree(graph, areas)
    assert (single.face_count, single.genus, single.vertex_count) == (1, 1, 1)
    one = FatGraph.standard(1)
    assert fg.contract_dual_tree(one, AreaMap.uniform(one))[0] == one


@given(fat_graphs())
def test_whitehead_bookkeeping(graph):
    for e in range(graph.dart_count):
        if graph.target(e) == graph.source(e):
            with pytest.raises(GraphError):
                fg.whitehead(graph, e)
            continue
        w = fg.whitehead(graph, e)
        assert w.face_count == graph.face_count
        assert w.genus == graph.genus
        assert w.vertex_count == graph.vertex_count - 1
        assert w.edge_count == graph.edge_count - 1


@given(fat_graphs(max_edges=5))
def test_whitehead_face_words(graph):
    """Contracting e deletes e and e^-1 from every face word."""
    for e in range(graph.dart_count):
        if graph.target(e) == graph.source(e):
            continue
        new, keep = fg._whitehead(graph, e)
        old = sorted(tuple(sorted(d for d in f if d not in (e, graph.alpha[e]))) for f in graph.faces)
        got = sorted(tuple(sorted(keep[d] for d in f)) for f in new.faces if f)
        assert [f for f in old if f] == got


def test_whitehead_commute():
    graph, _ = load_graph_ref("bundled:genus3_mixed")
    checked = 0
    for e in range(graph.dart_count):
        for f in range(graph.dart_count):
            if f in (e, graph.alpha[e]) or graph.target(e) == graph.source(e):
                continue
            g1, keep1 = fg._whitehead(graph, e)
            f1 = keep1.index(f)
            if g1.target(f1) == g1.source(f1) or graph.target(f) == graph.source(f):
                continue
            g2, keep2 = fg._whitehead(graph, f)
            e2 = keep2.index(e)
            if g2.target(e2) == g2.source(e2):
                continue
            a, ka = fg._whitehead(g1, f1)
            b, kb = fg._whitehead(g2, e2)
            # both remove the same two edges; labels agree after composing the keep lists
            assert [keep1[i] for i in ka] == [keep2[i] for i in kb]
            assert a == b
            checked += 1
    assert checked > 0


def test_two_vertex_torus_whitehead():
    graph, _ = load_graph_ref("bundled:torus_two_vertex")
    e = next(d for d in range(graph.dart_count) if graph.target(d) != graph.source(d))
    w = fg.whitehead(graph, e)
    assert (w.vertex_count, w.face_count, w.genus) == (1, 1, 1)


@given(single_face_graphs())
def test_cut_paste_preserves(graph):
    for e in range(graph.dart_count):
        k = fg.cut_paste(graph, e)
        assert k.face_count == 1
        assert k.genus == graph.genus
        assert k.dart_count == graph.dart_count
        if graph.vertex_count == 1:
            assert k.vertex_count == 1


def test_cut_paste_identity_on_standard():
    s = FatGraph.standard(1)
    # the dart before a^-1 is b and W1 is empty, so the word is rebuilt unchanged
    assert fg.cut_paste(s, 0) == s


def test_cut_paste_rejects_multiface():
    with pytest.raises(GraphError):
        fg.cut_paste(FatGraph((1, 0), (1, 0)), 0)


# -- standard form -------------------------------------------------------------------


def _one_vertex(graph):
    while graph.vertex_count > 1:
        e = next(d for d in range(graph.dart_count) if graph.target(d) != graph.source(d))
        graph = fg.whitehead(graph, e)
    return graph


@given(single_face_graphs())
def test_standardize_random(graph):
    graph = _one_vertex(graph)
    std, log = fg.standardize(graph)
    assert std == FatGraph.standard(graph.genus)
    assert all(op in ("K", "relabel") for op, _ in log)
    # replaying the K moves then the relabel reproduces the output
    cur = graph
    for op, arg in log:
        cur = fg.cut_paste(cur, arg) if op == "K" else cur.relabel(arg)
    assert cur == std


def test_standardize_idempotent_and_degenerate():
    s2 = FatGraph.standard(2)
    assert fg.standardize(s2) == (s2, [])
    s0 = FatGraph.standard(0)
    assert s0.dart_count == 0 and fg.standardize(s0) == (s0, [])


def test_standardize_scrambled_genus2():
    graph, _ = load_graph_ref("bundled:genus2_scrambled")
    std, log = fg.standardize(graph)
    assert std == FatGraph.standard(2) and log


def test_standardize_rejects():
    with pytest.raises(GraphError):
        fg.standardize(FatGraph((1, 0), (1, 0)))


# -- subdivisions ---------------------------------------------------------------------


@given(fat_graphs(), st.data())
def test_subdivisions(graph, data):
    areas = AreaMap.uniform(graph, 1.0)
    e = data.draw(st.integers(0, graph.dart_count - 1))
    v, va = fg.elementary_subdivide(graph, areas, "V", e)
    assert (v.vertex_count, v.edge_count, v.face_count, v.genus) == (
        graph.vertex_count + 1, graph.edge_count + 1, graph.face_count, graph.genus)
    e1, _ = fg.elementary_subdivide(graph, areas, "E1", e)
    assert e1.face_count == graph.face_count and e1.genus == graph.genus
    assert len(e1.vertices[e1.vertex_of[e1.dart_count - 2]]) == 1  # new dart ends at the new vertex
    F = graph.face_of[e]
    others = [d for d in graph.faces[F] if d != e]
    if others:
        split = areas.face_area[graph.face_key(F)] * 0.3
        e2, a2 = fg.elementary_subdivide(graph, areas, "E2", (e, others[0], split))
        assert e2.face_count == graph.face_count + 1 and e2.genus == graph.genus
        assert a2.total == pytest.approx(areas.total, abs=1e-15)
        with pytest.raises(GraphError):
            fg.elementary_subdivide(graph, areas, "E2", (e, others[0], areas.total * 2))


def test_v_on_single_loop():
    loop = FatGraph((1, 0), (1, 0))
    v, _ = fg.elementary_subdivide(loop, AreaMap.uniform(loop), "V", 0)
    assert (v.vertex_count, v.edge_count, v.face_count) == (2, 2, 2)


# -- files --------------------------------------------------------------------------


def test_bundled_graphs_valid():
    names = bundled_graphs()
    assert {"torus_two_face", "genus2_scrambled", "genus3_mixed"} <= set(names)
    genera = {n: load_graph_ref(f"bundled:{n}")[0].genus for n in names}
    assert max(genera.values()) == 3


def test_graph_file_roundtrip(tmp_path):
    graph, areas = load_graph_ref("bundled:torus_two_face")
    p = tmp_path / "g.json"
    fg.save_graph(p, graph, areas, "t")
    g2, a2 = fg.load_graph(p)
    assert g2 == graph and a2.face_area == areas.face_area
    assert p.read_text() == fg.dump_graph(graph, areas, "t")


def test_graph_file_validation(tmp_path):
    p = tmp_path / "bad.json"
    p.write_text(json.dumps({"dart_count": 2, "sigma": [0, 1], "alpha": [1, 0], "colour": 1}))
    with pytest.raises(GraphError):
        fg.load_graph(p)
    p.write_text(json.dumps({"dart_count": 2, "sigma": [0, 1], "alpha": [1, 0], "areas": {"0": -1}}))
    with pytest.raises(GraphError):
        fg.load_graph(p)
