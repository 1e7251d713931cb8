import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from agn.graph import EdgeListError, Graph, canonical_edges, load_edge_list, normalized_adjacency, save_graph


edge_lists = st.integers(1, 25).flatmap(
    lambda n: st.tuples(
        st.just(n),
        st.lists(st.tuples(st.integers(0, n - 1), st.integers(0, n - 1)), max_size=60),
    )
)


def test_graph_rejects_self_loops_duplicates_and_bad_weights():
    with pytest.raises(ValueError):
        Graph(3, [(1, 1)])
    with pytest.raises(ValueError):
        Graph(3, [(0, 1), (1, 0)])
    with pytest.raises(ValueError):
        Graph(3, [(0, 3)])
    with pytest.raises(ValueError):
        Graph(3, [(0, 1)], weights=[1.5])


def test_graph_is_canonical_and_immutable():
    g = Graph(4, [(3, 1), (2, 0), (1, 0)])
    assert g.edges.tolist() == [[0, 1], [0, 2], [1, 3]]
    with pytest.raises(ValueError):
        g.edges[0, 0] = 5


def test_neighbors_and_degrees(path3):
    assert path3.neighbors(1).tolist() == [0, 2]
    assert path3.degrees.tolist() == [1, 2, 1]
    assert path3.has_edge(2, 1) and not path3.has_edge(0, 2)


def test_provenance_range():
    g = Graph(5, [(0, 1), (1, 4)], original_count=3)
    assert g.generated_count == 2
    assert g.is_generated.tolist() == [False, False, False, True, True]


def test_normalized_adjacency_examples(path3):
    a = normalized_adjacency(path3)
    assert a[0, 1] == pytest.approx(1 / np.sqrt(2))
    assert a[1, 2] == pytest.approx(0.70711, abs=1e-5)
    assert a[0, 2] == 0.0
    assert normalized_adjacency(Graph(2, [(0, 1)]))[0, 1] == 1.0
    assert not normalized_adjacency(Graph(3)).any()


@given(edge_lists)
@settings(max_examples=60, deadline=None)
def test_graph_invariants(data):
    n, pairs = data
    g = Graph(n, canonical_edges(pairs, n))
    assert g.degrees.sum() == 2 * g.edge_count
    a = normalized_adjacency(g)
    assert np.array_equal(a, a.T)
    assert (a >= 0).all()
    deg = g.degrees
    for i, j in g.edges:
        assert a[i, j] == pytest.approx(1 / np.sqrt(deg[i] * deg[j]))
    assert (a[deg == 0] == 0).all()


@given(edge_lists)
@settings(max_examples=40, deadline=None)
def test_save_load_roundtrip(tmp_path_factory, data):
    n, pairs = data
    g = Graph(n, canonical_edges(pairs, n))
    path = tmp_path_factory.mktemp("rt") / "g.txt"
    save_graph(g, path)
    first = path.read_text()
    back = load_edge_list(path)
    assert back == g
    save_graph(back, path)
    assert path.read_text() == first


def test_load_examples(tmp_path):
    p = tmp_path / "t.txt"
    p.write_text("0 1\n1 2\n2 0\n")
    g = load_edge_list(p)
    assert (g.node_count, g.edge_count) == (3, 3)
    p.write_text("1 2\n2 1\n")
    assert load_edge_list(p).edge_count == 1


def test_load_relabel_first_appearance(tmp_path):
    p = tmp_path / "t.txt"
    p.write_text("# a comment\nbob alice\nalice carol\n")
    g = load_edge_list(p, relabel=True)
    assert g.node_count == 3
    assert g.edges.tolist() == [[0, 1], [1, 2]]


def test_load_drops_self_loops_with_warning(tmp_path, caplog):
    p = tmp_path / "t.txt"
    p.write_text("0 0\n0 1\n")
    with caplog.at_level("WARNING"):
        g = load_edge_list(p)
    assert g.edge_count == 1
    assert "1 self-loop" in caplog.text


def test_load_errors_report_line_numbers(tmp_path):
    p = tmp_path / "bad.txt"
    p.write_text("0 1\n1 2 3 4\n")
    with pytest.raises(EdgeListError, match=":2:"):
        load_edge_list(p)
    p.write_text("")
    with pytest.raises(EdgeListError):
        load_edge_list(p)
    p.write_text("0 x\n")
    with pytest.raises(EdgeListError, match=":1:"):
        load_edge_list(p)


def test_save_format(triangle, tmp_path):
    p = tmp_path / "t.txt"
    save_graph(triangle, p)
    body = [l for l in p.read_text().splitlines() if not l.startswith("#")]
    assert body == ["0 1", "0 2", "1 2"]
    g = Graph(4, [(0, 1), (2, 3)], weights=[1.0, 0.75], original_count=3)
    save_graph(g, p)
    assert "# original=3 generated=1" in p.read_text()
    back = load_edge_list(p)
    assert back.generated_count == 1
    assert back.weights.tolist() == [1.0, 0.75]


def test_induced_subgraph_and_components(two_triangles):
    sub = two_triangles.induced_subgraph(3)
    assert sub.edge_count == 3
    g = two_triangles.without_edges(np.array([False] * 3 + [True] + [False] * 3))
    assert g.connected_components()[0] == 2
