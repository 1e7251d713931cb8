import numpy as np
import pytest
from hypothesis import given, settings, strategies as st
from hypothesis.extra.numpy import arrays

from agn.features import (
    FeatureMatrix,
    NormParams,
    denormalize,
    extract_features,
    local_clustering,
    normalize,
    resolve_schema,
)
from agn.graph import Graph
from conftest import random_graph

ALL = resolve_schema(
    "degree,clustering,neighbor_count,mean_neighbor_degree,frac_high_degree_neighbors,"
    "std_neighbor_degree,frac_higher_degree_neighbors"
)


def feats(g, schema=ALL):
    x = extract_features(g, schema)
    return {name: x.values[:, k] for k, name in enumerate(schema)}


def test_schema_dimensions():
    assert [len(resolve_schema(s)) for s in ("community", "multi_community", "scale_free")] == [4, 5, 6]
    with pytest.raises(ValueError):
        resolve_schema("degree,wingspan")


def test_triangle_features(triangle):
    f = feats(triangle)
    assert f["degree"][0] == 2 and f["neighbor_count"][0] == 2
    assert f["clustering"][0] == 1.0
    assert f["mean_neighbor_degree"][0] == 2.0


def test_path_center(path3):
    f = feats(path3)
    assert (f["degree"][1], f["clustering"][1], f["mean_neighbor_degree"][1]) == (2, 0.0, 1.0)


def test_star_higher_degree_fraction():
    star = Graph(5, [(0, i) for i in range(1, 5)])
    f = feats(star)
    assert f["frac_higher_degree_neighbors"][0] == 0.0
    assert (f["frac_higher_degree_neighbors"][1:] == 1.0).all()
    # mean degree is 1.6, so only the hub counts as high degree
    assert f["frac_high_degree_neighbors"][0] == 0.0
    assert (f["frac_high_degree_neighbors"][1:] == 1.0).all()


def test_isolated_node_features():
    f = feats(Graph(3, [(0, 1)]))
    for name in ALL:
        assert f[name][2] == 0.0


def test_neighbor_statistics_match_loops():
    rng = np.random.default_rng(5)
    for _ in range(10):
        g = random_graph(rng)
        f = feats(g)
        deg = g.degrees
        for v in range(g.node_count):
            nb = deg[g.neighbors(v)]
            if len(nb):
                assert f["mean_neighbor_degree"][v] == pytest.approx(nb.mean(), abs=1e-12)
                assert f["std_neighbor_degree"][v] == pytest.approx(nb.std(), abs=1e-12)
                assert f["frac_higher_degree_neighbors"][v] == pytest.approx(np.mean(nb > deg[v]))
                assert f["frac_high_degree_neighbors"][v] == pytest.approx(np.mean(nb > deg.mean()))


def brute_clustering(g):
    adj = g.dense_adjacency().astype(bool)
    out = np.zeros(g.node_count)
    for v in range(g.node_count):
        nb = np.flatnonzero(adj[v])
        k = len(nb)
        if k < 2:
            continue
        links = sum(adj[a, b] for i, a in enumerate(nb) for b in nb[i + 1:])
        out[v] = 2.0 * links / (k * (k - 1))
    return out


def test_clustering_matches_brute_force():
    rng = np.random.default_rng(11)
    for _ in range(25):
        g = random_graph(rng)
        assert np.max(np.abs(local_clustering(g) - brute_clustering(g))) <= 1e-12


def test_regular_graph_rows_identical():
    cycle = Graph(8, [(i, (i + 1) % 8) for i in range(8)])
    x = extract_features(cycle, ALL).values
    assert (x == x[0]).all()


def test_normalize_examples():
    x = FeatureMatrix(np.array([[0.0, 5.0, 1.0], [10.0, 5.0, 2.0], [5.0, 5.0, 3.0]]), ("a", "b", "c"))
    xn, p = normalize(x)
    assert xn.values[:, 0].tolist() == [0.0, 1.0, 0.5]
    assert xn.values[:, 1].tolist() == [0.5, 0.5, 0.5]
    assert xn.values[:, 2].tolist() == pytest.approx([0.0, 0.5, 1.0])
    back = denormalize(xn, p).values
    assert np.max(np.abs(back - x.values)) < 1e-9
    assert denormalize(np.array([[0.0, 0.3, 0.0]]), p).values[0].tolist() == pytest.approx([0.0, 5.0, 1.0])


def test_denormalize_dimension_mismatch():
    _, p = normalize(FeatureMatrix(np.eye(3), ("a", "b", "c")))
    with pytest.raises(ValueError):
        denormalize(np.zeros((2, 2)), p)


def test_norm_params_roundtrip():
    _, p = normalize(FeatureMatrix(np.random.default_rng(0).random((6, 2)), ("a", "b")))
    q = NormParams.from_dict(p.to_dict())
    assert all(np.array_equal(getattr(p, k), getattr(q, k)) for k in ("mean", "std", "std_min", "std_max"))


def test_feature_csv_roundtrip(tmp_path):
    x = FeatureMatrix(np.random.default_rng(1).random((5, 3)), ("degree", "clustering", "x"))
    x.to_csv(tmp_path / "f.csv")
    y = FeatureMatrix.from_csv(tmp_path / "f.csv")
    assert y.schema == x.schema and np.array_equal(y.values, x.values)


matrices = arrays(np.float64, st.tuples(st.integers(1, 12), st.integers(1, 5)),
                  elements=st.floats(-1e4, 1e4, allow_nan=False, width=64))


@given(matrices)
@settings(max_examples=100, deadline=None)
def test_normalize_properties(v):
    x = FeatureMatrix(v, tuple(f"f{k}" for k in range(v.shape[1])))
    xn, p = normalize(x)
    assert ((xn.values >= 0) & (xn.values <= 1)).all()
    assert (p.std >= 0).all() and (p.std_max >= p.std_min).all()
    back = denormalize(xn, p).values
    scale = np.maximum(1.0, np.abs(v))
    assert (np.abs(back - v) / scale).max() < 1e-9


@given(matrices, st.floats(0.01, 100), st.floats(-100, 100))
@settings(max_examples=60, deadline=None)
def test_normalize_affine_invariance(v, a, b):
    names = tuple(f"f{k}" for k in range(v.shape[1]))
    x1, _ = normalize(FeatureMatrix(v, names))
    x2, _ = normalize(FeatureMatrix(a * v + b, names))
    # columns that collapse to a constant in floating point may differ
    spread = np.ptp(v, axis=0) > 1e-6 * np.maximum(1.0, np.abs(v).max(axis=0))
    assert np.allclose(x1.values[:, spread], x2.values[:, spread], atol=1e-6)
