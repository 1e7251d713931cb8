import math
import time

import numpy as np
import pytest

from agn.synth import BaSpec, SbmSpec, builtin_graph, gen_ba, gen_sbm


def test_sbm_single_block_forced_edge():
    lg = gen_sbm(SbmSpec((2,), 1.0, 0.0))
    assert lg.graph.edges.tolist() == [[0, 1]]
    assert lg.labels.tolist() == [0, 0]


def test_sbm_is_deterministic_and_labels_blocks():
    spec = SbmSpec((5, 7), 0.6, 0.1, seed=3)
    a, b = gen_sbm(spec), gen_sbm(spec)
    assert a.graph == b.graph
    assert np.bincount(a.labels).tolist() == [5, 7]
    assert gen_sbm(SbmSpec((5, 7), 0.6, 0.1, seed=4)).graph != a.graph


def test_sbm_respects_block_probabilities():
    lg = gen_sbm(SbmSpec((30, 30), 1.0, 0.0, seed=1))
    e = lg.graph.edges
    assert (lg.labels[e[:, 0]] == lg.labels[e[:, 1]]).all()
    assert lg.graph.edge_count == 2 * 30 * 29 // 2


def _within_3_sigma(spec, edges):
    n = spec.n
    within = sum(b * (b - 1) // 2 for b in spec.block_sizes)
    between = n * (n - 1) // 2 - within
    var = within * spec.p_within * (1 - spec.p_within) + between * spec.p_between * (1 - spec.p_between)
    return abs(edges - spec.expected_edges()) <= 3 * math.sqrt(var)


def test_multi_community_edge_count_near_expectation():
    spec = SbmSpec((300,) * 5, 0.25, 0.01, seed=42)
    assert spec.expected_edges() == pytest.approx(65062.5)
    assert _within_3_sigma(spec, gen_sbm(spec).graph.edge_count)


def test_community_density_near_expectation():
    spec = SbmSpec((400,) * 3, 0.35, 0.03, seed=42)
    assert spec.expected_density() == pytest.approx(0.1365, abs=5e-4)
    assert _within_3_sigma(spec, gen_sbm(spec).graph.edge_count)


def test_sbm_equal_probabilities_behaves_like_er():
    p = 0.2
    dens = [gen_sbm(SbmSpec((20, 20), p, p, seed=s)).graph.density for s in range(20)]
    pairs = 40 * 39 / 2
    sigma = math.sqrt(p * (1 - p) / (pairs * 20))
    assert abs(np.mean(dens) - p) <= 3 * sigma


def test_ba_small_tree():
    g = gen_ba(BaSpec(3, 1, seed=0))
    assert g.edge_count == 2
    assert g.connected_components()[0] == 1


@pytest.mark.parametrize("n,m,seed", [(50, 1, 0), (200, 3, 7), (500, 2, 42)])
def test_ba_edge_count_and_min_degree(n, m, seed):
    g = gen_ba(BaSpec(n, m, seed))
    assert g.edge_count == m * (n - m)
    assert g.degrees[m:].min() >= m
    assert gen_ba(BaSpec(n, m, seed)) == g


def test_ba_reference_size():
    t = time.perf_counter()
    g = gen_ba(BaSpec(2000, 2, 42))
    assert time.perf_counter() - t < 1.0
    assert g.edge_count == 3996
    assert g.density == pytest.approx(0.0020, abs=5e-5)


def test_builtin_graphs():
    k = builtin_graph("karate")
    assert (k.node_count, k.edge_count) == (34, 78)
    assert round(k.density, 3) == 0.139
    assert k.connected_components()[0] == 1
    lm = builtin_graph("lesmis")
    assert (lm.node_count, lm.edge_count) == (77, 254)
    assert lm.density == pytest.approx(0.0868, abs=5e-5)
    assert lm.weights is None
    with pytest.raises(KeyError):
        builtin_graph("dolphins")


def test_spec_validation():
    with pytest.raises(ValueError):
        SbmSpec((3,), 1.2, 0.0)
    with pytest.raises(ValueError):
        BaSpec(3, 3)
