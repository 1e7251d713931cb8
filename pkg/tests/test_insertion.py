import itertools

import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from agn.evaluation import edge_composition
from agn.features import extract_features, normalize, resolve_schema
from agn.graph import Graph
from agn.insertion import (
    GG,
    GO,
    VARIANTS,
    InsertionConfig,
    cosine_similarity,
    insert_agn,
    insert_knn_features,
    insert_preferential,
    insert_random,
    insert_vanilla_vgae,
    insert_variant,
    similarity_matrix,
    top_k_indices,
)
from agn.model import ModelParams
from agn.synth import SbmSpec, builtin_graph, gen_sbm


@pytest.fixture(scope="module")
def setup():
    g = gen_sbm(SbmSpec((40, 40), 0.4, 0.05, seed=2)).graph
    xr = extract_features(g, resolve_schema("community"))
    x, norm = normalize(xr)
    params = ModelParams.init(4, 16, 4, seed=0)
    return g, x, norm, params


def constant_decoder(d=4, hidden=8, latent=3, value=0.0):
    """Decoder whose output ignores the latent: every generated row is identical."""
    p = ModelParams.init(d, hidden, latent, seed=0)
    p.mlp_w3[:] = 0.0
    p.mlp_b3[:] = np.linspace(-1, 1, d) + value
    return p


def test_cosine_examples():
    assert cosine_similarity([2, 3], [2, 3]) == pytest.approx(1.0)
    assert cosine_similarity([1, 0], [0, 1]) == 0.0
    assert cosine_similarity([1, 0], [1, 1]) == pytest.approx(0.70711, abs=1e-5)
    assert cosine_similarity([0, 0], [1, 1]) == 0.0


def test_similarity_matrix_equals_pairwise_cosine():
    rng = np.random.default_rng(0)
    a, b = rng.random((5, 3)), rng.random((7, 3))
    a[0] = 0.0
    s = similarity_matrix(a, b)
    for i, j in itertools.product(range(5), range(7)):
        assert s[i, j] == pytest.approx(cosine_similarity(a[i], b[j]), abs=1e-12)


def test_top_k_breaks_ties_towards_lower_index():
    scores = np.array([[0.5, 0.9, 0.5, 0.9, 0.1]])
    assert top_k_indices(scores, 3).tolist() == [[1, 3, 0]]


def test_m_zero_is_identity(setup):
    g, x, _, params = setup
    for name in VARIANTS:
        ag = insert_variant(name, g, x, params, InsertionConfig(m_new=0))
        assert ag.graph == g and ag.m_new == 0
        c = edge_composition(ag)
        assert (c.go_count, c.gg_count, c.gg_ratio, c.avg_generated_degree) == (0, 0, 0.0, 0.0)


def test_tau_above_one_isolates_everything(setup):
    g, x, _, params = setup
    ag = insert_agn(g, x, params, InsertionConfig(m_new=7, tau=1.01))
    assert len(ag.new_edges) == 0 and ag.isolated == 7
    assert ag.binding_fraction == 1.0


def test_non_binding_threshold_gives_exact_degree(setup):
    g, x, _, params = setup
    ag = insert_agn(g, x, params, InsertionConfig(m_new=12, top_k=6, tau=-1.0))
    assert len(ag.new_edges) == 72
    assert (ag.graph.degrees[g.node_count:] == 6).all()
    assert ag.binding_fraction == 0.0


def test_agn_wires_to_brute_force_top_k(setup):
    g, x, norm, params = setup
    cfg = InsertionConfig(m_new=9, top_k=5, tau=0.9)
    ag = insert_agn(g, x, params, cfg, norm_params=norm)
    n = g.node_count
    for i, row in enumerate(ag.gen_features_norm):
        sims = [(-cosine_similarity(row, x.values[j]), j) for j in range(n)]
        top = sorted(sims)[:5]
        want = sorted(j for s, j in top if -s >= 0.9)
        got = sorted(int(a) for a, b in ag.new_edges if b == n + i)
        assert got == want
    assert (ag.new_weights >= 0.9).all()
    assert ag.gen_features_raw.shape == ag.gen_features_norm.shape
    assert ag.rejected == 45 - len(ag.new_edges)


def test_all_pairs_gg_oracle():
    g = builtin_graph("karate")
    x, _ = normalize(extract_features(g, resolve_schema("community")))
    params = constant_decoder()
    ag = insert_agn(g, x, params, InsertionConfig(m_new=100, top_k=10, tau=-1.0, allow_gg=True))
    gen = ag.gen_features_norm
    n = g.node_count
    oracle = {(n + i, n + j) for i, j in itertools.combinations(range(100), 2)
              if cosine_similarity(gen[i], gen[j]) >= -1.0}
    got = {tuple(e) for e, p in zip(ag.new_edges.tolist(), ag.provenance) if p == GG}
    assert got == oracle and len(got) == 4950
    c = edge_composition(ag)
    assert (c.go_count, c.gg_count) == (1000, 4950)
    assert abs(c.gg_ratio - 4950 / 5950) < 1e-12
    assert c.avg_generated_degree == 109.0


def test_allow_gg_false_never_adds_gg(setup):
    g, x, _, _ = setup
    ag = insert_agn(g, x, constant_decoder(), InsertionConfig(m_new=20, tau=-1.0))
    assert not (ag.provenance == GG).any()
    assert (ag.new_edges[:, 0] < g.node_count).all()


def test_random_baseline(triangle):
    ag = insert_random(triangle, InsertionConfig(m_new=1, top_k=1))
    assert len(ag.new_edges) == 1 and not ag.features_generated
    full = insert_random(triangle, InsertionConfig(m_new=2, top_k=3))
    assert (full.graph.degrees[3:] == 3).all()
    with pytest.raises(ValueError):
        insert_random(triangle, InsertionConfig(m_new=1, top_k=4))


def test_preferential_prefers_hub():
    star = Graph(6, [(0, i) for i in range(1, 6)])
    counts = np.zeros(6)
    for s in range(1000):
        ag = insert_preferential(star, InsertionConfig(m_new=1, top_k=1, seed=s))
        counts[ag.new_edges[0, 0]] += 1
    assert counts.argmax() == 0
    assert counts[0] == pytest.approx(500, abs=60)


def test_preferential_on_regular_graph_is_uniform():
    cycle = Graph(10, [(i, (i + 1) % 10) for i in range(10)])
    ag = insert_preferential(cycle, InsertionConfig(m_new=4000, top_k=1, seed=1))
    freq = np.bincount(ag.new_edges[:, 0], minlength=10) / 4000
    assert np.abs(freq - 0.1).max() < 0.02


def test_knn_shares_attachment_rule(setup):
    g, x, _, _ = setup
    ag = insert_knn_features(g, x, InsertionConfig(m_new=15, tau=-1.0))
    assert (ag.graph.degrees[g.node_count:] == 10).all()
    ag2 = insert_knn_features(g, x, InsertionConfig(m_new=15))
    assert (ag2.new_weights >= 0.5).all()
    assert (ag2.graph.degrees[g.node_count:] <= 10).all()
    again = insert_knn_features(g, x, InsertionConfig(m_new=15))
    assert np.array_equal(again.gen_features_norm, ag2.gen_features_norm)


def test_vanilla_vgae_zero_latents_admit_boundary(setup):
    g, x, _, params = setup
    cfg = InsertionConfig(m_new=3, top_k=4)
    ag = insert_vanilla_vgae(g, x, params, cfg, latents=np.zeros((3, 4)))
    assert len(ag.new_edges) == 12
    assert np.allclose(ag.new_weights, 0.5)
    assert sorted(set(ag.new_edges[:, 0].tolist())) == [0, 1, 2, 3]


def test_vanilla_vgae_respects_cap_and_threshold(setup):
    g, x, _, params = setup
    ag = insert_vanilla_vgae(g, x, params, InsertionConfig(m_new=30))
    assert (ag.graph.degrees[g.node_count:] <= 10).all()
    assert (ag.new_weights >= 0.5).all()


@given(st.sampled_from(VARIANTS), st.integers(0, 50), st.floats(-1, 1), st.booleans())
@settings(max_examples=40, deadline=None)
def test_backbone_and_policy_invariants(setup, name, seed, tau, allow_gg):
    g, x, norm, params = setup
    cfg = InsertionConfig(m_new=8, top_k=5, tau=tau, allow_gg=allow_gg, seed=seed)
    ag = insert_variant(name, g, x, params, cfg, norm)
    assert ag.graph.induced_subgraph(g.node_count) == g
    deg_to_orig = np.bincount(ag.new_edges[ag.provenance == GO][:, 1] - g.node_count, minlength=8)
    assert (deg_to_orig <= 5).all()
    if name in ("agn", "agn_original", "knn"):
        assert (ag.new_weights >= tau).all()
    if name != "agn_original":
        assert not (ag.provenance == GG).any()
    again = insert_variant(name, g, x, params, cfg, norm)
    assert again.graph == ag.graph and np.array_equal(again.new_weights, ag.new_weights)


def test_unknown_variant(setup):
    g, x, _, params = setup
    with pytest.raises(KeyError):
        insert_variant("teleport", g, x, params, InsertionConfig())
