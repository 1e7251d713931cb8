"""Graph metrics, community detection, partition comparison and insertion diagnostics."""

from __future__ import annotations

import math
from dataclasses import asdict, dataclass, field
from typing import Optional

import numpy as np
import scipy.sparse as sp
from scipy.sparse.csgraph import shortest_path

from .features import local_clustering, triangle_counts
from .graph import Graph, normalized_adjacency
from .insertion import GG, GO, AugmentedGraph, similarity_matrix
from .model import ModelParams, encode, sigmoid
from .rng import make_rng

DEFAULT_PATH_SAMPLE = 500


# global topology ---------------------------------------------------------------


def transitivity(g: Graph) -> float:
    deg = g.degrees.astype(float)
    triples = np.sum(deg * (deg - 1.0) / 2.0)
    return float(triangle_counts(g).sum() / triples) if triples > 0 else 0.0


def degree_assortativity(g: Graph) -> Optional[float]:
    """Pearson correlation of endpoint degrees over both edge orientations.

    Returns ``None`` when the endpoint degrees have zero variance.
    """
    if g.edge_count == 0:
        return None
    deg = g.degrees.astype(float)
    e = g.edges
    x = np.concatenate([deg[e[:, 0]], deg[e[:, 1]]])
    y = np.concatenate([deg[e[:, 1]], deg[e[:, 0]]])
    xc, yc = x - x.mean(), y - y.mean()
    denom = math.sqrt(float(np.dot(xc, xc)) * float(np.dot(yc, yc)))
    if denom == 0.0:
        return None
    return float(np.dot(xc, yc) / denom)


def path_statistics(g: Graph, path_sample: Optional[int] = DEFAULT_PATH_SAMPLE, seed=42,
                    sample_above: int = 1000):
    """Average shortest path and (sampled) diameter on the largest component.

    BFS runs from every node of the component, or from ``path_sample`` seeded
    random sources when the graph has more than ``sample_above`` nodes.
    Returns ``(avg_path, diameter, sources_used)``; path values are ``None``
    on graphs without edges.
    """
    if g.edge_count == 0:
        return None, None, 0
    _, labels = g.connected_components()
    biggest = np.argmax(np.bincount(labels))
    members = np.flatnonzero(labels == biggest)
    sub = g.adjacency()[members][:, members]
    size = len(members)
    if g.node_count > sample_above and path_sample and path_sample < size:
        sources = np.sort(make_rng(seed).choice(size, size=path_sample, replace=False))
    else:
        sources = np.arange(size)
    dist = shortest_path(sub, method="D", directed=False, unweighted=True, indices=sources)
    finite = np.isfinite(dist) & (dist > 0)
    return float(dist[finite].mean()), int(dist[finite].max()), len(sources)


@dataclass
class TopologyReport:
    nodes: int
    edges: int
    density: float
    mean_degree: float
    min_degree: int
    max_degree: int
    component_count: int
    avg_clustering: float
    transitivity: float
    avg_shortest_path: Optional[float]
    diameter: Optional[int]
    degree_assortativity: Optional[float]
    modularity: Optional[float]
    communities: int
    path_sources: int
    partition: Optional[np.ndarray] = field(default=None, repr=False)

    SCALARS = (
        "nodes", "edges", "density", "mean_degree", "min_degree", "max_degree",
        "component_count", "avg_clustering", "transitivity", "avg_shortest_path",
        "diameter", "degree_assortativity", "modularity", "communities",
    )

    def scalars(self) -> dict:
        return {k: getattr(self, k) for k in self.SCALARS}

    def to_dict(self) -> dict:
        d = self.scalars()
        d["path_sources"] = self.path_sources
        return d


def topology_report(g: Graph, path_sample: Optional[int] = DEFAULT_PATH_SAMPLE, seed=42,
                    with_communities: bool = True) -> TopologyReport:
    deg = g.degrees
    ncomp, _ = g.connected_components()
    avg_path, diameter, used = path_statistics(g, path_sample, seed)
    q, partition, ncom = None, None, 0
    if with_communities and g.edge_count:
        partition, q = louvain(g, seed)
        ncom = int(partition.max()) + 1
    return TopologyReport(
        nodes=g.node_count,
        edges=g.edge_count,
        density=g.density,
        mean_degree=float(deg.mean()) if g.node_count else 0.0,
        min_degree=int(deg.min()) if g.node_count else 0,
        max_degree=int(deg.max()) if g.node_count else 0,
        component_count=ncomp,
        avg_clustering=float(local_clustering(g).mean()) if g.node_count else 0.0,
        transitivity=transitivity(g),
        avg_shortest_path=avg_path,
        diameter=diameter,
        degree_assortativity=degree_assortativity(g),
        modularity=q,
        communities=ncom,
        path_sources=used,
        partition=partition,
    )


def topology_delta(before: TopologyReport, after: TopologyReport) -> dict:
    """Percent change ``100*(after-before)/|before|`` per scalar; ``None`` if undefined."""
    out = {}
    for key in TopologyReport.SCALARS:
        b, a = getattr(before, key), getattr(after, key)
        if b is None or a is None or b == 0:
            out[key] = None
        else:
            out[key] = 100.0 * (a - b) / abs(b)
    return out


# modularity and Louvain ------------------------------------------------------------


def modularity(g: Graph, partition) -> float:
    """Newman modularity of an unweighted graph: sum_c e_c/m - (d_c/2m)^2."""
    m = g.edge_count
    if m == 0:
        raise ValueError("modularity is undefined on a graph without edges")
    part = np.asarray(partition)
    if len(part) != g.node_count:
        raise ValueError("partition must label every node")
    _, labels = np.unique(part, return_inverse=True)
    e = g.edges
    same = labels[e[:, 0]] == labels[e[:, 1]]
    inside = np.bincount(labels[e[same, 0]], minlength=labels.max() + 1).astype(float)
    dsum = np.bincount(labels, weights=g.degrees.astype(float))
    return float(np.sum(inside / m - (dsum / (2.0 * m)) ** 2))


def _level_modularity(w: sp.csr_matrix, comm: np.ndarray) -> float:
    two_m = w.sum()
    k = np.asarray(w.sum(axis=1)).ravel()
    coo = w.tocoo()
    same = comm[coo.row] == comm[coo.col]
    inside = np.bincount(comm[coo.row[same]], weights=coo.data[same], minlength=comm.max() + 1)
    tot = np.bincount(comm, weights=k, minlength=comm.max() + 1)
    return float(np.sum(inside / two_m - (tot / two_m) ** 2))


def _move_nodes(w: sp.csr_matrix, rng, tol: float = 1e-12) -> np.ndarray:
    n = w.shape[0]
    k = np.asarray(w.sum(axis=1)).ravel()
    two_m = k.sum()
    comm = np.arange(n)
    tot = k.copy()
    indptr, indices, data = w.indptr, w.indices, w.data
    order = rng.permutation(n)
    moved = True
    while moved:
        moved = False
        for i in order:
            lo, hi = indptr[i], indptr[i + 1]
            nbr, wt = indices[lo:hi], data[lo:hi]
            not_self = nbr != i
            nbr, wt = nbr[not_self], wt[not_self]
            ci = comm[i]
            tot[ci] -= k[i]
            if len(nbr):
                cands, inv = np.unique(comm[nbr], return_inverse=True)
                k_in = np.bincount(inv, weights=wt)
            else:
                cands, k_in = np.empty(0, dtype=np.int64), np.empty(0)
            own = np.searchsorted(cands, ci)
            own_kin = k_in[own] if own < len(cands) and cands[own] == ci else 0.0
            stay = own_kin - tot[ci] * k[i] / two_m
            best_c = ci
            if len(cands):
                gains = k_in - tot[cands] * k[i] / two_m
                j = int(np.argmax(gains))
                if gains[j] > stay + tol:
                    best_c = cands[j]
            tot[best_c] += k[i]
            if best_c != ci:
                comm[i] = best_c
                moved = True
    _, comm = np.unique(comm, return_inverse=True)
    return comm


def louvain(g: Graph, seed=42) -> tuple[np.ndarray, float]:
    """Two-phase Louvain modularity maximisation with a seeded visiting order.

    Returns ``(partition, Q)`` with community ids relabeled ``0..K-1`` in
    order of first appearance.
    """
    if g.edge_count == 0:
        raise ValueError("Louvain needs at least one edge")
    rng = make_rng(seed)
    w = g.adjacency().tocsr()
    membership = np.arange(g.node_count)
    q_prev = _level_modularity(w, np.arange(w.shape[0]))
    while True:
        comm = _move_nodes(w, rng)
        q = _level_modularity(w, comm)
        if q < q_prev - 1e-10:
            raise AssertionError(f"Louvain modularity decreased: {q_prev} -> {q}")
        n_comm = comm.max() + 1
        if n_comm == w.shape[0]:
            break
        membership = comm[membership]
        proj = sp.csr_matrix((np.ones(len(comm)), (np.arange(len(comm)), comm)),
                             shape=(len(comm), n_comm))
        w = (proj.T @ w @ proj).tocsr()
        q_prev = q
    _, first = np.unique(membership, return_index=True)
    relabel = np.empty(len(first), dtype=np.int64)
    relabel[np.argsort(first)] = np.arange(len(first))
    partition = relabel[np.unique(membership, return_inverse=True)[1]]
    return partition, modularity(g, partition)


# partition comparison ----------------------------------------------------------------


def _contingency(a, b) -> np.ndarray:
    _, ai = np.unique(np.asarray(a), return_inverse=True)
    _, bi = np.unique(np.asarray(b), return_inverse=True)
    table = np.zeros((ai.max() + 1, bi.max() + 1))
    np.add.at(table, (ai, bi), 1.0)
    return table


def _entropy(counts: np.ndarray) -> float:
    p = counts[counts > 0] / counts.sum()
    return float(-np.sum(p * np.log(p)))


def nmi(a, b) -> float:
    """Normalized mutual information with arithmetic-mean normalization."""
    if len(a) != len(b) or len(a) == 0:
        raise ValueError("labelings must be non-empty and of equal length")
    t = _contingency(a, b)
    n = t.sum()
    ha, hb = _entropy(t.sum(axis=1)), _entropy(t.sum(axis=0))
    if ha == 0.0 and hb == 0.0:
        return 1.0
    nz = t > 0
    outer = np.outer(t.sum(axis=1), t.sum(axis=0))
    mi = float(np.sum(t[nz] / n * np.log(t[nz] * n / outer[nz])))
    denom = 0.5 * (ha + hb)
    return float(min(max(mi / denom, 0.0), 1.0))


def ari(a, b) -> float:
    """Adjusted Rand index (Hubert and Arabie)."""
    if len(a) != len(b) or len(a) == 0:
        raise ValueError("labelings must be non-empty and of equal length")
    t = _contingency(a, b)
    comb = lambda x: x * (x - 1.0) / 2.0
    sum_ij = comb(t).sum()
    sum_a = comb(t.sum(axis=1)).sum()
    sum_b = comb(t.sum(axis=0)).sum()
    total = comb(t.sum())
    expected = sum_a * sum_b / total if total else 0.0
    max_index = 0.5 * (sum_a + sum_b)
    if max_index == expected:
        return 1.0
    return float((sum_ij - expected) / (max_index - expected))


def partition_stability(g_before: Graph, g_after, seed=42,
                        before_partition=None) -> tuple[float, float]:
    """NMI/ARI between Louvain partitions of the backbone before and after insertion."""
    after = g_after.graph if isinstance(g_after, AugmentedGraph) else g_after
    n = g_before.node_count
    if before_partition is None:
        before_partition, _ = louvain(g_before, seed)
    after_partition, _ = louvain(after, seed)
    restricted = after_partition[:n]
    return nmi(before_partition, restricted), ari(before_partition, restricted)


def edge_drop_stress(g: Graph, drop_frac: float = 0.1, seed=42, base_partition=None) -> dict:
    """Drop a uniform ``drop_frac`` share of edges and compare Louvain partitions."""
    if g.edge_count < 10:
        raise ValueError("edge-drop stress test needs at least 10 edges")
    rng = make_rng(seed)
    k = int(math.floor(drop_frac * g.edge_count))
    mask = np.zeros(g.edge_count, dtype=bool)
    mask[rng.choice(g.edge_count, size=k, replace=False)] = True
    dropped = g.without_edges(mask)
    if base_partition is None:
        base_partition, _ = louvain(g, seed)
    if dropped.edge_count:
        after, _ = louvain(dropped, seed)
    else:
        after = np.arange(g.node_count)
    ncomp, _ = dropped.connected_components()
    return {
        "nmi": nmi(base_partition, after),
        "ari": ari(base_partition, after),
        "dropped": k,
        "components_after": ncomp,
    }


# ranking metrics ---------------------------------------------------------------------


def _average_ranks(x: np.ndarray) -> np.ndarray:
    order = np.argsort(x, kind="mergesort")
    xs = x[order]
    ranks = np.empty(len(x))
    boundaries = np.flatnonzero(np.diff(xs)) + 1
    starts = np.concatenate([[0], boundaries])
    ends = np.concatenate([boundaries, [len(x)]])
    for s, e in zip(starts, ends):
        ranks[order[s:e]] = 0.5 * (s + e - 1) + 1.0
    return ranks


def roc_auc(pos_scores, neg_scores) -> float:
    """Mann-Whitney AUC; tied positive/negative pairs count one half."""
    pos = np.asarray(pos_scores, dtype=float)
    neg = np.asarray(neg_scores, dtype=float)
    if not len(pos) or not len(neg):
        raise ValueError("AUC needs positive and negative scores")
    ranks = _average_ranks(np.concatenate([pos, neg]))
    rpos = ranks[: len(pos)].sum()
    return float((rpos - len(pos) * (len(pos) + 1) / 2.0) / (len(pos) * len(neg)))


def average_precision(pos_scores, neg_scores) -> float:
    """Sum over score thresholds of (recall increase) x precision.

    Without ties this equals the mean of precision@rank over positive ranks;
    tied scores are treated as one threshold.
    """
    pos = np.asarray(pos_scores, dtype=float)
    neg = np.asarray(neg_scores, dtype=float)
    if not len(pos):
        raise ValueError("average precision needs positive scores")
    scores = np.concatenate([pos, neg])
    labels = np.concatenate([np.ones(len(pos)), np.zeros(len(neg))])
    order = np.argsort(-scores, kind="mergesort")
    scores, labels = scores[order], labels[order]
    tp = np.cumsum(labels)
    last = np.r_[np.flatnonzero(np.diff(scores)), len(scores) - 1]
    tp = tp[last]
    precision = tp / (last + 1.0)
    recall = tp / len(pos)
    return float(np.sum(np.diff(np.r_[0.0, recall]) * precision))


def common_neighbor_scores(g: Graph, pairs) -> np.ndarray:
    pairs = np.asarray(pairs, dtype=np.int64).reshape(-1, 2)
    a = g.adjacency()
    return np.asarray(a[pairs[:, 0]].multiply(a[pairs[:, 1]]).sum(axis=1)).ravel()


def link_prediction_scores(params: ModelParams, split, x_norm, g: Graph) -> dict:
    """Test-split AUC/AP of the edge decoder on posterior means, plus common neighbors.

    Encoding and the common-neighbor counts both use the training graph only.
    """
    if not len(split.test_pos) or not len(split.test_neg):
        raise ValueError("empty test split")
    train_graph = split.train_graph(g.node_count)
    mu, _ = encode(normalized_adjacency(train_graph), x_norm, params)

    def prob(pairs):
        return sigmoid(np.einsum("ij,ij->i", mu[pairs[:, 0]], mu[pairs[:, 1]]))

    p_pos, p_neg = prob(split.test_pos), prob(split.test_neg)
    c_pos = common_neighbor_scores(train_graph, split.test_pos)
    c_neg = common_neighbor_scores(train_graph, split.test_neg)
    return {
        "auc": roc_auc(p_pos, p_neg),
        "ap": average_precision(p_pos, p_neg),
        "cn_auc": roc_auc(c_pos, c_neg),
        "cn_ap": average_precision(c_pos, c_neg),
    }


# insertion diagnostics -----------------------------------------------------------------


@dataclass
class EdgeCompositionReport:
    go_count: int
    gg_count: int
    gg_ratio: float
    avg_generated_degree: float
    majority_gg_node_count: int
    generated_nodes: int

    def to_dict(self) -> dict:
        return asdict(self)


def edge_composition(ag: AugmentedGraph) -> EdgeCompositionReport:
    go = int(np.sum(ag.provenance == GO))
    gg = int(np.sum(ag.provenance == GG))
    m = ag.m_new
    n = ag.original_count
    if m == 0:
        return EdgeCompositionReport(go, gg, 0.0, 0.0, 0, 0)
    e = ag.new_edges
    gen_deg = np.zeros(m)
    gg_deg = np.zeros(m)
    for col in (0, 1):
        is_gen = e[:, col] >= n
        np.add.at(gen_deg, e[is_gen, col] - n, 1.0)
        both = is_gen & (e[:, 1 - col] >= n)
        np.add.at(gg_deg, e[both, col] - n, 1.0)
    majority = int(np.sum(gg_deg > 0.5 * gen_deg))
    total = go + gg
    return EdgeCompositionReport(
        go_count=go,
        gg_count=gg,
        gg_ratio=gg / total if total else 0.0,
        avg_generated_degree=float(gen_deg.mean()),
        majority_gg_node_count=majority,
        generated_nodes=m,
    )


@dataclass
class NoveltyReport:
    nn_dist_mean: float
    nn_dist_std: float
    mean_dist_to_original: float
    wasserstein: float
    diversity: float

    def to_dict(self) -> dict:
        return asdict(self)


def wasserstein_1d(u, v) -> float:
    """W1 between two empirical 1-D distributions: integral of |F_u - F_v|."""
    u = np.sort(np.asarray(u, dtype=float))
    v = np.sort(np.asarray(v, dtype=float))
    grid = np.sort(np.concatenate([u, v]))
    widths = np.diff(grid)
    fu = np.searchsorted(u, grid[:-1], side="right") / len(u)
    fv = np.searchsorted(v, grid[:-1], side="right") / len(v)
    return float(np.sum(np.abs(fu - fv) * widths))


def novelty_report(x_orig_norm, x_gen_norm) -> NoveltyReport:
    """Feature-space separation of generated rows from original rows (distance = 1 - cos)."""
    xo = np.asarray(getattr(x_orig_norm, "values", x_orig_norm), dtype=float)
    xg = np.asarray(getattr(x_gen_norm, "values", x_gen_norm), dtype=float)
    if xo.ndim != 2 or xg.ndim != 2 or xo.shape[1] != xg.shape[1]:
        raise ValueError("feature dimensions differ")
    if not len(xo) or not len(xg):
        raise ValueError("novelty needs non-empty original and generated sets")
    dist = np.clip(1.0 - similarity_matrix(xg, xo), 0.0, 2.0)
    nn = dist.min(axis=1)
    w = float(np.mean([wasserstein_1d(xg[:, k], xo[:, k]) for k in range(xo.shape[1])]))
    m = len(xg)
    if m >= 2:
        gg = np.clip(1.0 - similarity_matrix(xg, xg), 0.0, 2.0)
        diversity = float(gg[np.triu_indices(m, k=1)].mean())
    else:
        diversity = 0.0
    return NoveltyReport(
        nn_dist_mean=float(nn.mean()),
        nn_dist_std=float(nn.std()),
        mean_dist_to_original=float(dist.mean()),
        wasserstein=w,
        diversity=diversity,
    )


def backbone_preserved(g: Graph, ag: AugmentedGraph) -> bool:
    """True when the augmented graph restricted to original nodes equals ``g``."""
    sub = ag.graph.induced_subgraph(g.node_count)
    return sub.node_count == g.node_count and np.array_equal(sub.edges, g.edges)
