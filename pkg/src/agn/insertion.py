"""Node insertion: similarity-based attachment of decoded nodes, plus baselines.

All routines return an :class:`AugmentedGraph` whose first ``N`` nodes and
their mutual edges are exactly the input graph; generated nodes take indices
``N..N+M-1``.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import Optional

import numpy as np

from .features import NormParams, denormalize
from .graph import Graph, normalized_adjacency
from .model import ModelParams, decode_features, encode, sigmoid
from .rng import make_rng

GO = "GO"
GG = "GG"

VARIANTS = ("agn", "agn_original", "random", "preferential", "knn", "vanilla_vgae")


@dataclass
class InsertionConfig:
    m_new: int = 100
    top_k: int = 10
    tau: float = 0.5
    allow_gg: bool = False
    seed: int = 42

    def __post_init__(self):
        if self.m_new < 0 or self.top_k <= 0:
            raise ValueError("m_new must be >= 0 and top_k > 0")


@dataclass
class AugmentedGraph:
    graph: Graph
    new_edges: np.ndarray
    new_weights: np.ndarray
    provenance: np.ndarray
    gen_features_norm: np.ndarray
    gen_features_raw: Optional[np.ndarray] = None
    features_generated: bool = True
    candidates: int = 0
    rejected: int = 0
    isolated: int = 0
    method: str = ""
    extra: dict = field(default_factory=dict)

    @property
    def original_count(self) -> int:
        return self.graph.original_count

    @property
    def m_new(self) -> int:
        return self.graph.generated_count

    @property
    def binding_fraction(self) -> float:
        """Share of top-k candidate edges rejected by the threshold."""
        return self.rejected / self.candidates if self.candidates else 0.0


def cosine_similarity(u, v) -> float:
    """Cosine of the angle between ``u`` and ``v``; 0 if either is the zero vector."""
    u = np.asarray(u, dtype=float)
    v = np.asarray(v, dtype=float)
    nu, nv = np.linalg.norm(u), np.linalg.norm(v)
    if nu == 0.0 or nv == 0.0:
        return 0.0
    return float(np.dot(u, v) / (nu * nv))


def _unit_rows(x: np.ndarray) -> np.ndarray:
    norms = np.linalg.norm(x, axis=1, keepdims=True)
    return np.divide(x, norms, out=np.zeros_like(x), where=norms > 0)


def similarity_matrix(a: np.ndarray, b: np.ndarray) -> np.ndarray:
    """Pairwise cosine similarities between rows of ``a`` and rows of ``b``."""
    return _unit_rows(np.asarray(a, dtype=float)) @ _unit_rows(np.asarray(b, dtype=float)).T


def top_k_indices(scores: np.ndarray, k: int) -> np.ndarray:
    """Per-row top-k columns ordered by descending score, ties to the lower index."""
    k = min(k, scores.shape[1])
    return np.argsort(-scores, axis=1, kind="stable")[:, :k]


def _assemble(g: Graph, m: int, new_edges, weights, prov, gen_norm, **kw) -> AugmentedGraph:
    n = g.node_count
    new_edges = np.asarray(new_edges, dtype=np.int64).reshape(-1, 2)
    weights = np.asarray(weights, dtype=float).reshape(-1)
    old_w = g.weights if g.weights is not None else np.ones(g.edge_count)
    all_edges = np.vstack([g.edges, new_edges])
    all_w = np.concatenate([old_w, np.clip(weights, 0.0, 1.0)])
    graph = Graph(n + m, all_edges, all_w, original_count=n)
    deg = graph.degrees[n:]
    gen_norm = np.asarray(gen_norm, dtype=float)
    if gen_norm.ndim != 2:
        gen_norm = gen_norm.reshape(m, -1)
    return AugmentedGraph(
        graph=graph,
        new_edges=new_edges,
        new_weights=weights,
        provenance=np.asarray(prov, dtype="<U2"),
        gen_features_norm=gen_norm,
        isolated=int(np.sum(deg == 0)),
        **kw,
    )


def attach_by_similarity(g: Graph, x_norm, gen_norm, top_k: int, tau: float, allow_gg: bool):
    """Top-k cosine wiring of generated rows to original rows, thresholded at ``tau``.

    Returns ``(edges, weights, provenance, candidates, rejected)`` where edges
    use augmented-graph indices.
    """
    x = np.asarray(getattr(x_norm, "values", x_norm), dtype=float)
    gen = np.asarray(gen_norm, dtype=float)
    n, m = g.node_count, len(gen)
    if m == 0:
        return np.empty((0, 2), dtype=np.int64), np.empty(0), np.empty(0, dtype="<U2"), 0, 0
    if top_k > n:
        raise ValueError(f"top_k={top_k} exceeds the number of original nodes {n}")
    gen_unit = _unit_rows(gen)
    sim = gen_unit @ _unit_rows(x).T
    top = top_k_indices(sim, top_k)
    top_sim = np.take_along_axis(sim, top, axis=1)
    keep = top_sim >= tau
    gen_idx = np.repeat(np.arange(m), top.shape[1]).reshape(top.shape)
    edges = [np.stack([top[keep], n + gen_idx[keep]], axis=1)]
    weights = [top_sim[keep]]
    prov = [np.full(int(keep.sum()), GO)]
    if allow_gg and m > 1:
        gg_sim = gen_unit @ gen_unit.T
        ii, jj = np.triu_indices(m, k=1)
        s = gg_sim[ii, jj]
        ok = s >= tau
        edges.append(np.stack([n + ii[ok], n + jj[ok]], axis=1))
        weights.append(s[ok])
        prov.append(np.full(int(ok.sum()), GG))
    candidates = int(top.size)
    return (np.vstack(edges), np.concatenate(weights), np.concatenate(prov),
            candidates, candidates - int(keep.sum()))


def sample_generated_features(params: ModelParams, m: int, rng, latents=None) -> tuple[np.ndarray, np.ndarray]:
    """Draw ``m`` latents from the standard-normal prior and decode them."""
    if latents is None:
        latents = make_rng(rng).standard_normal((m, params.latent_dim))
    latents = np.asarray(latents, dtype=float).reshape(m, params.latent_dim)
    return latents, decode_features(latents, params)


def insert_agn(g: Graph, x_norm, params: ModelParams, cfg: InsertionConfig,
               rng=None, norm_params: Optional[NormParams] = None, latents=None) -> AugmentedGraph:
    """Decode prior samples into features and wire them by cosine similarity.

    ``cfg.allow_gg`` additionally links every generated pair whose similarity
    reaches ``tau`` (no top-k cap among generated nodes).
    """
    rng = make_rng(cfg.seed if rng is None else rng)
    m = cfg.m_new
    latents, gen = sample_generated_features(params, m, rng, latents)
    edges, w, prov, cand, rej = attach_by_similarity(g, x_norm, gen, cfg.top_k, cfg.tau, cfg.allow_gg)
    raw = denormalize(gen, norm_params).values if norm_params is not None and m else None
    return _assemble(g, m, edges, w, prov, gen, gen_features_raw=raw, candidates=cand,
                     rejected=rej, method="agn_original" if cfg.allow_gg else "agn",
                     extra={"latents": latents})


def _sample_attach(g: Graph, m: int, k: int, rng, probs=None):
    n = g.node_count
    edges = np.empty((m * k, 2), dtype=np.int64)
    for i in range(m):
        targets = np.sort(rng.choice(n, size=k, replace=False, p=probs))
        edges[i * k:(i + 1) * k, 0] = targets
        edges[i * k:(i + 1) * k, 1] = n + i
    return edges


def _zero_features(x_norm, m: int) -> np.ndarray:
    d = np.asarray(getattr(x_norm, "values", x_norm)).shape[1] if x_norm is not None else 0
    return np.zeros((m, d))


def insert_random(g: Graph, cfg: InsertionConfig, rng=None, x_norm=None) -> AugmentedGraph:
    """Each new node links to ``k`` distinct originals chosen uniformly; weight 1."""
    rng = make_rng(cfg.seed if rng is None else rng)
    if cfg.top_k > g.node_count:
        raise ValueError(f"top_k={cfg.top_k} exceeds node count {g.node_count}")
    m = cfg.m_new
    edges = _sample_attach(g, m, cfg.top_k, rng)
    return _assemble(g, m, edges, np.ones(len(edges)), np.full(len(edges), GO),
                     _zero_features(x_norm, m), features_generated=False, method="random")


def insert_preferential(g: Graph, cfg: InsertionConfig, rng=None, x_norm=None) -> AugmentedGraph:
    """Each new node links to ``k`` distinct originals drawn proportionally to degree.

    Degrees are those of the input graph; new nodes do not change them.
    """
    rng = make_rng(cfg.seed if rng is None else rng)
    deg = g.degrees.astype(float)
    if cfg.top_k > int(np.count_nonzero(deg)):
        raise ValueError("top_k exceeds the number of nodes with non-zero degree")
    m = cfg.m_new
    edges = _sample_attach(g, m, cfg.top_k, rng, probs=deg / deg.sum())
    return _assemble(g, m, edges, np.ones(len(edges)), np.full(len(edges), GO),
                     _zero_features(x_norm, m), features_generated=False, method="preferential")


def insert_knn_features(g: Graph, x_norm, cfg: InsertionConfig, rng=None,
                        norm_params: Optional[NormParams] = None) -> AugmentedGraph:
    """Uniform random features in [0,1]^d, then the same top-k/threshold wiring."""
    rng = make_rng(cfg.seed if rng is None else rng)
    x = np.asarray(getattr(x_norm, "values", x_norm), dtype=float)
    m = cfg.m_new
    gen = rng.random((m, x.shape[1]))
    edges, w, prov, cand, rej = attach_by_similarity(g, x, gen, cfg.top_k, cfg.tau, False)
    raw = denormalize(gen, norm_params).values if norm_params is not None and m else None
    return _assemble(g, m, edges, w, prov, gen, gen_features_raw=raw, candidates=cand,
                     rejected=rej, method="knn")


def insert_vanilla_vgae(g: Graph, x_norm, params: ModelParams, cfg: InsertionConfig, rng=None,
                        norm_params: Optional[NormParams] = None, latents=None,
                        a_norm=None) -> AugmentedGraph:
    """Wire prior samples to originals with the inner-product decoder.

    Each generated latent is scored against every original posterior mean;
    the top-k with probability >= 0.5 (logit >= 0) are linked, weight = probability.
    """
    rng = make_rng(cfg.seed if rng is None else rng)
    m = cfg.m_new
    n = g.node_count
    if cfg.top_k > n:
        raise ValueError(f"top_k={cfg.top_k} exceeds node count {n}")
    latents, gen = sample_generated_features(params, m, rng, latents)
    if a_norm is None:
        a_norm = normalized_adjacency(g)
    mu, _ = encode(a_norm, x_norm, params)
    logits = latents @ mu.T
    top = top_k_indices(logits, cfg.top_k)
    top_logit = np.take_along_axis(logits, top, axis=1)
    keep = top_logit >= 0.0
    gen_idx = np.repeat(np.arange(m), top.shape[1]).reshape(top.shape)
    edges = np.stack([top[keep], n + gen_idx[keep]], axis=1)
    probs = sigmoid(top_logit[keep])
    raw = denormalize(gen, norm_params).values if norm_params is not None and m else None
    return _assemble(g, m, edges, probs, np.full(len(edges), GO), gen, gen_features_raw=raw,
                     candidates=int(top.size), rejected=int(top.size - keep.sum()),
                     method="vanilla_vgae", extra={"latents": latents})


def insert_variant(name: str, g: Graph, x_norm, params: ModelParams, cfg: InsertionConfig,
                   norm_params: Optional[NormParams] = None, a_norm=None) -> AugmentedGraph:
    """Dispatch to an insertion routine by variant name (see ``VARIANTS``)."""
    rng = make_rng(cfg.seed)
    if name == "agn":
        return insert_agn(g, x_norm, params, _with(cfg, allow_gg=False), rng, norm_params)
    if name == "agn_original":
        return insert_agn(g, x_norm, params, _with(cfg, allow_gg=True), rng, norm_params)
    if name == "random":
        return insert_random(g, cfg, rng, x_norm)
    if name == "preferential":
        return insert_preferential(g, cfg, rng, x_norm)
    if name == "knn":
        return insert_knn_features(g, x_norm, cfg, rng, norm_params)
    if name == "vanilla_vgae":
        return insert_vanilla_vgae(g, x_norm, params, cfg, rng, norm_params, a_norm=a_norm)
    raise KeyError(f"unknown variant {name!r}; choose from {VARIANTS}")


def _with(cfg: InsertionConfig, **changes) -> InsertionConfig:
    data = dict(cfg.__dict__)
    data.update(changes)
    return InsertionConfig(**data)
