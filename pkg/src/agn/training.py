"""Edge splitting, negative sampling, Adam and the early-stopped training loop."""

from __future__ import annotations

import csv
import logging
import math
from dataclasses import asdict, dataclass, field

import numpy as np

from .graph import Graph, normalized_adjacency
from .model import ModelParams, backward, forward
from .rng import make_rng

log = logging.getLogger(__name__)


class TrainingDiverged(RuntimeError):
    pass


# edge split ----------------------------------------------------------------------


def sample_non_edges(g: Graph, count: int, rng, exclude=None, unique: bool = True) -> np.ndarray:
    """Draw ``count`` node pairs (i<j) that are not edges of ``g``.

    Pairs are uniform over non-edges. With ``unique`` no pair repeats, and
    pairs whose codes appear in ``exclude`` (sorted ``i*N+j`` codes) are
    skipped as well.
    """
    n = g.node_count
    total_non_edges = n * (n - 1) // 2 - g.edge_count
    excluded = np.empty(0, dtype=np.int64) if exclude is None else np.asarray(exclude, dtype=np.int64)
    if count <= 0:
        return np.empty((0, 2), dtype=np.int64)
    if total_non_edges <= 0 or (unique and count > total_non_edges - len(excluded)):
        raise ValueError(f"cannot draw {count} negative pairs; graph has {total_non_edges} non-edges")
    forbidden = np.union1d(g.edge_codes, excluded) if len(excluded) else g.edge_codes
    chosen: list[np.ndarray] = []
    have = 0
    seen = np.empty(0, dtype=np.int64)
    while have < count:
        batch = max(2 * (count - have), 64)
        i = rng.integers(0, n, size=batch)
        j = rng.integers(0, n, size=batch)
        ok = i != j
        lo = np.minimum(i, j)[ok]
        hi = np.maximum(i, j)[ok]
        codes = lo * n + hi
        pos = np.searchsorted(forbidden, codes)
        hit = (pos < len(forbidden)) & (forbidden[np.minimum(pos, len(forbidden) - 1)] == codes)
        codes = codes[~hit]
        if unique:
            _, first = np.unique(codes, return_index=True)
            codes = codes[np.sort(first)]
            codes = codes[~np.isin(codes, seen)]
            seen = np.union1d(seen, codes)
        codes = codes[: count - have]
        chosen.append(codes)
        have += len(codes)
    codes = np.concatenate(chosen)
    return np.stack([codes // n, codes % n], axis=1)


@dataclass
class EdgeSplit:
    train_pos: np.ndarray
    val_pos: np.ndarray
    test_pos: np.ndarray
    val_neg: np.ndarray
    test_neg: np.ndarray
    train_neg: np.ndarray = field(default=None)

    def train_graph(self, node_count: int) -> Graph:
        """Graph used for message passing during training (train positives only)."""
        return Graph(node_count, self.train_pos)

    def save(self, path) -> None:
        arrays = {k: v for k, v in asdict(self).items() if v is not None}
        with open(path, "wb") as fh:
            np.savez(fh, **arrays)

    @classmethod
    def load(cls, path) -> "EdgeSplit":
        with np.load(path) as data:
            return cls(**{k: data[k].copy() for k in data.files})


def split_edges(g: Graph, ratios=(0.8, 0.1, 0.1), seed=42) -> EdgeSplit:
    """Shuffle the canonical edges and cut them into train/val/test positives.

    Validation and test sizes are rounded to nearest; train takes the rest.
    Validation and test negatives are sampled once from non-edges of ``g``
    and are disjoint from each other.
    """
    if len(ratios) != 3 or abs(sum(ratios) - 1.0) > 1e-9:
        raise ValueError("ratios must be three fractions summing to 1")
    e = g.edge_count
    if e < 10:
        raise ValueError(f"need at least 10 edges to split, got {e}")
    rng = make_rng(seed)
    n_val = int(round(ratios[1] * e))
    n_test = int(round(ratios[2] * e))
    n_train = e - n_val - n_test
    if min(n_val, n_test, n_train) < 1:
        raise ValueError("split ratios leave an empty partition")
    order = rng.permutation(e)
    edges = g.edges[order]
    train_pos = edges[:n_train]
    val_pos = edges[n_train:n_train + n_val]
    test_pos = edges[n_train + n_val:]
    val_neg = sample_non_edges(g, n_val, rng)
    n = g.node_count
    test_neg = sample_non_edges(g, n_test, rng, exclude=np.sort(val_neg[:, 0] * n + val_neg[:, 1]))
    return EdgeSplit(train_pos, val_pos, test_pos, val_neg, test_neg)


# optimizer -------------------------------------------------------------------------


@dataclass
class AdamState:
    m: ModelParams
    v: ModelParams
    t: int = 0

    @classmethod
    def zeros_like(cls, p: ModelParams) -> "AdamState":
        return cls(p.map(np.zeros_like), p.map(np.zeros_like), 0)


def adam_step(params: ModelParams, grads: ModelParams, state: AdamState, lr: float,
              weight_decay: float = 0.0, beta1: float = 0.9, beta2: float = 0.999,
              eps: float = 1e-8) -> tuple[ModelParams, AdamState]:
    """One Adam update with coupled L2 decay (``grad += weight_decay * param``).

    Returns new parameter and state objects; the inputs are not modified.
    """
    t = state.t + 1
    bc1 = 1.0 - beta1**t
    bc2 = 1.0 - beta2**t
    new_p, new_m, new_v = {}, {}, {}
    pd, gd, md, vd = params.as_dict(), grads.as_dict(), state.m.as_dict(), state.v.as_dict()
    for name, w in pd.items():
        g = gd[name] + weight_decay * w
        m = beta1 * md[name] + (1.0 - beta1) * g
        v = beta2 * vd[name] + (1.0 - beta2) * g * g
        new_m[name] = m
        new_v[name] = v
        new_p[name] = w - lr * (m / bc1) / (np.sqrt(v / bc2) + eps)
    return ModelParams(**new_p), AdamState(ModelParams(**new_m), ModelParams(**new_v), t)


# training loop ----------------------------------------------------------------------


@dataclass
class TrainConfig:
    lr: float = 0.001
    weight_decay: float = 1e-5
    max_epochs: int = 200
    patience: int = 20
    beta: float = 1.0
    gamma: float = 1.0
    seed: int = 42
    neg_per_pos: int = 1
    hidden: int = 64
    latent: int = 32
    adam_beta1: float = 0.9
    adam_beta2: float = 0.999
    adam_eps: float = 1e-8

    def __post_init__(self):
        if self.lr <= 0 or self.max_epochs <= 0 or self.neg_per_pos <= 0:
            raise ValueError("lr, max_epochs and neg_per_pos must be positive")
        if self.weight_decay < 0 or self.patience < 0:
            raise ValueError("weight_decay and patience must be non-negative")
        if self.patience > self.max_epochs:
            raise ValueError("patience cannot exceed max_epochs")


@dataclass
class EpochRecord:
    epoch: int
    recon: float
    feat: float
    kl: float
    total: float
    val_total: float
    best_val: float
    improved: bool


@dataclass
class TrainResult:
    params: ModelParams
    history: list[EpochRecord]
    best_epoch: int
    best_val: float
    val_eps: np.ndarray

    def write_history(self, path) -> None:
        with open(path, "w", newline="", encoding="utf-8") as fh:
            w = csv.writer(fh)
            w.writerow(["epoch", "recon", "feat", "kl", "total", "val_total"])
            for r in self.history:
                w.writerow([r.epoch] + [f"{v:.6g}" for v in (r.recon, r.feat, r.kl, r.total, r.val_total)])


def validation_loss(a_norm, x, params: ModelParams, split: EdgeSplit, val_eps, cfg: TrainConfig, ax=None):
    cache = forward(a_norm, x, params, val_eps, split.val_pos, split.val_neg, cfg.beta, cfg.gamma, ax=ax)
    return cache.breakdown


def train(g: Graph, x_norm, cfg: TrainConfig = TrainConfig(), split: EdgeSplit = None) -> TrainResult:
    """Fit the autoencoder with Adam and early stopping on validation loss.

    Message passing uses only the training positives. Training negatives are
    redrawn every epoch; the validation loss uses one noise draw fixed for the
    whole run so that epochs are compared on equal terms. The best
    validation checkpoint is returned.
    """
    x = np.asarray(getattr(x_norm, "values", x_norm), dtype=float)
    if split is None:
        split = split_edges(g, seed=cfg.seed)
    n, d = x.shape
    rng = make_rng(cfg.seed)
    params = ModelParams.init(d, cfg.hidden, cfg.latent, seed=rng)
    val_eps = rng.standard_normal((n, cfg.latent))
    a_norm = normalized_adjacency(split.train_graph(n))
    ax = a_norm @ x
    state = AdamState.zeros_like(params)

    best = params.copy()
    best_val = math.inf
    best_epoch = 0
    waited = 0
    history: list[EpochRecord] = []
    n_neg = len(split.train_pos) * cfg.neg_per_pos
    for epoch in range(1, cfg.max_epochs + 1):
        neg = sample_non_edges(g, n_neg, rng, unique=False)
        eps = rng.standard_normal((n, cfg.latent))
        cache = forward(a_norm, x, params, eps, split.train_pos, neg, cfg.beta, cfg.gamma, ax=ax)
        tr = cache.breakdown
        if not math.isfinite(tr.total):
            raise TrainingDiverged(f"non-finite training loss at epoch {epoch}: {tr}")
        grads = backward(cache, params)
        params, state = adam_step(params, grads, state, cfg.lr, cfg.weight_decay,
                                  cfg.adam_beta1, cfg.adam_beta2, cfg.adam_eps)
        val = validation_loss(a_norm, x, params, split, val_eps, cfg, ax=ax).total
        if not math.isfinite(val):
            raise TrainingDiverged(f"non-finite validation loss at epoch {epoch}")
        improved = val < best_val
        if improved:
            best_val, best, best_epoch, waited = val, params.copy(), epoch, 0
        else:
            waited += 1
        history.append(EpochRecord(epoch, tr.recon, tr.feat, tr.kl, tr.total, val, best_val, improved))
        if not improved and waited >= cfg.patience:
            log.info("early stop at epoch %d (best %d, val %.6g)", epoch, best_epoch, best_val)
            break
    return TrainResult(best, history, best_epoch, best_val, val_eps)
