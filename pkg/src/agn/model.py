"""Variational graph autoencoder in plain numpy with hand-written gradients.

Row-vector convention throughout: node features are rows, layers compute
``H @ W``. The encoder is

    H1     = relu(A X W_gcn1)
    H2     = relu(A H1 W_gcn2)
    mu     = A H2 W_mu
    logvar = clip(A H2 W_logvar, -10, 10)

with ``A`` the symmetrically normalized adjacency. Latents
``z = mu + eps * exp(logvar / 2)`` feed an MLP feature decoder
(relu, relu, sigmoid) and an inner-product edge score ``sigmoid(z_i . z_j)``.
"""

from __future__ import annotations

from dataclasses import dataclass, field, fields
from typing import Optional

import numpy as np
import scipy.sparse as sp

from .rng import make_rng

LOGVAR_CLAMP = 10.0
CHECKPOINT_VERSION = 1

PARAM_NAMES = (
    "gcn1", "gcn2", "head_mu", "head_logvar",
    "mlp_w1", "mlp_b1", "mlp_w2", "mlp_b2", "mlp_w3", "mlp_b3",
)


def sigmoid(x):
    x = np.asarray(x, dtype=float)
    out = np.empty_like(x)
    pos = x >= 0
    out[pos] = 1.0 / (1.0 + np.exp(-x[pos]))
    ex = np.exp(x[~pos])
    out[~pos] = ex / (1.0 + ex)
    return out


def softplus(x):
    """``log(1 + exp(x))`` without overflow."""
    x = np.asarray(x, dtype=float)
    return np.maximum(x, 0.0) + np.log1p(np.exp(-np.abs(x)))


def relu(x):
    return np.maximum(x, 0.0)


def glorot(rng, fan_in: int, fan_out: int) -> np.ndarray:
    limit = np.sqrt(6.0 / (fan_in + fan_out))
    return rng.uniform(-limit, limit, size=(fan_in, fan_out))


@dataclass
class ModelParams:
    gcn1: np.ndarray
    gcn2: np.ndarray
    head_mu: np.ndarray
    head_logvar: np.ndarray
    mlp_w1: np.ndarray
    mlp_b1: np.ndarray
    mlp_w2: np.ndarray
    mlp_b2: np.ndarray
    mlp_w3: np.ndarray
    mlp_b3: np.ndarray

    @classmethod
    def init(cls, d: int, hidden: int = 64, latent: int = 32, seed=42) -> "ModelParams":
        """Glorot-uniform weights, zero biases."""
        rng = make_rng(seed)
        return cls(
            gcn1=glorot(rng, d, hidden),
            gcn2=glorot(rng, hidden, hidden),
            head_mu=glorot(rng, hidden, latent),
            head_logvar=glorot(rng, hidden, latent),
            mlp_w1=glorot(rng, latent, hidden),
            mlp_b1=np.zeros(hidden),
            mlp_w2=glorot(rng, hidden, hidden),
            mlp_b2=np.zeros(hidden),
            mlp_w3=glorot(rng, hidden, d),
            mlp_b3=np.zeros(d),
        )

    @property
    def feature_dim(self) -> int:
        return self.gcn1.shape[0]

    @property
    def hidden_dim(self) -> int:
        return self.gcn1.shape[1]

    @property
    def latent_dim(self) -> int:
        return self.head_mu.shape[1]

    def as_dict(self) -> dict[str, np.ndarray]:
        return {f.name: getattr(self, f.name) for f in fields(self)}

    def copy(self) -> "ModelParams":
        return ModelParams(**{k: v.copy() for k, v in self.as_dict().items()})

    def map(self, fn) -> "ModelParams":
        return ModelParams(**{k: fn(v) for k, v in self.as_dict().items()})

    def check_shapes(self) -> None:
        d, h, z = self.feature_dim, self.hidden_dim, self.latent_dim
        want = {
            "gcn1": (d, h), "gcn2": (h, h), "head_mu": (h, z), "head_logvar": (h, z),
            "mlp_w1": (z, h), "mlp_b1": (h,), "mlp_w2": (h, h), "mlp_b2": (h,),
            "mlp_w3": (h, d), "mlp_b3": (d,),
        }
        for name, shape in want.items():
            got = getattr(self, name).shape
            if got != shape:
                raise ValueError(f"{name} has shape {got}, expected {shape}")

    def save(self, path) -> None:
        """Write an ``.npz`` checkpoint; arrays carry their own shapes."""
        with open(path, "wb") as fh:
            np.savez(fh, __version__=np.array(CHECKPOINT_VERSION), **self.as_dict())

    @classmethod
    def load(cls, path) -> "ModelParams":
        with np.load(path) as data:
            version = int(data["__version__"])
            if version != CHECKPOINT_VERSION:
                raise ValueError(f"unsupported checkpoint version {version}")
            params = cls(**{name: data[name].copy() for name in PARAM_NAMES})
        params.check_shapes()
        return params


@dataclass
class LatentState:
    mu: np.ndarray
    logvar: np.ndarray
    eps: np.ndarray
    zmat: np.ndarray


@dataclass
class LossBreakdown:
    recon: float
    feat: float
    kl: float
    total: float
    beta: float
    gamma: float


# forward pieces ------------------------------------------------------------------


def _propagate(a_norm, h):
    return a_norm @ h


def encode(a_norm, x_norm, p: ModelParams) -> tuple[np.ndarray, np.ndarray]:
    """Posterior mean and (clamped) log-variance for every node."""
    x = np.asarray(getattr(x_norm, "values", x_norm), dtype=float)
    if x.shape[1] != p.feature_dim or a_norm.shape != (len(x), len(x)):
        raise ValueError("shape mismatch between adjacency, features and parameters")
    h1 = relu(_propagate(a_norm, x) @ p.gcn1)
    h2 = relu(_propagate(a_norm, h1) @ p.gcn2)
    ah2 = _propagate(a_norm, h2)
    mu = ah2 @ p.head_mu
    logvar = np.clip(ah2 @ p.head_logvar, -LOGVAR_CLAMP, LOGVAR_CLAMP)
    return mu, logvar


def reparameterize(mu, logvar, rng=None, eps=None) -> LatentState:
    """``z = mu + eps * exp(logvar/2)``; ``eps`` is drawn from ``rng`` unless given."""
    mu = np.asarray(mu, dtype=float)
    logvar = np.asarray(logvar, dtype=float)
    if mu.shape != logvar.shape:
        raise ValueError("mu and logvar must have equal shapes")
    if eps is None:
        eps = make_rng(rng).standard_normal(mu.shape)
    return LatentState(mu, logvar, eps, mu + eps * np.exp(0.5 * logvar))


def decode_features(zmat, p: ModelParams) -> np.ndarray:
    """MLP feature decoder; outputs lie in (0, 1)."""
    h1 = relu(zmat @ p.mlp_w1 + p.mlp_b1)
    h2 = relu(h1 @ p.mlp_w2 + p.mlp_b2)
    return sigmoid(h2 @ p.mlp_w3 + p.mlp_b3)


def edge_logit(zi, zj) -> float:
    return float(np.dot(zi, zj))


def edge_prob(zi, zj) -> float:
    return float(sigmoid(edge_logit(zi, zj)))


def pair_logits(zmat, pairs) -> np.ndarray:
    pairs = np.asarray(pairs, dtype=np.int64).reshape(-1, 2)
    return np.einsum("ij,ij->i", zmat[pairs[:, 0]], zmat[pairs[:, 1]])


def kl_divergence(mu, logvar) -> float:
    n = len(mu)
    return float(-0.5 / n * np.sum(1.0 + logvar - mu**2 - np.exp(logvar)))


def loss(x_norm, latent: LatentState, x_hat, pos_edges, neg_edges,
         beta: float = 1.0, gamma: float = 1.0) -> LossBreakdown:
    """Edge likelihood (separate means over positives and negatives) + feature MSE + KL."""
    x = np.asarray(getattr(x_norm, "values", x_norm), dtype=float)
    pos = np.asarray(pos_edges).reshape(-1, 2)
    neg = np.asarray(neg_edges).reshape(-1, 2)
    if not len(pos) or not len(neg):
        raise ValueError("loss needs at least one positive and one negative edge")
    s_pos = pair_logits(latent.zmat, pos)
    s_neg = pair_logits(latent.zmat, neg)
    recon = float(softplus(-s_pos).mean() + softplus(s_neg).mean())
    feat = float(np.mean((x_hat - x) ** 2))
    kl = kl_divergence(latent.mu, latent.logvar)
    return LossBreakdown(recon, feat, kl, recon + gamma * feat + beta * kl, beta, gamma)


# forward with cache + backward -------------------------------------------------


@dataclass
class ForwardCache:
    a_norm: np.ndarray
    ax: np.ndarray
    pre1: np.ndarray
    h1: np.ndarray
    ah1: np.ndarray
    pre2: np.ndarray
    h2: np.ndarray
    ah2: np.ndarray
    lv_raw: np.ndarray
    latent: LatentState
    m_pre1: np.ndarray
    m_h1: np.ndarray
    m_pre2: np.ndarray
    m_h2: np.ndarray
    x_hat: np.ndarray
    x: np.ndarray
    pos: np.ndarray
    neg: np.ndarray
    s_pos: np.ndarray
    s_neg: np.ndarray
    beta: float
    gamma: float
    breakdown: Optional[LossBreakdown] = field(default=None)


def forward(a_norm, x_norm, p: ModelParams, eps, pos_edges, neg_edges,
            beta: float = 1.0, gamma: float = 1.0, ax: Optional[np.ndarray] = None) -> ForwardCache:
    """Full forward pass with every activation kept for :func:`backward`.

    ``ax`` may carry a precomputed ``A @ X`` (constant across epochs).
    """
    x = np.asarray(getattr(x_norm, "values", x_norm), dtype=float)
    if ax is None:
        ax = _propagate(a_norm, x)
    pre1 = ax @ p.gcn1
    h1 = relu(pre1)
    ah1 = _propagate(a_norm, h1)
    pre2 = ah1 @ p.gcn2
    h2 = relu(pre2)
    ah2 = _propagate(a_norm, h2)
    mu = ah2 @ p.head_mu
    lv_raw = ah2 @ p.head_logvar
    logvar = np.clip(lv_raw, -LOGVAR_CLAMP, LOGVAR_CLAMP)
    latent = reparameterize(mu, logvar, eps=eps)
    z = latent.zmat
    m_pre1 = z @ p.mlp_w1 + p.mlp_b1
    m_h1 = relu(m_pre1)
    m_pre2 = m_h1 @ p.mlp_w2 + p.mlp_b2
    m_h2 = relu(m_pre2)
    x_hat = sigmoid(m_h2 @ p.mlp_w3 + p.mlp_b3)
    pos = np.asarray(pos_edges, dtype=np.int64).reshape(-1, 2)
    neg = np.asarray(neg_edges, dtype=np.int64).reshape(-1, 2)
    cache = ForwardCache(
        a_norm, ax, pre1, h1, ah1, pre2, h2, ah2, lv_raw, latent,
        m_pre1, m_h1, m_pre2, m_h2, x_hat, x, pos, neg,
        pair_logits(z, pos), pair_logits(z, neg), beta, gamma,
    )
    cache.breakdown = loss(x, latent, x_hat, pos, neg, beta, gamma)
    return cache


def _pair_grad(n: int, pairs: np.ndarray, coef: np.ndarray, z: np.ndarray) -> np.ndarray:
    """Gradient of ``sum_k coef_k * z_{i_k} . z_{j_k}`` with respect to ``z``."""
    s = sp.coo_matrix((coef, (pairs[:, 0], pairs[:, 1])), shape=(n, n)).tocsr()
    return s @ z + s.T @ z


def backward(cache: ForwardCache, p: ModelParams) -> ModelParams:
    """Exact gradients of the total loss for every parameter (``eps`` held fixed)."""
    c = cache
    lat = c.latent
    n, d = c.x.shape
    z = lat.zmat

    # edge reconstruction: d softplus(-s)/ds = sigmoid(s) - 1, d softplus(s)/ds = sigmoid(s)
    g_pos = (sigmoid(c.s_pos) - 1.0) / len(c.pos)
    g_neg = sigmoid(c.s_neg) / len(c.neg)
    dz = _pair_grad(n, np.vstack([c.pos, c.neg]), np.concatenate([g_pos, g_neg]), z)

    # feature decoder
    dx_hat = c.gamma * 2.0 * (c.x_hat - c.x) / (n * d)
    da3 = dx_hat * c.x_hat * (1.0 - c.x_hat)
    g_w3 = c.m_h2.T @ da3
    g_b3 = da3.sum(axis=0)
    da2 = (da3 @ p.mlp_w3.T) * (c.m_pre2 > 0)
    g_w2 = c.m_h1.T @ da2
    g_b2 = da2.sum(axis=0)
    da1 = (da2 @ p.mlp_w2.T) * (c.m_pre1 > 0)
    g_w1 = z.T @ da1
    g_b1 = da1.sum(axis=0)
    dz = dz + da1 @ p.mlp_w1.T

    # reparameterization and KL
    std = np.exp(0.5 * lat.logvar)
    d_mu = dz + c.beta * lat.mu / n
    d_lv = dz * lat.eps * 0.5 * std - c.beta * 0.5 / n * (1.0 - np.exp(lat.logvar))
    d_lv = d_lv * (np.abs(c.lv_raw) < LOGVAR_CLAMP)

    # encoder
    g_mu = c.ah2.T @ d_mu
    g_lv = c.ah2.T @ d_lv
    d_ah2 = d_mu @ p.head_mu.T + d_lv @ p.head_logvar.T
    d_pre2 = _propagate(c.a_norm, d_ah2) * (c.pre2 > 0)
    g_gcn2 = c.ah1.T @ d_pre2
    d_ah1 = d_pre2 @ p.gcn2.T
    d_pre1 = _propagate(c.a_norm, d_ah1) * (c.pre1 > 0)
    g_gcn1 = c.ax.T @ d_pre1

    return ModelParams(
        gcn1=g_gcn1, gcn2=g_gcn2, head_mu=g_mu, head_logvar=g_lv,
        mlp_w1=g_w1, mlp_b1=g_b1, mlp_w2=g_w2, mlp_b2=g_b2, mlp_w3=g_w3, mlp_b3=g_b3,
    )
