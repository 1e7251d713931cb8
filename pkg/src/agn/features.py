"""Per-node structural features and two-stage (z-score, then min-max) scaling."""

from __future__ import annotations

import csv
from dataclasses import dataclass

import numpy as np

from .graph import Graph

FEATURE_NAMES = (
    "degree",
    "clustering",
    "neighbor_count",
    "mean_neighbor_degree",
    "frac_high_degree_neighbors",
    "std_neighbor_degree",
    "frac_higher_degree_neighbors",
)

BASE_SCHEMA = ("degree", "clustering", "neighbor_count", "mean_neighbor_degree")

SCHEMAS = {
    "community": BASE_SCHEMA,
    "multi_community": BASE_SCHEMA + ("frac_high_degree_neighbors",),
    "scale_free": BASE_SCHEMA + ("std_neighbor_degree", "frac_higher_degree_neighbors"),
}


def resolve_schema(schema) -> tuple[str, ...]:
    """Accept a schema name from ``SCHEMAS`` or an explicit sequence of feature names."""
    if isinstance(schema, str):
        if schema in SCHEMAS:
            return SCHEMAS[schema]
        schema = [s.strip() for s in schema.split(",") if s.strip()]
    schema = tuple(schema)
    unknown = [s for s in schema if s not in FEATURE_NAMES]
    if unknown or not schema:
        raise ValueError(f"unknown features {unknown}; valid names: {FEATURE_NAMES}")
    return schema


@dataclass
class FeatureMatrix:
    values: np.ndarray
    schema: tuple[str, ...]

    def __post_init__(self):
        self.values = np.asarray(self.values, dtype=float)
        if self.values.ndim != 2 or self.values.shape[1] != len(self.schema):
            raise ValueError("feature matrix width must match schema length")

    @property
    def dim(self) -> int:
        return len(self.schema)

    def __len__(self) -> int:
        return len(self.values)

    def to_csv(self, path) -> None:
        with open(path, "w", newline="", encoding="utf-8") as fh:
            w = csv.writer(fh)
            w.writerow(["node", *self.schema])
            for i, row in enumerate(self.values):
                w.writerow([i, *(repr(float(v)) for v in row)])

    @classmethod
    def from_csv(cls, path) -> "FeatureMatrix":
        with open(path, newline="", encoding="utf-8") as fh:
            rows = list(csv.reader(fh))
        schema = tuple(rows[0][1:])
        values = np.array([[float(v) for v in r[1:]] for r in rows[1:]], dtype=float)
        return cls(values.reshape(-1, len(schema)), schema)


def triangle_counts(g: Graph) -> np.ndarray:
    """Number of triangles through each node."""
    a = g.adjacency()
    return np.asarray((a @ a).multiply(a).sum(axis=1)).ravel() / 2.0


def local_clustering(g: Graph) -> np.ndarray:
    deg = g.degrees.astype(float)
    tri = triangle_counts(g)
    out = np.zeros(g.node_count)
    ok = deg >= 2
    out[ok] = 2.0 * tri[ok] / (deg[ok] * (deg[ok] - 1.0))
    return out


def extract_features(g: Graph, schema) -> FeatureMatrix:
    """Compute the requested structural features for every node.

    Isolated nodes get zero for clustering, neighbor-degree moments and
    fractions. A neighbor is "high-degree" when its degree exceeds the graph's
    mean degree; "higher-degree" compares against the node's own degree.
    The neighbor-degree standard deviation is the population form.
    """
    schema = resolve_schema(schema)
    n = g.node_count
    deg = g.degrees.astype(float)
    indptr, indices = g.indptr, g.indices
    owner = np.repeat(np.arange(n), np.diff(indptr))
    nbr_deg = deg[indices]
    safe = np.maximum(deg, 1.0)

    def per_node_sum(values):
        return np.bincount(owner, weights=values, minlength=n)

    cols = {}
    if "degree" in schema:
        cols["degree"] = deg
    if "neighbor_count" in schema:
        cols["neighbor_count"] = np.diff(indptr).astype(float)
    if "clustering" in schema:
        cols["clustering"] = local_clustering(g)
    need_mean = {"mean_neighbor_degree", "std_neighbor_degree"} & set(schema)
    if need_mean:
        mean_nd = np.where(deg > 0, per_node_sum(nbr_deg) / safe, 0.0)
        cols["mean_neighbor_degree"] = mean_nd
        if "std_neighbor_degree" in schema:
            sq = per_node_sum((nbr_deg - mean_nd[owner]) ** 2)
            cols["std_neighbor_degree"] = np.where(deg > 0, np.sqrt(sq / safe), 0.0)
    if "frac_high_degree_neighbors" in schema:
        cutoff = deg.mean() if n else 0.0
        cols["frac_high_degree_neighbors"] = np.where(
            deg > 0, per_node_sum((nbr_deg > cutoff).astype(float)) / safe, 0.0
        )
    if "frac_higher_degree_neighbors" in schema:
        cols["frac_higher_degree_neighbors"] = np.where(
            deg > 0, per_node_sum((nbr_deg > deg[owner]).astype(float)) / safe, 0.0
        )
    values = np.column_stack([cols[name] for name in schema]) if n else np.zeros((0, len(schema)))
    return FeatureMatrix(values, schema)


@dataclass
class NormParams:
    mean: np.ndarray
    std: np.ndarray
    std_min: np.ndarray
    std_max: np.ndarray

    def to_dict(self) -> dict:
        return {k: getattr(self, k).tolist() for k in ("mean", "std", "std_min", "std_max")}

    @classmethod
    def from_dict(cls, d: dict) -> "NormParams":
        return cls(*(np.asarray(d[k], dtype=float) for k in ("mean", "std", "std_min", "std_max")))


def normalize(x: FeatureMatrix) -> tuple[FeatureMatrix, NormParams]:
    """Z-score each column, then min-max the standardized values into [0, 1].

    A zero-variance column standardizes to zeros; a column whose standardized
    range is zero maps to 0.5 everywhere.
    """
    v = x.values
    if len(v) == 0:
        raise ValueError("cannot normalize an empty feature matrix")
    mu = v.mean(axis=0)
    sigma = v.std(axis=0)
    z = np.zeros_like(v)
    live = sigma > 0
    z[:, live] = (v[:, live] - mu[live]) / sigma[live]
    lo, hi = z.min(axis=0), z.max(axis=0)
    span = hi - lo
    out = np.full_like(v, 0.5)
    ok = span > 0
    out[:, ok] = np.clip((z[:, ok] - lo[ok]) / span[ok], 0.0, 1.0)
    return FeatureMatrix(out, x.schema), NormParams(mu, sigma, lo, hi)


def denormalize(x_norm, p: NormParams) -> FeatureMatrix:
    """Inverse min-max on standardized coordinates, then inverse z-score."""
    schema = x_norm.schema if isinstance(x_norm, FeatureMatrix) else None
    v = np.asarray(x_norm.values if schema else x_norm, dtype=float)
    if v.ndim != 2 or v.shape[1] != len(p.mean):
        raise ValueError(f"expected {len(p.mean)} feature columns, got shape {v.shape}")
    span = p.std_max - p.std_min
    z = np.where(span > 0, p.std_min + v * span, p.std_min)
    raw = np.where(p.std > 0, z * p.std + p.mean, p.mean)
    return FeatureMatrix(raw, schema or tuple(f"f{k}" for k in range(v.shape[1])))
