"""Seeded synthetic graph generators and the two bundled real graphs."""

from __future__ import annotations

from dataclasses import dataclass, field
from importlib import resources

import numpy as np

from .graph import Graph, load_edge_list
from .rng import make_rng


@dataclass(frozen=True)
class SbmSpec:
    block_sizes: tuple[int, ...]
    p_within: float
    p_between: float
    seed: int = 42

    def __post_init__(self):
        object.__setattr__(self, "block_sizes", tuple(int(b) for b in self.block_sizes))
        if not self.block_sizes or any(b <= 0 for b in self.block_sizes):
            raise ValueError("block sizes must be positive")
        for p in (self.p_within, self.p_between):
            if not 0.0 <= p <= 1.0:
                raise ValueError("probabilities must lie in [0, 1]")

    @property
    def n(self) -> int:
        return sum(self.block_sizes)

    def expected_edges(self) -> float:
        n = self.n
        within = sum(b * (b - 1) / 2 for b in self.block_sizes)
        return self.p_within * within + self.p_between * (n * (n - 1) / 2 - within)

    def expected_density(self) -> float:
        n = self.n
        return self.expected_edges() / (n * (n - 1) / 2)


@dataclass(frozen=True)
class BaSpec:
    n: int
    m: int
    seed: int = 42

    def __post_init__(self):
        if not 1 <= self.m < self.n:
            raise ValueError("need 1 <= m < n")


@dataclass
class LabeledGraph:
    graph: Graph
    labels: np.ndarray = field(default=None)


def gen_sbm(spec: SbmSpec) -> LabeledGraph:
    """Stochastic block model; every node pair is an independent Bernoulli draw.

    One uniform is drawn per pair ``i<j`` in row-major order of the upper
    triangle, so the edge set is a pure function of ``spec``.
    """
    rng = make_rng(spec.seed)
    labels = np.repeat(np.arange(len(spec.block_sizes)), spec.block_sizes)
    n = len(labels)
    rows, cols = np.triu_indices(n, k=1)
    same = labels[rows] == labels[cols]
    prob = np.where(same, spec.p_within, spec.p_between)
    hit = rng.random(len(rows)) < prob
    g = Graph(n, np.stack([rows[hit], cols[hit]], axis=1), canonicalize=False)
    return LabeledGraph(g, labels)


def gen_ba(spec: BaSpec) -> Graph:
    """Barabasi-Albert growth from ``m`` isolated seed nodes.

    Each arriving node picks ``m`` distinct targets without replacement with
    probability proportional to current degree; the first arrival (all degrees
    zero) picks uniformly, i.e. links to every seed.
    """
    rng = make_rng(spec.seed)
    n, m = spec.n, spec.m
    deg = np.zeros(n, dtype=float)
    edges = np.empty((m * (n - m), 2), dtype=np.int64)
    row = 0
    for t in range(m, n):
        weights = deg[:t]
        total = weights.sum()
        if total == 0:
            targets = rng.choice(t, size=m, replace=False)
        else:
            targets = rng.choice(t, size=m, replace=False, p=weights / total)
        edges[row:row + m, 0] = targets
        edges[row:row + m, 1] = t
        row += m
        deg[targets] += 1
        deg[t] = m
    return Graph(n, edges)


BUILTIN_GRAPHS = ("karate", "lesmis")


def builtin_graph(name: str) -> Graph:
    """Load a bundled real graph: ``karate`` (34 nodes) or ``lesmis`` (77 nodes)."""
    if name not in BUILTIN_GRAPHS:
        raise KeyError(f"unknown built-in graph {name!r}; choose from {BUILTIN_GRAPHS}")
    ref = resources.files("agn") / "data" / f"{name}.txt"
    with resources.as_file(ref) as path:
        # karate labels are already 0..33; lesmis uses character names
        return load_edge_list(path, relabel=(name == "lesmis"))
