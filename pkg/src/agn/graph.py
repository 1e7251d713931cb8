"""Undirected simple graphs with node provenance, plus edge-list I/O.

Edges are stored canonically as an ``(E, 2)`` integer array with ``i < j``,
sorted lexicographically. Neighbor lists are exposed in CSR form
(``indptr``/``indices``), which is what the metric code iterates over.
Generated nodes always occupy the trailing index range ``[original_count, N)``.
"""

from __future__ import annotations

import logging
from functools import cached_property
from pathlib import Path
from typing import Iterable, Optional

import numpy as np
import scipy.sparse as sp

log = logging.getLogger(__name__)


class EdgeListError(ValueError):
    """Raised when an edge-list file cannot be parsed."""


def canonical_edges(edges: Iterable, node_count: Optional[int] = None) -> np.ndarray:
    """Return ``edges`` as a sorted, de-duplicated ``(E, 2)`` array with i<j.

    Self-loops are dropped.
    """
    arr = np.asarray(list(edges) if not isinstance(edges, np.ndarray) else edges, dtype=np.int64)
    if arr.size == 0:
        return np.empty((0, 2), dtype=np.int64)
    arr = arr.reshape(-1, 2)
    lo = np.minimum(arr[:, 0], arr[:, 1])
    hi = np.maximum(arr[:, 0], arr[:, 1])
    keep = lo != hi
    lo, hi = lo[keep], hi[keep]
    n = int(node_count) if node_count is not None else int(hi.max(initial=-1)) + 1
    codes = np.unique(lo * n + hi)
    return np.stack([codes // n, codes % n], axis=1)


class Graph:
    """Immutable undirected simple graph.

    Parameters
    ----------
    node_count : int
        Number of nodes ``N``; nodes are ``0..N-1``.
    edges : array-like of shape (E, 2)
        Edge endpoints. Must already be canonical (i<j, sorted, unique) unless
        ``canonicalize`` is true.
    weights : array-like of shape (E,), optional
        Per-edge weights in [0, 1], aligned with the canonical edge order.
    original_count : int, optional
        Number of original (non-generated) nodes. Defaults to ``N``.
    """

    def __init__(
        self,
        node_count: int,
        edges=(),
        weights=None,
        original_count: Optional[int] = None,
        canonicalize: bool = True,
    ):
        n = int(node_count)
        if n < 0:
            raise ValueError("node_count must be non-negative")
        arr = np.asarray(edges, dtype=np.int64).reshape(-1, 2)
        w = None if weights is None else np.asarray(weights, dtype=float).reshape(-1)
        if w is not None and len(w) != len(arr):
            raise ValueError("weights must align with edges")
        if canonicalize and len(arr):
            lo = np.minimum(arr[:, 0], arr[:, 1])
            hi = np.maximum(arr[:, 0], arr[:, 1])
            if np.any(lo == hi):
                raise ValueError("self-loops are not allowed")
            codes = lo * max(n, 1) + hi
            order = np.argsort(codes, kind="stable")
            codes = codes[order]
            if np.any(codes[1:] == codes[:-1]):
                raise ValueError("duplicate edges are not allowed")
            arr = np.stack([lo[order], hi[order]], axis=1)
            if w is not None:
                w = w[order]
        if len(arr):
            if arr.min() < 0 or arr.max() >= n:
                raise ValueError("edge endpoint out of range")
            if np.any(arr[:, 0] >= arr[:, 1]):
                raise ValueError("edges must be canonical (i<j)")
        if w is not None and len(w) and (np.nanmin(w) < 0.0 or np.nanmax(w) > 1.0):
            raise ValueError("edge weights must lie in [0, 1]")
        oc = n if original_count is None else int(original_count)
        if not 0 <= oc <= n:
            raise ValueError("original_count must be within [0, node_count]")

        arr.setflags(write=False)
        if w is not None:
            w.setflags(write=False)
        self._n = n
        self._edges = arr
        self._weights = w
        self._original_count = oc

    # basic accessors -------------------------------------------------------

    @property
    def node_count(self) -> int:
        return self._n

    @property
    def edges(self) -> np.ndarray:
        return self._edges

    @property
    def weights(self) -> Optional[np.ndarray]:
        return self._weights

    @property
    def edge_count(self) -> int:
        return len(self._edges)

    @property
    def original_count(self) -> int:
        return self._original_count

    @property
    def generated_count(self) -> int:
        return self._n - self._original_count

    @property
    def is_generated(self) -> np.ndarray:
        mask = np.zeros(self._n, dtype=bool)
        mask[self._original_count:] = True
        return mask

    @property
    def density(self) -> float:
        n = self._n
        return 0.0 if n < 2 else 2.0 * self.edge_count / (n * (n - 1))

    def __repr__(self) -> str:
        return (
            f"Graph(N={self._n}, E={self.edge_count}, "
            f"generated={self.generated_count})"
        )

    def __eq__(self, other) -> bool:
        if not isinstance(other, Graph):
            return NotImplemented
        return (
            self._n == other._n
            and self._original_count == other._original_count
            and np.array_equal(self._edges, other._edges)
        )

    __hash__ = None

    # neighborhood structure --------------------------------------------------

    @cached_property
    def degrees(self) -> np.ndarray:
        deg = np.bincount(self._edges.ravel(), minlength=self._n).astype(np.int64)
        deg.setflags(write=False)
        return deg

    @cached_property
    def _csr(self) -> tuple[np.ndarray, np.ndarray]:
        e = self._edges
        src = np.concatenate([e[:, 0], e[:, 1]])
        dst = np.concatenate([e[:, 1], e[:, 0]])
        order = np.lexsort((dst, src))
        indptr = np.zeros(self._n + 1, dtype=np.int64)
        np.cumsum(np.bincount(src, minlength=self._n), out=indptr[1:])
        indices = dst[order]
        indptr.setflags(write=False)
        indices.setflags(write=False)
        return indptr, indices

    @property
    def indptr(self) -> np.ndarray:
        return self._csr[0]

    @property
    def indices(self) -> np.ndarray:
        return self._csr[1]

    def neighbors(self, i: int) -> np.ndarray:
        """Sorted neighbor indices of node ``i``."""
        indptr, indices = self._csr
        return indices[indptr[i]:indptr[i + 1]]

    @cached_property
    def edge_codes(self) -> np.ndarray:
        """Sorted ``i*N + j`` codes of the canonical edges, for membership tests."""
        codes = self._edges[:, 0] * self._n + self._edges[:, 1]
        codes.setflags(write=False)
        return codes

    def has_edges(self, pairs) -> np.ndarray:
        pairs = np.asarray(pairs, dtype=np.int64).reshape(-1, 2)
        lo = np.minimum(pairs[:, 0], pairs[:, 1])
        hi = np.maximum(pairs[:, 0], pairs[:, 1])
        codes = lo * self._n + hi
        pos = np.searchsorted(self.edge_codes, codes)
        pos = np.minimum(pos, max(len(self.edge_codes) - 1, 0))
        if not len(self.edge_codes):
            return np.zeros(len(codes), dtype=bool)
        return (self.edge_codes[pos] == codes) & (lo != hi)

    def has_edge(self, i: int, j: int) -> bool:
        return bool(self.has_edges([[i, j]])[0])

    def adjacency(self) -> sp.csr_matrix:
        """Unweighted symmetric adjacency as a scipy CSR matrix."""
        indptr, indices = self._csr
        data = np.ones(len(indices), dtype=float)
        return sp.csr_matrix((data, indices, indptr), shape=(self._n, self._n))

    def dense_adjacency(self) -> np.ndarray:
        a = np.zeros((self._n, self._n))
        e = self._edges
        a[e[:, 0], e[:, 1]] = 1.0
        a[e[:, 1], e[:, 0]] = 1.0
        return a

    # derived graphs ----------------------------------------------------------

    def induced_subgraph(self, count: int) -> "Graph":
        """Subgraph induced on the first ``count`` nodes."""
        e = self._edges
        keep = e[:, 1] < count
        w = None if self._weights is None else self._weights[keep]
        return Graph(count, e[keep], w, canonicalize=False)

    def without_edges(self, mask: np.ndarray) -> "Graph":
        """Copy with the edges selected by boolean ``mask`` removed."""
        keep = ~np.asarray(mask, dtype=bool)
        w = None if self._weights is None else self._weights[keep]
        return Graph(self._n, self._edges[keep], w, self._original_count, canonicalize=False)

    def connected_components(self) -> tuple[int, np.ndarray]:
        from scipy.sparse.csgraph import connected_components

        if self._n == 0:
            return 0, np.empty(0, dtype=np.int64)
        count, labels = connected_components(self.adjacency(), directed=False)
        return int(count), labels


def normalized_adjacency(g: Graph) -> np.ndarray:
    """Dense ``D^-1/2 A D^-1/2``; isolated nodes give all-zero rows."""
    deg = g.degrees.astype(float)
    inv_sqrt = np.zeros_like(deg)
    nz = deg > 0
    inv_sqrt[nz] = 1.0 / np.sqrt(deg[nz])
    a = np.zeros((g.node_count, g.node_count))
    e = g.edges
    vals = inv_sqrt[e[:, 0]] * inv_sqrt[e[:, 1]]
    a[e[:, 0], e[:, 1]] = vals
    a[e[:, 1], e[:, 0]] = vals
    return a


# edge-list I/O -----------------------------------------------------------------


def _parse_header(line: str, header: dict) -> None:
    body = line.lstrip("#").strip()
    for token in body.split():
        if "=" in token:
            key, _, value = token.partition("=")
            header[key.strip()] = value.strip()


def load_edge_list(path, relabel: bool = False) -> Graph:
    """Read a whitespace-separated edge list.

    Lines starting with ``#`` are comments; ``# key=value`` comments are read as
    header fields (``nodes``, ``generated``). An optional third column is an
    edge weight. With ``relabel`` the node labels (any strings) are mapped to
    ``0..N-1`` in first-appearance order; otherwise labels must be non-negative
    integers and are used as indices directly.
    """
    path = Path(path)
    text = path.read_text(encoding="utf-8")
    header: dict[str, str] = {}
    labels: dict[str, int] = {}
    pairs: list[tuple[int, int]] = []
    weights: list[float] = []
    has_weights = None
    self_loops = 0

    def index_of(label: str, lineno: int) -> int:
        if relabel:
            return labels.setdefault(label, len(labels))
        try:
            idx = int(label)
        except ValueError:
            raise EdgeListError(f"{path}:{lineno}: node label {label!r} is not an integer") from None
        if idx < 0:
            raise EdgeListError(f"{path}:{lineno}: negative node label {idx}")
        return idx

    for lineno, raw in enumerate(text.splitlines(), start=1):
        line = raw.strip()
        if not line:
            continue
        if line.startswith("#"):
            _parse_header(line, header)
            continue
        parts = line.split()
        if len(parts) not in (2, 3):
            raise EdgeListError(f"{path}:{lineno}: expected 2 or 3 fields, got {len(parts)}")
        this_weighted = len(parts) == 3
        if has_weights is None:
            has_weights = this_weighted
        elif has_weights != this_weighted:
            raise EdgeListError(f"{path}:{lineno}: inconsistent column count")
        u = index_of(parts[0], lineno)
        v = index_of(parts[1], lineno)
        if u == v:
            self_loops += 1
            continue
        if this_weighted:
            try:
                weights.append(float(parts[2]))
            except ValueError:
                raise EdgeListError(f"{path}:{lineno}: bad weight {parts[2]!r}") from None
        pairs.append((u, v))

    if not pairs and not labels and "nodes" not in header:
        raise EdgeListError(f"{path}: no edges found")
    if self_loops:
        log.warning("%s: dropped %d self-loop(s)", path, self_loops)

    if relabel:
        n = len(labels)
    else:
        n = max((max(p) for p in pairs), default=-1) + 1
    if "nodes" in header:
        declared = int(header["nodes"])
        if declared < n:
            raise EdgeListError(f"{path}: header nodes={declared} but labels reach {n - 1}")
        n = declared
    generated = int(header.get("generated", 0))

    arr = np.asarray(pairs, dtype=np.int64).reshape(-1, 2)
    lo = np.minimum(arr[:, 0], arr[:, 1])
    hi = np.maximum(arr[:, 0], arr[:, 1])
    codes = lo * max(n, 1) + hi
    _, first = np.unique(codes, return_index=True)
    w = np.asarray(weights, dtype=float)[first] if has_weights else None
    return Graph(n, np.stack([lo[first], hi[first]], axis=1), w, original_count=n - generated)


def _format_weight(w: float) -> str:
    return repr(float(w))


def save_graph(g: Graph, path) -> None:
    """Write ``g`` as a canonical edge list with a provenance header."""
    path = Path(path)
    lines = [
        f"# nodes={g.node_count} edges={g.edge_count}",
        f"# original={g.original_count} generated={g.generated_count}",
    ]
    e = g.edges
    if g.weights is None:
        lines.extend(f"{i} {j}" for i, j in e.tolist())
    else:
        lines.extend(
            f"{i} {j} {_format_weight(w)}" for (i, j), w in zip(e.tolist(), g.weights.tolist())
        )
    path.write_text("\n".join(lines) + "\n", encoding="utf-8")
