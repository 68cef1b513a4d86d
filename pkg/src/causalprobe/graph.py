"""
Directed graphs over integer-indexed nodes.

Graphs are stored as dense ``n x n`` 0/1 matrices where ``adj[i, j] == 1``
means an edge ``i -> j``.  Everything in this module is a pure function of
its inputs; random generators are passed explicitly.
"""

from __future__ import annotations

import heapq
import json
from dataclasses import dataclass

import numpy as np

FAMILIES = ("chain", "bidiag", "collider", "jungle", "fulldag", "random")


class CycleError(ValueError):
    """Raised when an operation needs an acyclic graph and gets a cyclic one."""


@dataclass(frozen=True, eq=False)
class Dag:
    """Directed acyclic graph as a binary adjacency matrix."""

    adj: np.ndarray

    def __post_init__(self):
        adj = np.asarray(self.adj)
        if adj.ndim != 2 or adj.shape[0] != adj.shape[1]:
            raise ValueError(f"adjacency must be square, got shape {adj.shape}")
        if adj.shape[0] < 1:
            raise ValueError("a Dag needs at least one node")
        adj = (adj != 0).astype(np.int8)
        if np.any(np.diag(adj)):
            raise ValueError("self-loops are not allowed")
        if not is_acyclic(adj):
            raise CycleError("adjacency matrix contains a directed cycle")
        adj.setflags(write=False)
        object.__setattr__(self, "adj", adj)

    @property
    def n(self) -> int:
        return self.adj.shape[0]

    def __eq__(self, other):
        return isinstance(other, Dag) and np.array_equal(self.adj, other.adj)

    def __hash__(self):
        return hash(self.adj.tobytes())

    def __repr__(self):
        return f"Dag(n={self.n}, edges={self.edges()})"

    def edges(self) -> list[tuple[int, int]]:
        return [(int(i), int(j)) for i, j in zip(*np.nonzero(self.adj))]

    def parents(self, j: int) -> list[int]:
        return [int(i) for i in np.flatnonzero(self.adj[:, j])]

    def children(self, i: int) -> list[int]:
        return [int(j) for j in np.flatnonzero(self.adj[i])]

    def descendants(self, i: int) -> set[int]:
        seen: set[int] = set()
        stack = self.children(i)
        while stack:
            v = stack.pop()
            if v not in seen:
                seen.add(v)
                stack.extend(self.children(v))
        return seen

    @classmethod
    def from_edges(cls, n: int, edges) -> "Dag":
        adj = np.zeros((n, n), dtype=np.int8)
        for i, j in edges:
            adj[i, j] = 1
        return cls(adj)

    @classmethod
    def empty(cls, n: int) -> "Dag":
        return cls(np.zeros((n, n), dtype=np.int8))

    # -- serialization -------------------------------------------------
    def to_json(self) -> str:
        return json.dumps(self.adj.tolist())

    @classmethod
    def from_json(cls, text: str) -> "Dag":
        return cls(np.array(json.loads(text), dtype=np.int8))

    def to_edge_list(self) -> str:
        """Human-readable ``i -> j`` lines."""
        return "".join(f"{i} -> {j}\n" for i, j in self.edges())

    @classmethod
    def from_edge_list(cls, text: str, n: int) -> "Dag":
        edges = []
        for line in text.splitlines():
            line = line.strip()
            if not line or line.startswith("#"):
                continue
            src, dst = line.split("->")
            edges.append((int(src), int(dst)))
        return cls.from_edges(n, edges)


def _as_matrix(adj) -> np.ndarray:
    if isinstance(adj, Dag):
        return adj.adj
    return np.asarray(adj)


def is_acyclic(adj) -> bool:
    """Return True iff the directed graph has a topological order (Kahn)."""
    a = (_as_matrix(adj) != 0)
    n = a.shape[0]
    indeg = a.sum(axis=0).astype(int)
    stack = [v for v in range(n) if indeg[v] == 0]
    seen = 0
    while stack:
        v = stack.pop()
        seen += 1
        for w in np.flatnonzero(a[v]):
            indeg[w] -= 1
            if indeg[w] == 0:
                stack.append(int(w))
    return seen == n


def topological_order(dag) -> list[int]:
    """Topological order with ties broken by the smallest node index.

    Raises
    ------
    CycleError
        If the graph has a cycle.
    """
    a = (_as_matrix(dag) != 0)
    n = a.shape[0]
    indeg = a.sum(axis=0).astype(int)
    heap = [v for v in range(n) if indeg[v] == 0]
    heapq.heapify(heap)
    order = []
    while heap:
        v = heapq.heappop(heap)
        order.append(v)
        for w in np.flatnonzero(a[v]):
            indeg[w] -= 1
            if indeg[w] == 0:
                heapq.heappush(heap, int(w))
    if len(order) != n:
        raise CycleError("graph has a cycle; no topological order exists")
    return order


def shd(a, b) -> int:
    """Structural Hamming distance.

    For every unordered pair ``{i, j}`` one unit is counted if the pair is
    adjacent in exactly one graph, or if it is adjacent in both with a
    different orientation.  A reversed edge therefore costs 1.
    """
    a = (_as_matrix(a) != 0).astype(np.int8)
    b = (_as_matrix(b) != 0).astype(np.int8)
    if a.shape != b.shape or a.ndim != 2 or a.shape[0] != a.shape[1]:
        raise ValueError(f"shape mismatch: {a.shape} vs {b.shape}")
    sym_a = a + a.T
    sym_b = b + b.T
    diff = (sym_a != sym_b) | (a != b)
    return int(np.triu(diff, k=1).sum())


def generate_synthetic(family: str, n: int, edge_prob: float = 0.3, rng=None) -> Dag:
    """Build a graph from one of the named benchmark families.

    ``chain``      path ``0 -> 1 -> ... -> n-1``
    ``bidiag``     chain plus skip edges ``i -> i+2``
    ``collider``   every node ``0..n-2`` points into ``n-1``
    ``jungle``     binary tree (``i -> 2i+1, 2i+2``) plus grandparent edges
    ``fulldag``    all edges ``i -> j`` for ``i < j``
    ``random``     each ``i -> j`` (``i < j``) independently with ``edge_prob``

    Only ``random`` consumes ``rng``.
    """
    if family not in FAMILIES:
        raise ValueError(f"unknown graph family {family!r}; expected one of {FAMILIES}")
    if n < 2:
        raise ValueError(f"need n >= 2, got {n}")
    adj = np.zeros((n, n), dtype=np.int8)
    if family == "chain":
        for i in range(n - 1):
            adj[i, i + 1] = 1
    elif family == "bidiag":
        for i in range(n - 1):
            adj[i, i + 1] = 1
        for i in range(n - 2):
            adj[i, i + 2] = 1
    elif family == "collider":
        adj[: n - 1, n - 1] = 1
    elif family == "jungle":
        for i in range(n):
            for c in (2 * i + 1, 2 * i + 2):
                if c < n:
                    adj[i, c] = 1
                    for g in (2 * c + 1, 2 * c + 2):
                        if g < n:
                            adj[i, g] = 1
    elif family == "fulldag":
        adj = np.triu(np.ones((n, n), dtype=np.int8), k=1)
    else:
        if not 0.0 <= edge_prob <= 1.0:
            raise ValueError(f"edge_prob must lie in [0, 1], got {edge_prob}")
        if rng is None:
            raise ValueError("family 'random' needs an rng")
        draws = rng.random((n, n)) < edge_prob
        adj = np.triu(draws, k=1).astype(np.int8)
    return Dag(adj)
