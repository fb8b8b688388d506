"""Sparse undirected simple graphs and node labelings.

A :class:`Graph` stores its edges twice: as a sorted ``(m, 2)`` array of
``i < j`` pairs and as CSR-style adjacency (``indptr``/``indices``) with
each neighbor list sorted.  The CSR position ``p`` in row ``i`` doubles as
the index of the directed edge ``i -> indices[p]``; ``reverse[p]`` is the
position of the opposite direction.  Message passing relies on that.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import Iterable, Sequence

import numpy as np
import scipy.sparse as sp

from .errors import InvalidNode

CORE = 1
PERIPHERY = 2


@dataclass(frozen=True)
class BuildReport:
    self_loops: int = 0
    duplicates: int = 0


@dataclass(frozen=True, eq=False)
class Graph:
    n: int
    edges: np.ndarray
    indptr: np.ndarray
    indices: np.ndarray
    reverse: np.ndarray
    report: BuildReport = field(default_factory=BuildReport)

    @property
    def m(self) -> int:
        return int(self.edges.shape[0])

    def neighbors(self, i: int) -> np.ndarray:
        return self.indices[self.indptr[i]:self.indptr[i + 1]]

    @property
    def adjacency(self) -> list[list[int]]:
        return [self.neighbors(i).tolist() for i in range(self.n)]

    @property
    def sources(self) -> np.ndarray:
        """Source node of every directed edge, aligned with ``indices``."""
        return np.repeat(np.arange(self.n, dtype=np.int64), np.diff(self.indptr))

    def adjacency_matrix(self, dtype=float) -> sp.csr_matrix:
        data = np.ones(self.indices.shape[0], dtype=dtype)
        return sp.csr_matrix((data, self.indices, self.indptr), shape=(self.n, self.n))

    def has_edge(self, i: int, j: int) -> bool:
        nb = self.neighbors(i)
        k = np.searchsorted(nb, j)
        return bool(k < nb.shape[0] and nb[k] == j)

    def subgraph(self, nodes: Sequence[int]) -> tuple["Graph", np.ndarray]:
        """Induced subgraph on ``nodes``; returns it with the kept original ids."""
        keep = np.unique(np.asarray(nodes, dtype=np.int64))
        relabel = np.full(self.n, -1, dtype=np.int64)
        relabel[keep] = np.arange(keep.shape[0])
        a, b = relabel[self.edges[:, 0]], relabel[self.edges[:, 1]]
        mask = (a >= 0) & (b >= 0)
        return build_graph(keep.shape[0], np.column_stack([a[mask], b[mask]])), keep

    def __eq__(self, other):
        if not isinstance(other, Graph):
            return NotImplemented
        return self.n == other.n and np.array_equal(self.edges, other.edges)

    def __hash__(self):
        return hash((self.n, self.edges.tobytes()))

    def __repr__(self):
        return f"Graph(n={self.n}, m={self.m})"


def build_graph(n: int, edges: Iterable[Sequence[int]] | np.ndarray) -> Graph:
    """Build a simple undirected graph on nodes ``0..n-1``.

    Self-loops are dropped and duplicate (unordered) pairs collapsed; both
    are counted in ``graph.report``.  Out-of-range ids raise InvalidNode.
    """
    n = int(n)
    if n < 0:
        raise ValueError("node count must be non-negative")
    arr = np.asarray(list(edges) if not isinstance(edges, np.ndarray) else edges, dtype=np.int64)
    if arr.size == 0:
        arr = np.empty((0, 2), dtype=np.int64)
    arr = arr.reshape(-1, 2)
    if arr.shape[0] and (arr.min() < 0 or arr.max() >= n):
        bad = arr[(arr < 0).any(axis=1) | (arr >= n).any(axis=1)][0]
        raise InvalidNode(f"edge ({bad[0]}, {bad[1]}) out of range for n={n}")

    loops = arr[:, 0] == arr[:, 1]
    arr = arr[~loops]
    lo = np.minimum(arr[:, 0], arr[:, 1])
    hi = np.maximum(arr[:, 0], arr[:, 1])
    keys = np.unique(lo * n + hi) if arr.shape[0] else np.empty(0, dtype=np.int64)
    uniq = np.column_stack([keys // max(n, 1), keys % max(n, 1)]).astype(np.int64)
    report = BuildReport(self_loops=int(loops.sum()), duplicates=int(arr.shape[0] - uniq.shape[0]))

    # directed copies sorted by (source, target) give sorted CSR rows
    src = np.concatenate([uniq[:, 0], uniq[:, 1]])
    dst = np.concatenate([uniq[:, 1], uniq[:, 0]])
    order = np.lexsort((dst, src))
    src, dst = src[order], dst[order]
    indptr = np.zeros(n + 1, dtype=np.int64)
    np.cumsum(np.bincount(src, minlength=n), out=indptr[1:])

    # the edge set is symmetric, so the k-th edge in (dst, src) order is the
    # reverse of the k-th edge in (src, dst) order
    reverse = np.lexsort((src, dst))

    for a in (uniq, indptr, dst, reverse):
        a.setflags(write=False)
    return Graph(n=n, edges=uniq, indptr=indptr, indices=dst, reverse=reverse, report=report)


def degrees(g: Graph) -> np.ndarray:
    return np.diff(g.indptr)


def two_core(g: Graph) -> np.ndarray:
    """Boolean mask of nodes in the 2-core (iterative leaf stripping)."""
    deg = degrees(g).copy()
    alive = np.ones(g.n, dtype=bool)
    stack = [i for i in range(g.n) if deg[i] < 2]
    while stack:
        i = stack.pop()
        if not alive[i]:
            continue
        alive[i] = False
        for j in g.neighbors(i):
            if alive[j]:
                deg[j] -= 1
                if deg[j] < 2:
                    stack.append(int(j))
    return alive


@dataclass(frozen=True, eq=False)
class Labeling:
    """Per-node group ids, 1 for core and 2 for periphery."""

    groups: np.ndarray

    def __post_init__(self):
        g = np.asarray(self.groups, dtype=np.int8).copy()
        if g.ndim != 1:
            raise ValueError("groups must be one-dimensional")
        if g.size and not np.isin(g, (CORE, PERIPHERY)).all():
            raise ValueError("group ids must be 1 (core) or 2 (periphery)")
        g.setflags(write=False)
        object.__setattr__(self, "groups", g)

    @classmethod
    def from_core_mask(cls, mask) -> "Labeling":
        mask = np.asarray(mask, dtype=bool)
        return cls(np.where(mask, CORE, PERIPHERY))

    @property
    def n(self) -> int:
        return int(self.groups.shape[0])

    @property
    def core_mask(self) -> np.ndarray:
        return self.groups == CORE

    @property
    def core_size(self) -> int:
        return int(self.core_mask.sum())

    def fractions(self) -> np.ndarray:
        """Group fractions ``[gamma_core, gamma_periphery]``."""
        if self.n == 0:
            return np.zeros(2)
        c = self.core_size / self.n
        return np.array([c, 1.0 - c])

    def complement(self) -> "Labeling":
        return Labeling(3 - self.groups)

    def __eq__(self, other):
        if not isinstance(other, Labeling):
            return NotImplemented
        return np.array_equal(self.groups, other.groups)

    def __len__(self):
        return self.n

    def __repr__(self):
        return f"Labeling(n={self.n}, core={self.core_size})"
