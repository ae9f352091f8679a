"""Static digraphs: construction, random generation and hop distances.

Nodes are the dense integers ``0..N-1``. An edge ``(i, j)`` carries
information from ``i`` to ``j``; ``j`` is an out-neighbor of ``i`` and
``i`` an in-neighbor of ``j``.
"""

from __future__ import annotations

import math
from collections import deque
from dataclasses import dataclass, field
from functools import cached_property
from os import PathLike
from typing import Iterable

import numpy as np

#: Distance between nodes with no directed path between them.
UNREACHABLE = math.inf


@dataclass(frozen=True, eq=False)
class Digraph:
    node_count: int
    out_adj: tuple[tuple[int, ...], ...]
    in_adj: tuple[tuple[int, ...], ...]
    dist: np.ndarray = field(repr=False)

    @classmethod
    def from_edges(cls, node_count: int, edges: Iterable[tuple[int, int]]) -> "Digraph":
        """Build a digraph from ordered pairs; duplicates are merged."""
        if node_count < 1:
            raise ValueError(f"node_count must be positive, got {node_count}")
        out_sets: list[set[int]] = [set() for _ in range(node_count)]
        for i, j in edges:
            i, j = int(i), int(j)
            if not (0 <= i < node_count and 0 <= j < node_count):
                raise ValueError(f"edge ({i}, {j}) out of range for {node_count} nodes")
            if i == j:
                raise ValueError(f"self-loop at node {i}")
            out_sets[i].add(j)
        in_sets: list[set[int]] = [set() for _ in range(node_count)]
        for i, succ in enumerate(out_sets):
            for j in succ:
                in_sets[j].add(i)
        out_adj = tuple(tuple(sorted(s)) for s in out_sets)
        in_adj = tuple(tuple(sorted(s)) for s in in_sets)
        return cls(node_count, out_adj, in_adj, _frozen(_bfs_distances(node_count, out_adj)))

    @property
    def edges(self) -> list[tuple[int, int]]:
        return [(i, j) for i, succ in enumerate(self.out_adj) for j in succ]

    @property
    def edge_count(self) -> int:
        return sum(len(s) for s in self.out_adj)

    @cached_property
    def out_degree(self) -> np.ndarray:
        return _frozen(np.array([len(s) for s in self.out_adj], dtype=np.int64))

    @cached_property
    def in_degree(self) -> np.ndarray:
        return _frozen(np.array([len(s) for s in self.in_adj], dtype=np.int64))

    @cached_property
    def in_mask(self) -> np.ndarray:
        """0/1 matrix ``M`` with ``M[i, j] = 1`` iff ``(j, i)`` is an edge.

        This is the sparsity pattern of a compliant weight matrix: row ``i``
        holds the weights node ``i`` assigns to its incoming edges.
        """
        m = np.zeros((self.node_count, self.node_count), dtype=np.int64)
        for i, pred in enumerate(self.in_adj):
            m[i, list(pred)] = 1
        return _frozen(m)

    def __eq__(self, other: object) -> bool:
        if not isinstance(other, Digraph):
            return NotImplemented
        return self.node_count == other.node_count and self.out_adj == other.out_adj

    def __hash__(self) -> int:
        return hash((self.node_count, self.out_adj))


def _frozen(a: np.ndarray) -> np.ndarray:
    a.setflags(write=False)
    return a


def _bfs_distances(n: int, out_adj: tuple[tuple[int, ...], ...]) -> np.ndarray:
    dist = np.full((n, n), UNREACHABLE)
    for src in range(n):
        dist[src, src] = 0
        queue = deque([src])
        while queue:
            u = queue.popleft()
            for v in out_adj[u]:
                if dist[src, v] == UNREACHABLE:
                    dist[src, v] = dist[src, u] + 1
                    queue.append(v)
    return dist


def directed_distances(g: Digraph) -> np.ndarray:
    """Hop-count matrix; ``UNREACHABLE`` where no directed path exists."""
    return g.dist


def is_strongly_connected(g: Digraph) -> bool:
    return bool(np.isfinite(g.dist).all())


def ring(n: int) -> Digraph:
    """Directed cycle ``0 -> 1 -> ... -> n-1 -> 0``."""
    return Digraph.from_edges(n, [(i, (i + 1) % n) for i in range(n)])


def generate_ring_plus_random(n: int, p: float, rng: np.random.Generator) -> Digraph:
    """Directed ring plus each remaining ordered pair with probability ``p``.

    Candidate pairs are visited in lexicographic order, one uniform draw
    per candidate, so the generator state fully determines the graph.
    """
    if n < 2:
        raise ValueError(f"need at least 2 nodes, got {n}")
    if not 0.0 <= p <= 1.0:
        raise ValueError(f"p must lie in [0, 1], got {p}")
    edges = [(i, (i + 1) % n) for i in range(n)]
    ring_edges = set(edges)
    candidates = [
        (i, j)
        for i in range(n)
        for j in range(n)
        if i != j and (i, j) not in ring_edges
    ]
    draws = rng.random(len(candidates))
    edges.extend(c for c, u in zip(candidates, draws) if u < p)
    return Digraph.from_edges(n, edges)


def write_edge_list(g: Digraph, path: str | PathLike) -> None:
    lines = [str(g.node_count)] + [f"{i} {j}" for i, j in g.edges]
    with open(path, "w", encoding="ascii") as fh:
        fh.write("\n".join(lines) + "\n")


def read_edge_list(path: str | PathLike) -> Digraph:
    """Parse the ``N`` / ``i j`` edge-list format written by `write_edge_list`."""
    with open(path, encoding="ascii") as fh:
        rows = [ln.split() for ln in fh if ln.strip() and not ln.lstrip().startswith("#")]
    if not rows or len(rows[0]) != 1:
        raise ValueError(f"{path}: first line must hold the node count")
    n = int(rows[0][0])
    edges = []
    for lineno, row in enumerate(rows[1:], start=2):
        if len(row) != 2:
            raise ValueError(f"{path}: line {lineno}: expected 'i j', got {' '.join(row)!r}")
        edges.append((int(row[0]), int(row[1])))
    return Digraph.from_edges(n, edges)
