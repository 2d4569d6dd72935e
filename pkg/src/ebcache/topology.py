"""Node layouts, Voronoi-neighbour adjacency and minimum-hop path statistics."""

from __future__ import annotations

import io
import os
from collections import deque
from dataclasses import dataclass, field
from fractions import Fraction

import numpy as np
from scipy.spatial import Delaunay, QhullError

__all__ = [
    "NodeLayout",
    "AdjacencyGraph",
    "PathStats",
    "generate_layout",
    "build_adjacency",
    "path_stats",
    "classical_betweenness",
    "sample_shortest_path",
    "read_edge_list",
    "write_edge_list",
]


@dataclass(frozen=True)
class NodeLayout:
    positions: np.ndarray
    region_side: float
    seed: int | None = None

    def __post_init__(self):
        pos = np.asarray(self.positions, dtype=float)
        if pos.ndim != 2 or pos.shape[1] != 2:
            raise ValueError("positions must be an (n, 2) array")
        if pos.shape[0] < 2:
            raise ValueError("a layout needs at least 2 nodes")
        if np.any(pos < 0) or np.any(pos > self.region_side):
            raise ValueError("positions must lie inside [0, side]^2")
        if len(np.unique(pos, axis=0)) != len(pos):
            raise ValueError("positions must be pairwise distinct")
        pos.setflags(write=False)
        object.__setattr__(self, "positions", pos)

    @property
    def n(self) -> int:
        return self.positions.shape[0]

    def distances(self) -> np.ndarray:
        diff = self.positions[:, None, :] - self.positions[None, :, :]
        return np.sqrt((diff ** 2).sum(axis=-1))


@dataclass(frozen=True)
class AdjacencyGraph:
    n: int
    edges: tuple[tuple[int, int], ...]
    neighbors: tuple[tuple[int, ...], ...] = field(repr=False)

    @classmethod
    def from_edges(cls, n: int, edges) -> "AdjacencyGraph":
        if n < 1:
            raise ValueError("graph needs at least one node")
        canon = set()
        for u, v in edges:
            u, v = int(u), int(v)
            if u == v:
                raise ValueError(f"self-loop at node {u}")
            if not (0 <= u < n and 0 <= v < n):
                raise ValueError(f"edge ({u}, {v}) out of range for {n} nodes")
            canon.add((min(u, v), max(u, v)))
        edge_list = tuple(sorted(canon))
        nbrs = [[] for _ in range(n)]
        for u, v in edge_list:
            nbrs[u].append(v)
            nbrs[v].append(u)
        return cls(n, edge_list, tuple(tuple(sorted(a)) for a in nbrs))

    def has_edge(self, u: int, v: int) -> bool:
        return v in self.neighbors[u]

    def is_connected(self) -> bool:
        seen = {0}
        todo = [0]
        while todo:
            u = todo.pop()
            for v in self.neighbors[u]:
                if v not in seen:
                    seen.add(v)
                    todo.append(v)
        return len(seen) == self.n


def generate_layout(n: int, side: float = 100.0, seed: int | None = None) -> NodeLayout:
    """Place ``n`` nodes uniformly at random in a ``side`` x ``side`` square."""
    if n < 2:
        raise ValueError("n must be at least 2")
    if side <= 0:
        raise ValueError("side must be positive")
    rng = np.random.default_rng(seed)
    while True:
        pos = rng.uniform(0.0, side, size=(n, 2))
        if len(np.unique(pos, axis=0)) == n:
            return NodeLayout(pos, float(side), seed)


def _chain_edges(positions: np.ndarray):
    order = np.lexsort((positions[:, 1], positions[:, 0]))
    return [(int(a), int(b)) for a, b in zip(order[:-1], order[1:])]


def build_adjacency(layout: NodeLayout) -> AdjacencyGraph:
    """Connect nodes whose Voronoi cells are adjacent (Delaunay edges).

    A fully collinear layout has no triangulation; nodes are then chained in
    coordinate order, which is exactly the Voronoi adjacency of points on a
    line.
    """
    pos = layout.positions
    n = layout.n
    if n == 2:
        return AdjacencyGraph.from_edges(2, [(0, 1)])
    try:
        tri = Delaunay(pos)
    except QhullError:
        return AdjacencyGraph.from_edges(n, _chain_edges(pos))
    edges = set()
    for simplex in tri.simplices:
        a, b, c = (int(v) for v in simplex)
        edges.update({(a, b), (b, c), (a, c)})
    graph = AdjacencyGraph.from_edges(n, edges)
    if not graph.is_connected():
        # coplanar points dropped by qhull; fall back to the chain
        return AdjacencyGraph.from_edges(n, edges | set(_chain_edges(pos)))
    return graph


@dataclass(frozen=True)
class PathStats:
    """All-pairs minimum-hop distances and shortest-path counts.

    ``hops[j, k]`` is the hop distance and ``sigma[j, k]`` the number of
    minimum-hop paths from ``j`` to ``k``.
    """

    hops: np.ndarray
    sigma: np.ndarray

    @property
    def n(self) -> int:
        return self.hops.shape[0]

    def on_path(self, j: int, k: int, i: int) -> bool:
        return self.hops[j, i] + self.hops[i, k] == self.hops[j, k]

    def passthrough(self, j: int, k: int, i: int) -> int:
        """Number of minimum-hop j->k paths visiting ``i`` (endpoints included)."""
        if not self.on_path(j, k, i):
            return 0
        return int(self.sigma[j, i]) * int(self.sigma[i, k])

    def through_ratio(self, source_inclusive: bool = True) -> np.ndarray:
        """Tensor ``r[j, k, i]`` = share of minimum-hop j->k paths passing ``i``.

        The destination ``k`` never counts. With ``source_inclusive`` the
        source ``j`` counts (ratio 1 whenever j != k); otherwise only strict
        intermediates do.
        """
        key = "_ratio_src" if source_inclusive else "_ratio_strict"
        cached = self.__dict__.get(key)
        if cached is not None:
            return cached
        h = self.hops
        s = self.sigma.astype(float)
        on = (h[:, None, :] + h.T[None, :, :]) == h[:, :, None]
        # on[j, k, i]: l(j,i) + l(i,k) == l(j,k)
        ratio = np.where(on, s[:, None, :] * s.T[None, :, :] / s[:, :, None], 0.0)
        idx = np.arange(self.n)
        ratio[:, idx, idx] = 0.0
        if not source_inclusive:
            ratio[idx, :, idx] = 0.0
        ratio.setflags(write=False)
        object.__setattr__(self, key, ratio)
        return ratio

    def through_ratio_exact(self, j: int, k: int, i: int,
                            source_inclusive: bool = True) -> Fraction:
        if i == k or (i == j and not source_inclusive):
            return Fraction(0)
        return Fraction(self.passthrough(j, k, i), int(self.sigma[j, k]))


def path_stats(graph: AdjacencyGraph) -> PathStats:
    """Breadth-first hop distances and path counts from every source."""
    n = graph.n
    hops = np.full((n, n), -1, dtype=np.int64)
    sigma = np.zeros((n, n), dtype=np.int64)
    for src in range(n):
        dist = hops[src]
        cnt = sigma[src]
        dist[src] = 0
        cnt[src] = 1
        queue = deque([src])
        while queue:
            u = queue.popleft()
            for v in graph.neighbors[u]:
                if dist[v] < 0:
                    dist[v] = dist[u] + 1
                    queue.append(v)
                if dist[v] == dist[u] + 1:
                    cnt[v] += cnt[u]
        if np.any(dist < 0):
            raise ValueError("graph is disconnected")
    hops.setflags(write=False)
    sigma.setflags(write=False)
    return PathStats(hops, sigma)


def classical_betweenness(stats: PathStats) -> np.ndarray:
    """Betweenness over ordered pairs, counting strict intermediates only."""
    return stats.through_ratio(source_inclusive=False).sum(axis=(0, 1))


def sample_shortest_path(stats: PathStats, graph: AdjacencyGraph, j: int, k: int,
                         rng) -> list[int]:
    """Draw one minimum-hop path from ``j`` to ``k`` uniformly at random.

    ``rng`` is a :class:`numpy.random.Generator` or :class:`random.Random`.
    """
    draw = rng.random
    path = [j]
    u = j
    h = stats.hops
    while u != k:
        target = h[u, k] - 1
        cands = [v for v in graph.neighbors[u] if h[v, k] == target]
        weights = [int(stats.sigma[v, k]) for v in cands]
        r = draw() * sum(weights)
        acc = 0
        for v, wt in zip(cands, weights):
            acc += wt
            if r < acc:
                break
        u = v
        path.append(u)
    return path


def read_edge_list(source) -> AdjacencyGraph:
    """Parse ``u v`` lines (0-based). ``source`` is a path or a text stream.

    A line ``# nodes N`` fixes the node count; otherwise it is one more than
    the largest index seen.
    """
    if isinstance(source, (str, os.PathLike)):
        with open(source) as fh:
            text = fh.read()
    else:
        text = source.read()
    edges = []
    n = None
    for lineno, raw in enumerate(text.splitlines(), 1):
        line = raw.strip()
        if not line:
            continue
        if line.startswith("#"):
            parts = line[1:].split()
            if len(parts) == 2 and parts[0] == "nodes":
                n = int(parts[1])
            continue
        parts = line.split()
        if len(parts) != 2:
            raise ValueError(f"line {lineno}: expected 'u v', got {raw!r}")
        edges.append((int(parts[0]), int(parts[1])))
    if n is None:
        n = 1 + max((max(e) for e in edges), default=-1)
    return AdjacencyGraph.from_edges(n, edges)


def write_edge_list(graph: AdjacencyGraph, dest=None) -> str:
    buf = io.StringIO()
    buf.write(f"# nodes {graph.n}\n")
    for u, v in graph.edges:
        buf.write(f"{u} {v}\n")
    text = buf.getvalue()
    if dest is not None:
        with open(dest, "w") as fh:
            fh.write(text)
    return text
