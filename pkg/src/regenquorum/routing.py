"""Node topology, hop distances and the write-distance table used to steer reads."""
from __future__ import annotations

import random
from typing import Iterable, List, Optional, Sequence

import networkx as nx
import numpy as np


class Topology:
    """Undirected connected graph over nodes ``0..N-1``."""

    def __init__(self, N: int, edges: Iterable[tuple], shape: str = "edges"):
        g = nx.Graph()
        g.add_nodes_from(range(N))
        g.add_edges_from((int(a), int(b)) for a, b in edges)
        if g.number_of_nodes() != N:
            raise ValueError("edge list references nodes outside 0..N-1")
        if nx.number_of_selfloops(g):
            raise ValueError("topology must be simple (no self loops)")
        if not nx.is_connected(g):
            raise ValueError("topology must be connected")
        self.N = N
        self.shape = shape
        self.graph = g
        dist = dict(nx.all_pairs_shortest_path_length(g))
        self.dist = np.array([[dist[a][b] for b in range(N)] for a in range(N)], dtype=np.int64)

    @classmethod
    def path(cls, N: int) -> "Topology":
        return cls(N, [(i, i + 1) for i in range(N - 1)], shape="path")

    @classmethod
    def ring(cls, N: int) -> "Topology":
        edges = [(i, (i + 1) % N) for i in range(N)] if N > 2 else [(i, i + 1) for i in range(N - 1)]
        return cls(N, edges, shape="ring")

    @property
    def edges(self) -> List[tuple]:
        return sorted(tuple(sorted(e)) for e in self.graph.edges)

    def contiguous_window(self, k: int, rng: random.Random,
                          exclude: Optional[set] = None) -> List[int]:
        """A seeded-random set of ``k`` mutually adjacent nodes (a connected run)."""
        exclude = exclude or set()
        if self.shape in ("path", "ring"):
            order = [v for v in range(self.N) if v not in exclude]
            m = len(order)
            if k > m:
                raise ValueError(f"cannot pick {k} nodes out of {m}")
            if self.shape == "ring":
                start = rng.randrange(m)
                return sorted(order[(start + i) % m] for i in range(k))
            start = rng.randrange(m - k + 1)
            return order[start:start + k]
        allowed = [v for v in range(self.N) if v not in exclude]
        start = allowed[rng.randrange(len(allowed))]
        sub = self.graph.subgraph(allowed)
        picked = [start]
        for _, v in nx.bfs_edges(sub, start):
            if len(picked) == k:
                break
            picked.append(v)
        for v in allowed:  # disconnected remainder after exclusion
            if len(picked) == k:
                break
            if v not in picked:
                picked.append(v)
        return sorted(picked)


def hop_distance(t: Topology, a: int, b: int) -> int:
    return int(t.dist[a, b])


def write_distance(t: Topology, writes: Iterable[int], v: int) -> int:
    return int(sum(t.dist[v, u] for u in writes))


def write_distance_table(t: Topology, writes: Iterable[int]) -> np.ndarray:
    cols = sorted(set(writes))
    if not cols:
        return np.zeros(t.N, dtype=np.int64)
    return t.dist[:, cols].sum(axis=1)


def rank_by_write_distance(wdt: Sequence[int], candidates: Iterable[int]) -> List[int]:
    """Candidates ordered by descending write distance, ties by node index."""
    return sorted(candidates, key=lambda v: (-int(wdt[v]), v))


def pick_read_nodes(wdt: Sequence[int], k: int, rng: random.Random,
                    topology: Optional[Topology] = None,
                    exclude: Optional[set] = None) -> List[int]:
    """Highest write distance first when writes are active, else an adjacent window."""
    exclude = exclude or set()
    nodes = [v for v in range(len(wdt)) if v not in exclude]
    if k > len(nodes):
        raise ValueError(f"k={k} exceeds {len(nodes)} available nodes")
    if any(int(x) for x in wdt):
        return rank_by_write_distance(wdt, nodes)[:k]
    if topology is None:
        topology = Topology.path(len(wdt))
    return topology.contiguous_window(k, rng, exclude)
