import random
from itertools import combinations

import networkx as nx
import numpy as np
import pytest
from hypothesis import given, strategies as st

from regenquorum.routing import (
    Topology,
    hop_distance,
    pick_read_nodes,
    rank_by_write_distance,
    write_distance,
    write_distance_table,
)


def bfs_oracle(N, edges):
    """Floyd-Warshall on the adjacency matrix, independent of networkx."""
    inf = 10 ** 6
    d = [[0 if i == j else inf for j in range(N)] for i in range(N)]
    for a, b in edges:
        d[a][b] = d[b][a] = 1
    for m in range(N):
        for i in range(N):
            for j in range(N):
                d[i][j] = min(d[i][j], d[i][m] + d[m][j])
    return d


def test_five_node_path_table():
    t = Topology.path(5)
    wdt = write_distance_table(t, [0, 2])  # nodes 1 and 3, counted from one
    assert wdt.tolist() == [2, 2, 2, 4, 6]


def test_five_node_path_picks():
    wdt = write_distance_table(Topology.path(5), [0, 2])
    rng = random.Random(0)
    assert pick_read_nodes(wdt, 1, rng) == [4]
    assert set(pick_read_nodes(wdt, 2, rng)) == {4, 3}


def test_all_nodes_when_k_is_N():
    wdt = write_distance_table(Topology.path(6), [])
    assert sorted(pick_read_nodes(wdt, 6, random.Random(1))) == list(range(6))


def test_no_writes_gives_adjacent_window():
    t = Topology.path(8)
    wdt = write_distance_table(t, [])
    for seed in range(20):
        picked = pick_read_nodes(wdt, 3, random.Random(seed), t)
        assert picked == list(range(picked[0], picked[0] + 3))


def test_ring_window_wraps():
    t = Topology.ring(6)
    seen = {tuple(t.contiguous_window(3, random.Random(s))) for s in range(60)}
    assert (0, 1, 5) in seen
    for w in seen:
        assert any(set(w) == {(s + i) % 6 for i in range(3)} for s in range(6))


def test_ties_break_by_node_index():
    assert rank_by_write_distance([3, 5, 5, 1], range(4)) == [1, 2, 0, 3]


def test_invalid_topologies():
    with pytest.raises(ValueError):
        Topology(4, [(0, 1), (2, 3)])
    with pytest.raises(ValueError):
        Topology(3, [(0, 0), (0, 1), (1, 2)])
    with pytest.raises(ValueError):
        pick_read_nodes(np.zeros(3, dtype=int), 4, random.Random(0))


@st.composite
def connected_graphs(draw):
    N = draw(st.integers(2, 9))
    order = draw(st.permutations(range(N)))
    edges = {tuple(sorted((order[i], order[draw(st.integers(0, i - 1))]))) for i in range(1, N)}
    extra = draw(st.sets(st.sampled_from(list(combinations(range(N), 2))), max_size=6))
    return N, sorted(edges | extra)


@given(connected_graphs(), st.data())
def test_distances_and_table_match_oracle(g, data):
    N, edges = g
    t = Topology(N, edges)
    oracle = bfs_oracle(N, edges)
    assert all(hop_distance(t, a, b) == oracle[a][b] for a in range(N) for b in range(N))
    writes = data.draw(st.sets(st.integers(0, N - 1)))
    wdt = write_distance_table(t, writes)
    for v in range(N):
        assert wdt[v] == write_distance(t, writes, v) == sum(oracle[v][u] for u in writes)


@given(connected_graphs(), st.data())
def test_window_on_general_graph_is_connected(g, data):
    N, edges = g
    t = Topology(N, edges)
    k = data.draw(st.integers(1, N))
    w = t.contiguous_window(k, random.Random(data.draw(st.integers(0, 99))))
    assert len(set(w)) == k
    assert nx.is_connected(t.graph.subgraph(w))
