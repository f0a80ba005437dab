import random

import pytest
from hypothesis import given, settings, strategies as st

from regenquorum.code_model import FootprintMatrix
from regenquorum.placement import (
    CapacityExceeded,
    Group,
    PlacementMap,
    Unplaced,
    assign,
    build_groups,
    complete_layout,
    identity_layout,
    locate,
)


def test_two_group_worked_example():
    # chunks c1..c5 are ids 0..4, nodes 1..3 are 0..2
    groups = [Group(0, frozenset({0, 1, 2})), Group(1, frozenset({2, 3, 4}))]
    pm = assign(groups, N=3, alpha=2)
    assert pm.nodes == {0: [0, 1], 1: [2, 3], 2: [4]}


def replay_oracle(groups, N, alpha, order):
    """Re-run the packing along ``order`` and check every choice by brute force.

    At each step the node being filled is the first one with a free slot; the
    chosen group must have the largest overlap with that node's chunks, with the
    lowest index winning ties.
    """
    content = [set() for _ in range(N)]
    where = {}
    remaining = set(range(len(groups)))
    for step, g in enumerate(order):
        cur = next((v for v in range(N) if len(content[v]) < alpha), None)
        ctx = content[cur] if cur is not None else set()
        scores = {h: len(groups[h].chunks & ctx) for h in remaining}
        best = max(scores.values())
        assert scores[g] == best, f"step {step}: chose {g} with {scores[g]} < {best}"
        assert g == min(h for h in remaining if scores[h] == best)
        remaining.remove(g)
        for c in sorted(groups[g].chunks):
            if c in where:
                continue
            v = next(v for v in range(N) if len(content[v]) < alpha)
            content[v].add(c)
            where[c] = v
    return where


@settings(max_examples=300, deadline=None)
@given(st.integers(1, 6), st.integers(1, 8), st.integers(1, 4), st.integers(0, 10 ** 6))
def test_random_instances_against_oracle(k, q, alpha, seed):
    rng = random.Random(seed)
    N = rng.randint(max(1, -(-q // alpha)), 8)
    total = N * alpha
    q = min(q, total)
    rows = [rng.sample(range(total), q) for _ in range(k)]
    groups = build_groups(FootprintMatrix(rows, total))
    pm = assign(groups, N, alpha)
    distinct = set().union(*map(set, rows))
    assert set(pm.location) == distinct
    assert len(set(pm.location.values())) == len(distinct)
    assert all(len(cs) <= alpha for cs in pm.nodes.values())
    assert sorted(pm.order) == list(range(k))
    where = replay_oracle(groups, N, alpha, pm.order)
    assert {c: v for c, (v, _) in pm.location.items()} == where


def test_capacity_exceeded():
    groups = [Group(0, frozenset(range(5)))]
    with pytest.raises(CapacityExceeded):
        assign(groups, N=2, alpha=2)


def test_complete_layout_fills_gaps():
    pm = assign([Group(0, frozenset({5, 1}))], N=3, alpha=2)
    full = complete_layout(pm, 6)
    assert sorted(full.location.values()) == [(v, s) for v in range(3) for s in range(2)]
    assert full.location[1] == (0, 0) and full.location[5] == (0, 1)


def test_csv_round_trip_and_locate():
    pm = identity_layout(3, 2)
    back = PlacementMap.from_csv(pm.to_csv())
    assert back.location == pm.location and (back.N, back.alpha) == (3, 2)
    assert locate(pm, 5) == (2, 1)
    with pytest.raises(Unplaced):
        locate(pm, 6)
