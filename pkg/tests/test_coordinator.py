import pytest

from regenquorum.code_model import CodeParams, FootprintMatrix
from regenquorum.coordinator import (
    DEMOTED,
    LockTable,
    PendingWriteRecord,
    Request,
    StaleVote,
    UnknownRequest,
    check_consistency_restriction,
    read_selection,
    repair_selection,
)
from regenquorum.routing import Topology, write_distance_table
from regenquorum.scheduler import DeadlockConfig, SlotPolicy
from regenquorum.sim_engine import SimConfig, Simulation, WorkloadParams
from regenquorum.trace import trace_check


def rows_of(sim, event, rid=None):
    return [r for r in sim.rows if r[1] == event and (rid is None or r[2] == rid)]


def scripted(N=8, k=2, d=3, alpha=1, beta=1, footprint=None, delay=0.0, q=None, seed=0):
    footprint = footprint or [[1, 3, 7]] + [[0, 2]] * (k - 1)
    q = q or max(len(r) for r in footprint)
    params = CodeParams(N=N, n=N * alpha, k=k, d=d, alpha=alpha, beta=beta, q=q)
    cfg = SimConfig(params=params, footprint=FootprintMatrix(footprint, N * alpha),
                    slot_policy=SlotPolicy("time", 100.0), deadlock=DeadlockConfig(5.0),
                    workload=WorkloadParams(), topology=Topology.path(N),
                    placement_mode="identity", message_delay=delay, horizon=0.0,
                    check_invariants=True)
    return Simulation(cfg, seed)


def finish(sim):
    trace, metrics = sim.run()
    rep = trace_check(trace)
    assert rep.ok, rep.violations
    return trace, metrics


# ------------------------------------------------------------ restriction
DONE_SET, WAITING_SET = frozenset({1, 2}), frozenset({3, 4})
REC = [PendingWriteRecord(9, DONE_SET, WAITING_SET)]


def test_straddling_selection_rejected():
    assert check_consistency_restriction({1, 3}, REC) == 9


def test_one_side_selection_allowed():
    assert check_consistency_restriction({1, 5}, REC) is None
    assert check_consistency_restriction({3, 4, 6}, REC) is None
    assert check_consistency_restriction(set(), REC) is None


def test_write_itself_is_not_restricted():
    assert check_consistency_restriction({1, 3}, REC, request_id=9) is None


def test_read_selection_skips_straddling_nodes():
    wdt = [0, 0, 0, 5, 4, 3]
    chosen = read_selection(2, wdt, REC, lambda v: (v,), held_locs={1})
    assert chosen == [5, 0]  # 3 and 4 would straddle


def test_read_selection_paper_path():
    wdt = write_distance_table(Topology.path(5), [0, 2]).tolist()
    assert read_selection(1, wdt, [], lambda v: (v,)) == [4]
    assert read_selection(2, wdt, [], lambda v: (v,)) == [4, 3]


def test_repair_selection_counts():
    sel = repair_selection(3, 1, [0] * 6, 1)
    assert len(sel) == 3 and all(len(c) == 1 for c in sel.values())
    full = repair_selection(3, 2, [0] * 4, 2, exclude={1})
    assert sorted(full) == [0, 2, 3] and sum(map(len, full.values())) == 6


def test_repair_prefers_nodes_away_from_writes():
    wdt = write_distance_table(Topology.path(6), [0, 1]).tolist()
    assert set(repair_selection(3, 1, wdt, 1)) == {5, 4, 3}


def test_repair_slots_avoid_write_locked_chunks():
    t = LockTable(3)
    t.add(7, 0, "write")
    assert repair_selection(1, 2, [1, 0], 3, t) == {0: (1, 2)}


# ------------------------------------------------------------ scripted runs
def test_write_solicits_exactly_its_footprint():
    sim = scripted()
    sim.submit(0.0, "write", native_idx=0, service_time=1.0)
    finish(sim)
    assert rows_of(sim, "solicit")[0][6] == "1 3 7"
    assert sorted(r[4] for r in rows_of(sim, "lock")) == [1, 3, 7]
    assert len(rows_of(sim, "unlock")) == 3


def test_read_solicits_adjacent_nodes_when_idle():
    for seed in range(5):
        sim = scripted(seed=seed)
        sim.submit(0.0, "read", service_time=1.0)
        finish(sim)
        a, b = map(int, rows_of(sim, "solicit")[0][6].split())
        assert abs(a - b) == 1


def test_repair_uses_d_helpers_and_skips_target():
    sim = scripted()
    sim.submit(0.0, "repair", target_node=7, service_time=1.0)
    finish(sim)
    nodes = {r[4] for r in rows_of(sim, "lock")}
    assert len(nodes) == 3 and 7 not in nodes


def test_write_waits_for_read_then_runs():
    sim = scripted(delay=0.1)
    sim.submit(0.0, "read", hint_nodes=[3, 4], service_time=2.0)
    sim.submit(0.5, "write", native_idx=0, service_time=1.0)
    trace, _ = finish(sim)
    done = {r[2]: r[0] for r in rows_of(sim, "done")}
    assert done[0] == pytest.approx(2.2)
    assert done[1] > done[0]
    assert any(r[4] == 3 for r in rows_of(sim, "wait", 1))


def test_two_reads_share_chunks():
    sim = scripted()
    sim.submit(0.0, "read", hint_nodes=[2, 3], service_time=1.0)
    sim.submit(0.1, "read", hint_nodes=[2, 3], service_time=5.0)
    finish(sim)
    # the first reader leaves; the second still holds both chunks
    assert [r[6] for r in rows_of(sim, "unlock", 0)] == ["read", "read"]
    assert [r[6] for r in rows_of(sim, "unlock", 1)] == ["read 11>10"] * 2


def test_write_behind_write_is_solicited_next():
    sim = scripted(footprint=[[1, 3], [3, 5]])
    sim.submit(0.0, "write", native_idx=0, service_time=1.0)
    sim.submit(0.1, "write", native_idx=1, service_time=1.0)
    finish(sim)
    solicits = rows_of(sim, "solicit", 1)
    assert solicits[0][6] == "3 5" and solicits[-1][6] == "3"
    assert solicits[-1][0] == pytest.approx(1.0)


def test_wdt_rows_follow_write_locks():
    sim = scripted()
    sim.submit(0.0, "write", native_idx=0, service_time=1.0)
    finish(sim)
    tables = [r[6] for r in rows_of(sim, "wdt")]
    assert tables[0] == " ".join(str(abs(v - 1) + abs(v - 3) + abs(v - 7)) for v in range(8))
    assert tables[-1] == " ".join(["0"] * 8)


def test_vote_for_demoted_request_is_stale():
    sim = scripted()
    sim.submit(0.0, "read", service_time=1.0)
    sim.step()
    req = sim.coord.requests[0]
    sim.coord.demote(req)
    assert req.state == DEMOTED
    with pytest.raises(StaleVote):
        sim.coord.on_vote(req, 0)


def test_unknown_completion():
    sim = scripted()
    sim.submit(0.0, "read", service_time=1.0)
    finish(sim)
    with pytest.raises(UnknownRequest):
        sim.coord.complete_request(Request(id=42, kind="read", arrival_time=0.0))
