import pytest

from regenquorum.scenarios import mixed_workload, standoff
from regenquorum.sim_engine import run
from regenquorum.trace import Metrics, SimTrace, record_metrics, trace_check


@pytest.fixture(scope="module")
def sample():
    return run(mixed_workload(2, horizon=80))


def test_trace_round_trip(sample):
    trace, _ = sample
    back = SimTrace.from_csv(trace.to_csv())
    assert back.to_csv() == trace.to_csv()
    assert back.meta == trace.meta
    assert trace_check(back).ok


def test_metrics_round_trip(sample):
    _, metrics = sample
    back = Metrics.from_csv(metrics.to_csv())
    assert back.values == metrics.values
    assert back.in_system == metrics.in_system


def test_metrics_agree_with_trace(sample):
    trace, metrics = sample
    again = record_metrics(trace)
    assert again.values["completed"] == metrics.values["completed"]
    assert sum(metrics.in_system.values()) == pytest.approx(1.0)


def test_bad_headers():
    with pytest.raises(ValueError):
        SimTrace.from_csv("time,event\n")
    with pytest.raises(ValueError):
        Metrics.from_csv("statistic,value\n")


def tamper(trace, fn):
    rows = [fn(r) for r in trace.rows]
    return SimTrace([r for r in rows if r is not None], dict(trace.meta))


def first(trace, event, pred=lambda r: True):
    return next(i for i, r in enumerate(trace.rows) if r[1] == event and pred(r))


def test_detects_write_over_read(sample):
    trace, _ = sample
    i = first(trace, "lock", lambda r: r[6].startswith("read"))
    t, _, rid, kind, node, slot, _ = trace.rows[i]
    rows = list(trace.rows)
    rows.insert(i + 1, (t, "vote", 9999, "write", node, slot, "0"))
    rows.insert(i + 2, (t, "lock", 9999, "write", node, slot, "write"))
    rep = trace_check(SimTrace(rows, trace.meta))
    assert any("write lock by 9999" in v for v in rep.violations)


def test_detects_lost_unlock(sample):
    trace, _ = sample
    i = first(trace, "unlock")
    rows = list(trace.rows)
    del rows[i]
    rep = trace_check(SimTrace(rows, trace.meta))
    assert not rep.ok


def test_detects_duplicate_vote(sample):
    trace, _ = sample
    i = first(trace, "vote")
    rows = list(trace.rows)
    rows.insert(i + 1, rows[i])
    rep = trace_check(SimTrace(rows, trace.meta))
    assert any("duplicate vote" in v for v in rep.violations)


def test_detects_stale_write_distance(sample):
    trace, _ = sample
    i = first(trace, "wdt", lambda r: set(r[6].split()) != {"0"})
    bad = trace.rows[i][:6] + (" ".join(["0"] * trace.meta["N"]),)
    rows = list(trace.rows)
    rows[i] = bad
    rep = trace_check(SimTrace(rows, trace.meta))
    assert any("write distance table" in v for v in rep.violations)


def test_detects_short_read_quorum(sample):
    trace, _ = sample
    i = first(trace, "lock", lambda r: r[3] == "read")
    rid, loc = trace.rows[i][2], trace.rows[i][4:6]

    def drop(r):
        if r[2] == rid and r[4:6] == loc and r[1] in ("lock", "unlock", "vote"):
            return None
        return r
    rep = trace_check(tamper(trace, drop))
    assert any(f"read {rid} executes" in v for v in rep.violations)


def test_detects_bit_mismatch(sample):
    trace, _ = sample
    i = first(trace, "lock", lambda r: r[6] == "write 10>02")
    rows = list(trace.rows)
    rows[i] = rows[i][:6] + ("write 10>11",)
    rep = trace_check(SimTrace(rows, trace.meta))
    assert any("bits" in v for v in rep.violations)


def test_detects_straddle():
    sim = standoff(0)
    trace, _ = sim.run()
    rows = list(trace.rows)
    # let the read take node 6 while the write still holds 5-9 and waits on 4
    i = first(trace, "lock", lambda r: r[2] == 1 and r[4] == 9)
    t = rows[i][0]
    rows.insert(i + 1, (t, "vote", 0, "read", 6, 0, "0"))
    rows.insert(i + 2, (t, "lock", 0, "read", 6, 0, "read"))
    rep = trace_check(SimTrace(rows, trace.meta))
    assert any("straddles pending write 1" in v for v in rep.violations)
