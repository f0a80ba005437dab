"""
A read and a write that block each other
========================================

Ten single-chunk nodes, six votes needed on each side.  The read grabs nodes
0-4, the write grabs 5-9, and both wait for node 4 or 5 forever unless the
scheduler notices that nothing has reached quorum for t0 time units.
"""
from regenquorum.scenarios import standoff
from regenquorum.trace import trace_check

sim = standoff(seed=0, t0=1.0)
trace, metrics = sim.run()

for rec in sim.deadlocks:
    print(f"t={rec['time']:.2f}: pending {rec['pending']}, ratios {rec['ratios']}, demoted {rec['demoted']}")

# the demoted request gives up its locks, the other one finishes, then it retries
for t, ev, rid, kind, node, slot, detail in trace.rows:
    if ev in ("quorum", "done", "demote"):
        print(f"{t:7.3f}  {ev:8s} request {rid} ({kind}) {detail}")

print("replay check:", "ok" if trace_check(trace).ok else "FAILED")
