"""
Reads, writes and repairs under load
====================================

"""
import time

from regenquorum.scenarios import mixed_workload
from regenquorum.sim_engine import run
from regenquorum.trace import SimTrace, trace_check

cfg = mixed_workload(seed=1, horizon=500)
start = time.perf_counter()
trace, metrics = run(cfg)
print(f"{metrics.values['events']} events in {time.perf_counter() - start:.2f}s")

for name in ("arrivals", "completed", "deadlock_rounds", "demotions", "lock_grants"):
    print(f"{name:>16s}: {metrics.values[name]}")
for kind in ("read", "write", "repair"):
    print(f"{kind:>8s}: {metrics.values['completed_' + kind]} done, "
          f"mean latency {metrics.values['mean_latency_' + kind]:.3f}")

# time-weighted distribution of requests in the system
for n, p in list(metrics.in_system.items())[:8]:
    print(f"P({n} in system) = {p:.3f}  " + "#" * int(60 * p))

# the trace file round-trips and replays without reference to the simulator
rep = trace_check(SimTrace.from_csv(trace.to_csv()))
print(f"replayed {rep.rows} rows, {rep.quorums} quorums:", "ok" if rep.ok else rep.violations[:3])

# same seed, same bytes
print("deterministic:", run(cfg)[0].digest() == trace.digest())
