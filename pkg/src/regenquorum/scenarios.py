"""Ready-made scenarios shared by the demos and the test suite."""
from __future__ import annotations

from typing import Optional

from .code_model import CodeParams, FootprintMatrix
from .routing import Topology
from .scheduler import DeadlockConfig, SlotPolicy
from .sim_engine import SimConfig, Simulation, WorkloadParams


def standoff(seed: int = 0, t0: float = 1.0, delay: float = 0.1,
             check_invariants: bool = True) -> Simulation:
    """One read and one write that split ten single-chunk nodes five to five.

    N=10, k=6, q=6 so r = w = 6.  The read is steered onto nodes 0-4 and the
    write (native 0) covers nodes 4-9.  The read locks 0-4, loses the race for
    node 5, and is then barred from 6-9 because they would straddle the write's
    held and waited-for chunks; the write holds 5-9 and waits on 4.  Neither
    can finish until the deadlock rule steps in.  Service times are drawn from
    the seeded stream.
    """
    N = 10
    params = CodeParams(N=N, n=N, k=6, d=6, alpha=1, beta=1, q=6)
    rows = [range(4, 10)] + [[(u + i) % N for i in range(6)] for u in range(1, 6)]
    cfg = SimConfig(
        params=params,
        footprint=FootprintMatrix(rows, N),
        slot_policy=SlotPolicy("time", 10.0),
        deadlock=DeadlockConfig(t0),
        workload=WorkloadParams(mu_r=2.0, mu_w=2.0),
        topology=Topology.path(N),
        placement_mode="identity",
        message_delay=delay,
        horizon=0.0,
        seed=seed,
        check_invariants=check_invariants,
    )
    sim = Simulation(cfg)
    sim.submit(0.0, "read", hint_nodes=range(5))
    sim.submit(1.5 * delay, "write", native_idx=0)
    return sim


def mixed_workload(seed: int, horizon: float = 6000.0, check_invariants: bool = False,
                   N: int = 6, k: int = 2, d: int = 3, alpha: int = 1, beta: int = 1,
                   q: int = 3, footprint_seed: Optional[int] = None) -> SimConfig:
    """Reads, writes and repairs on a small code with partial write footprints."""
    params = CodeParams(N=N, n=N * alpha, k=k, d=d, alpha=alpha,
                        beta=beta, q=q)
    fp = FootprintMatrix.uniform(k, q, N * alpha, seed if footprint_seed is None else footprint_seed)
    return SimConfig(
        params=params,
        footprint=fp,
        slot_policy=SlotPolicy("time", 1.0),
        deadlock=DeadlockConfig(1.0),
        workload=WorkloadParams(lambda_r=2.0, lambda_w=1.0, lambda_rep=0.3, mu_r=4.0, mu_w=4.0),
        topology=Topology.ring(N) if seed % 2 == 0 else Topology.path(N),
        message_delay=0.05,
        horizon=horizon,
        seed=seed,
        check_invariants=check_invariants,
    )
