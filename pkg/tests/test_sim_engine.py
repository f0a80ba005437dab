import math
import random

import numpy as np
import pytest

from regenquorum.analysis import compare_empirical, completion_pmf, mm1_pn
from regenquorum.code_model import CodeParams, FootprintMatrix
from regenquorum.routing import Topology
from regenquorum.scenarios import mixed_workload, standoff
from regenquorum.scheduler import DeadlockConfig, SlotPolicy
from regenquorum.sim_engine import (
    ConfigError,
    NonPositiveRate,
    SimConfig,
    WorkloadParams,
    backlog_experiment,
    run,
    run_mm1,
    sample_interarrival,
)
from regenquorum.trace import trace_check


def reads_only(lam, horizon, seed=0):
    params = CodeParams(N=4, n=4, k=2, d=2, alpha=1, beta=1, q=2)
    return SimConfig(params=params, footprint=FootprintMatrix.dense(2, 4),
                     slot_policy=SlotPolicy("time", 1.0), deadlock=DeadlockConfig(1.0),
                     workload=WorkloadParams(lambda_r=lam, mu_r=1000.0), topology=Topology.path(4),
                     horizon=horizon, seed=seed)


def test_interarrival_mean_within_three_sigma():
    rng = random.Random(3)
    n, lam = 50_000, 4.0
    xs = [sample_interarrival(lam, rng) for _ in range(n)]
    assert abs(sum(xs) / n - 1 / lam) <= 3 * (1 / lam) / math.sqrt(n)
    with pytest.raises(NonPositiveRate):
        sample_interarrival(0.0, rng)


def test_poisson_arrival_count():
    _, m = run(reads_only(10.0, 1000.0))
    # sd of a Poisson(1e4) count is 100
    assert abs(m.values["arrivals"] - 10_000) <= 300


def test_same_seed_same_trace():
    cfg = mixed_workload(4, horizon=60)
    assert run(cfg)[0].digest() == run(cfg)[0].digest()
    assert run(cfg, seed=5)[0].digest() != run(cfg)[0].digest()


def test_mixed_workload_passes_checker_with_live_invariants():
    for seed in range(3):
        trace, metrics = run(mixed_workload(seed, horizon=150, check_invariants=True))
        assert trace_check(trace).ok
        assert metrics.values["completed"] == metrics.values["arrivals"]


def test_multi_chunk_nodes():
    cfg = mixed_workload(1, horizon=150, N=5, k=2, d=3, alpha=2, beta=1, q=4)
    trace, _ = run(cfg)
    rep = trace_check(trace)
    assert rep.ok, rep.violations


def test_standoff_resolves_in_one_round():
    for seed in range(3):
        sim = standoff(seed)
        trace, _ = sim.run()
        assert len(sim.deadlocks) == 1
        rec = sim.deadlocks[0]
        assert rec["time"] == pytest.approx(1.0)
        assert rec["demoted"] == [0]
        done = [r[2] for r in trace.rows if r[1] == "done"]
        assert done == [1, 0]


def test_mm1_distribution():
    m = run_mm1(5.0, 10.0, 1_000_000, seed=0)
    div = compare_empirical(m.in_system, lambda n: mm1_pn(5.0, 10.0, n), support=range(11))
    assert div.tv < 0.02


def test_backlog_matches_completion_pmf():
    ts = [0.0, 0.1, 0.3]
    emp = backlog_experiment(5, 10.0, ts, 20_000, seed=2)
    assert emp.shape == (3, 6)
    assert np.allclose(emp.sum(axis=1), 1.0)
    assert emp[0, 5] == 1.0
    for i, t in enumerate(ts):
        for m in range(6):
            p = completion_pmf(5, 10.0, t, m)
            assert abs(emp[i, m] - p) <= 4 * math.sqrt(p * (1 - p) / 20_000) + 1e-12


def test_config_validation():
    base = reads_only(1.0, 10.0)
    with pytest.raises(ConfigError):
        SimConfig(**{**base.__dict__, "message_delay": -1})
    with pytest.raises(ConfigError):
        SimConfig(**{**base.__dict__, "topology": Topology.path(5)})
    with pytest.raises(ConfigError):
        SimConfig(**{**base.__dict__, "footprint": FootprintMatrix.dense(3, 4)})
    with pytest.raises(ConfigError):
        WorkloadParams(mu_r=0.0)


def test_event_budget():
    cfg = reads_only(10.0, 100.0)
    cfg.max_events = 50
    with pytest.raises(RuntimeError, match="event budget"):
        run(cfg)
