"""Deterministic discrete-event loop driving the coordinator.

Arrivals are Poisson per request kind, service times exponential.  Every random
draw comes from a purpose-specific stream derived from the run seed, so turning
one workload feature on or off does not shift the others.
"""
from __future__ import annotations

import heapq
import math
import random
from dataclasses import dataclass, field
from typing import Dict, List, Optional, Sequence, Tuple

import numpy as np

from .chunk_store import READ, REPAIR, WRITE, ChunkState
from .code_model import CodeParams, FootprintMatrix, quorum_values, validate_params
from .coordinator import DEMOTED, Coordinator, Request
from .placement import PlacementMap, assign, build_groups, complete_layout, identity_layout
from .routing import Topology
from .scheduler import DeadlockConfig, Scheduler, SlotPolicy, request_vote_ratio, resolve_deadlock
from .trace import Metrics, SimTrace, record_metrics

EVENT_RANK = {
    "service-completion": 0,
    "arrival": 1,
    "resume": 2,
    "vote-delivery": 3,
    "grant": 4,
    "timeout-check": 5,
}


class ConfigError(ValueError):
    pass


class NonPositiveRate(ValueError):
    pass


@dataclass(frozen=True)
class WorkloadParams:
    lambda_r: float = 0.0
    lambda_w: float = 0.0
    lambda_rep: float = 0.0
    mu_r: float = 1.0
    mu_w: float = 1.0
    mu_rep: Optional[float] = None  # defaults to mu_r

    def __post_init__(self):
        for name in ("lambda_r", "lambda_w", "lambda_rep"):
            if getattr(self, name) < 0:
                raise ConfigError(f"workload.{name} must be >= 0")
        for name in ("mu_r", "mu_w"):
            if not getattr(self, name) > 0:
                raise ConfigError(f"workload.{name} must be > 0")
        if self.mu_rep is not None and not self.mu_rep > 0:
            raise ConfigError("workload.mu_rep must be > 0")


@dataclass
class SimConfig:
    params: CodeParams
    footprint: FootprintMatrix
    slot_policy: SlotPolicy
    deadlock: DeadlockConfig
    workload: WorkloadParams
    topology: Topology
    placement_mode: str = "grouped"  # or "identity"
    message_delay: float = 0.0
    horizon: float = 100.0
    seed: int = 0
    max_events: int = 50_000_000
    check_invariants: bool = False

    def __post_init__(self):
        try:
            validate_params(self.params)
        except ValueError as e:
            raise ConfigError(str(e)) from None
        if self.footprint.total_chunks != self.params.total_chunks:
            raise ConfigError("footprint total_chunks must equal N*alpha")
        if self.footprint.k != self.params.k:
            raise ConfigError("footprint must have exactly k rows")
        if self.topology.N != self.params.N:
            raise ConfigError("topology size must equal N")
        if self.placement_mode not in ("grouped", "identity"):
            raise ConfigError(f"unknown placement mode {self.placement_mode!r}")
        if self.message_delay < 0:
            raise ConfigError("message_delay must be >= 0")
        if not self.horizon >= 0:
            raise ConfigError("horizon must be >= 0")

    def layout(self) -> PlacementMap:
        p = self.params
        if self.placement_mode == "identity":
            return identity_layout(p.N, p.alpha)
        return complete_layout(assign(build_groups(self.footprint), p.N, p.alpha), p.total_chunks)

    def describe(self) -> dict:
        p = self.params
        pm = self.layout()
        return {
            "N": p.N, "n": p.n, "k": p.k, "d": p.d, "alpha": p.alpha, "beta": p.beta, "q": p.q,
            "footprint": [sorted(r) for r in self.footprint.rows],
            "placement": {str(c): list(loc) for c, loc in sorted(pm.location.items())},
            "edges": [list(e) for e in self.topology.edges],
            "topology": self.topology.shape,
            "slot_mode": self.slot_policy.mode, "slot_value": self.slot_policy.value,
            "t0": self.deadlock.t0,
            "lambda_r": self.workload.lambda_r, "lambda_w": self.workload.lambda_w,
            "lambda_rep": self.workload.lambda_rep, "mu_r": self.workload.mu_r,
            "mu_w": self.workload.mu_w, "mu_rep": self.workload.mu_rep,
            "message_delay": self.message_delay, "horizon": self.horizon, "seed": self.seed,
        }


def sample_interarrival(rate: float, rng: random.Random) -> float:
    """Exponential(rate) by inverse CDF on a uniform draw."""
    if not rate > 0:
        raise NonPositiveRate(f"rate must be positive, got {rate}")
    return -math.log(1.0 - rng.random()) / rate


def _stream(seed: int, purpose: str) -> random.Random:
    return random.Random(f"regenquorum:{seed}:{purpose}")


class Simulation:
    def __init__(self, config: SimConfig, seed: Optional[int] = None):
        self.config = config
        self.seed = config.seed if seed is None else seed
        p = config.params
        self.qv = quorum_values(p)
        self.delay = config.message_delay
        self.now = 0.0
        self.rows: List[tuple] = []
        self.heap: list = []
        self._seq = 0
        self.events = 0
        self.next_id = 0
        self.deadlocks: List[dict] = []
        self._check_at: Optional[float] = None
        self.rng = {name: _stream(self.seed, name) for name in
                    ("arrival-read", "arrival-write", "arrival-repair", "service", "workload", "routing")}
        pm = config.layout()
        loc_of = {c: v * p.alpha + s for c, (v, s) in pm.location.items()}
        write_locs = [frozenset(loc_of[c] for c in row) for row in config.footprint.rows]
        self.sched = Scheduler(config.slot_policy, config.deadlock)
        self.coord = Coordinator(self, p, write_locs, config.topology, self.qv, self.rng["routing"])
        self.meta = config.describe()
        self.meta["seed"] = self.seed
        w = config.workload
        self._rates = {READ: w.lambda_r, WRITE: w.lambda_w, REPAIR: w.lambda_rep}
        self._mu = {READ: w.mu_r, WRITE: w.mu_w, REPAIR: w.mu_rep if w.mu_rep is not None else w.mu_r}
        for kind in (READ, WRITE, REPAIR):
            if self._rates[kind] > 0:
                self._next_arrival(kind, 0.0)

    # ------------------------------------------------------------ scheduling
    def schedule(self, time: float, kind: str, req: Optional[Request], payload=None) -> None:
        self._seq += 1
        if req is None:
            key = (time, EVENT_RANK[kind], 0, 0.0, -1, self._seq)
        else:
            key = (time, EVENT_RANK[kind], -req.priority, req.arrival_time, req.id, self._seq)
        heapq.heappush(self.heap, (key, kind, req, payload))

    def ensure_check(self) -> None:
        t = self.sched.next_check_time()
        if t is not None and (self._check_at is None or self._check_at > t):
            self._check_at = t
            self.schedule(t, "timeout-check", None, t)

    def service_time(self, req: Request) -> float:
        if req.service_time is not None:
            return req.service_time
        return sample_interarrival(self._mu[req.kind], self.rng["service"])

    def _next_arrival(self, kind: str, after: float) -> None:
        t = after + sample_interarrival(self._rates[kind], self.rng["arrival-" + kind])
        if t <= self.config.horizon:
            self.schedule(t, "arrival", None, (kind, None))

    def submit(self, time: float, kind: str, native_idx: Optional[int] = None,
               target_node: Optional[int] = None, hint_nodes: Optional[Sequence[int]] = None,
               service_time: Optional[float] = None) -> None:
        """Script one request arrival in addition to any Poisson workload."""
        if kind not in (READ, WRITE, REPAIR):
            raise ConfigError(f"unknown request kind {kind!r}")
        script = dict(native_idx=native_idx, target_node=target_node,
                    hint_nodes=tuple(hint_nodes) if hint_nodes is not None else None,
                    service_time=service_time)
        self.schedule(time, "arrival", None, (kind, script))

    # ------------------------------------------------------------ handlers
    def _arrival(self, payload) -> None:
        kind, script = payload
        if script is None:
            self._next_arrival(kind, self.now)
            script = {}
        wl = self.rng["workload"]
        p = self.config.params
        req = Request(id=self.next_id, kind=kind, arrival_time=self.now,
                      hint_nodes=script.get("hint_nodes"), service_time=script.get("service_time"))
        self.next_id += 1
        if kind == WRITE:
            req.native_idx = script["native_idx"] if script.get("native_idx") is not None else wl.randrange(p.k)
        elif kind == REPAIR:
            req.target_node = script["target_node"] if script.get("target_node") is not None else wl.randrange(p.N)
        self.coord.admit(req)
        slot = self.sched.enqueue(req, self.now)
        detail = {WRITE: f"native={req.native_idx}", REPAIR: f"target={req.target_node}"}.get(kind, "")
        self.rows.append((self.now, "arrival", req.id, kind, "", "", f"slot={slot} {detail}".strip()))
        if self.sched.is_running(req):
            self.coord.start(req)

    def _timeout_check(self, at: float) -> None:
        if self._check_at != at:
            return
        self._check_at = None
        sched = self.sched
        if sched.detect_deadlock(self.now):
            pending = sorted(sched.pending, key=lambda r: r.id)
            ratios = {r.id: request_vote_ratio(r, self.qv) for r in pending}
            victims = resolve_deadlock(pending, self.qv, sched.deadlock.demotion_fraction)
            sched.rounds += 1
            record = {"time": self.now, "round": sched.rounds, "pending": [r.id for r in pending],
                      "demoted": [r.id for r in victims], "ratios": {i: str(x) for i, x in ratios.items()}}
            self.deadlocks.append(record)
            self.rows.append((self.now, "deadlock", -1, "", "", "",
                              f"round={sched.rounds} pending={len(pending)} demoted="
                              + ",".join(str(r.id) for r in victims)
                              + " ratios=" + ",".join(f"{r.id}:{ratios[r.id]}" for r in victims)))
            for r in victims:
                self.coord.demote(r)
            # victims wait for the rest of the slot to make progress; if nobody
            # else is left to make it, they all retry
            if not any(r.state != DEMOTED for r in sched.pending):
                self.coord.release_parked()
            sched.stall_since = self.now
            self.coord._rekick()
        self.ensure_check()

    # ------------------------------------------------------------ main loop
    def step(self) -> bool:
        if not self.heap:
            return False
        key, kind, req, payload = heapq.heappop(self.heap)
        self.now = key[0]
        self.events += 1
        coord = self.coord
        if kind == "vote-delivery":
            coord.on_vote_delivery(req, payload)
        elif kind == "grant":
            coord.on_grant(req, payload)
        elif kind == "service-completion":
            if payload == req.epoch:
                coord.complete_request(req)
        elif kind == "arrival":
            self._arrival(payload)
        elif kind == "resume":
            coord.resume(req, payload)
        elif kind == "timeout-check":
            self._timeout_check(payload)
        if self.config.check_invariants:
            coord.check_invariants()
        return True

    def run(self) -> Tuple[SimTrace, Metrics]:
        self.rows.insert(0, (0.0, "config", -1, "", "", "", None))
        limit = self.config.max_events
        while self.step():
            if self.events >= limit:
                raise RuntimeError(f"event budget {limit} exhausted at t={self.now}")
        trace = SimTrace(rows=self.rows, meta=self.meta)
        metrics = record_metrics(trace)
        metrics.values["events"] = self.events
        return trace, metrics


def run(config: SimConfig, seed: Optional[int] = None) -> Tuple[SimTrace, Metrics]:
    return Simulation(config, seed).run()


# ---------------------------------------------------------------- validation modes
def run_mm1(lam: float, mu: float, n_events: int, seed: int = 0) -> Metrics:
    """Single chunk, exclusive lock: requests queue FIFO behind the write lock.

    Returns time-weighted in-system distribution over the simulated span.
    """
    arr = _stream(seed, "arrival-write")
    svc = _stream(seed, "service")
    chunk = ChunkState(0, 0)
    heap: list = []
    seq = 0
    now = 0.0
    in_system = 0
    time_at: Dict[int, float] = {}
    last = 0.0
    next_id = 0
    heapq.heappush(heap, (sample_interarrival(lam, arr), 1, seq, "arrival", None))
    events = 0
    while events < n_events:
        t, _, _, kind, rid = heapq.heappop(heap)
        time_at[in_system] = time_at.get(in_system, 0.0) + (t - last)
        last = now = t
        events += 1
        seq += 1
        if kind == "arrival":
            rid = next_id
            next_id += 1
            in_system += 1
            heapq.heappush(heap, (now + sample_interarrival(lam, arr), 1, seq, "arrival", None))
            if chunk.request_vote(WRITE, rid) is not None:
                chunk.apply_lock(WRITE, rid)
                heapq.heappush(heap, (now + sample_interarrival(mu, svc), 0, seq, "departure", rid))
        else:
            in_system -= 1
            promoted = chunk.release_lock(rid)
            if promoted:
                head, _ = promoted[0]
                chunk.request_vote(WRITE, head)
                chunk.apply_lock(WRITE, head)
                chunk.waiting.extend(promoted[1:])
                heapq.heappush(heap, (now + sample_interarrival(mu, svc), 0, seq, "departure", head))
    total = sum(time_at.values())
    dist = {n: v / total for n, v in sorted(time_at.items())} if total > 0 else {}
    m = Metrics()
    m.values.update({"events": events, "span": total, "arrivals": next_id})
    m.in_system = dist
    return m


def backlog_experiment(N0: int, mu: float, t_grid: Sequence[float], replications: int = 10_000,
                       seed: int = 0) -> np.ndarray:
    """Empirical P_m(t) for a backlog of N0 requests served one at a time, no arrivals.

    Returns an array of shape (len(t_grid), N0 + 1): row i, column m is the fraction
    of replications with m requests still outstanding at ``t_grid[i]``.
    """
    if N0 < 1:
        raise ValueError("N0 must be >= 1")
    rng = np.random.default_rng(np.random.SeedSequence([seed, N0]))
    u = rng.random((replications, N0))
    finish = np.cumsum(-np.log1p(-u) / mu, axis=1)
    t = np.asarray(t_grid, dtype=float)
    out = np.zeros((len(t), N0 + 1))
    for i, ti in enumerate(t):
        remaining = N0 - (finish <= ti).sum(axis=1)
        out[i] = np.bincount(remaining, minlength=N0 + 1) / replications
    return out
