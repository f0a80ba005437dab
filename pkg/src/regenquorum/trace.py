"""Simulation trace and metrics files, plus an independent trace replayer.

Trace rows are ``(time, event, request_id, kind, node, chunk, detail)``.  The
checker in :func:`trace_check` rebuilds chunk holders, bits, waiting sets and
the write-distance table from the rows alone (plus the configuration row) and
re-asserts the protocol invariants.
"""
from __future__ import annotations

import csv
import hashlib
import io
import json
from collections import defaultdict, deque
from dataclasses import dataclass, field
from typing import Dict, List, Optional

TRACE_SCHEMA = "# regenquorum-trace v1"
METRICS_SCHEMA = "# regenquorum-metrics v1"
TRACE_COLUMNS = ["time", "event", "request_id", "kind", "node", "chunk", "detail"]


@dataclass
class SimTrace:
    rows: List[tuple]
    meta: dict = field(default_factory=dict)

    def _materialized(self) -> List[tuple]:
        rows = list(self.rows)
        if rows and rows[0][1] == "config":
            rows[0] = rows[0][:6] + (json.dumps(self.meta, sort_keys=True),)
        return rows

    def to_csv(self) -> str:
        buf = io.StringIO()
        w = csv.writer(buf, lineterminator="\n")
        buf.write(TRACE_SCHEMA + "\n")
        w.writerow(TRACE_COLUMNS)
        for t, ev, rid, kind, node, slot, detail in self._materialized():
            w.writerow([repr(float(t)), ev, rid, kind, node, slot, detail])
        return buf.getvalue()

    def write_csv(self, path) -> None:
        with open(path, "w", newline="") as fh:
            fh.write(self.to_csv())

    @classmethod
    def from_csv(cls, text: str) -> "SimTrace":
        lines = text.splitlines()
        if not lines or lines[0] != TRACE_SCHEMA:
            raise ValueError("missing trace schema header")
        reader = csv.reader(io.StringIO("\n".join(lines[1:])))
        header = next(reader)
        if header != TRACE_COLUMNS:
            raise ValueError(f"unexpected trace columns {header}")
        rows = []
        meta: dict = {}
        for t, ev, rid, kind, node, slot, detail in reader:
            rows.append((float(t), ev, int(rid), kind, int(node) if node != "" else "",
                         int(slot) if slot != "" else "", detail))
            if ev == "config":
                meta = json.loads(detail)
        return cls(rows=rows, meta=meta)

    @classmethod
    def read_csv(cls, path) -> "SimTrace":
        with open(path, newline="") as fh:
            return cls.from_csv(fh.read())

    def digest(self) -> str:
        return hashlib.sha256(self.to_csv().encode()).hexdigest()


@dataclass
class Metrics:
    values: Dict[str, float] = field(default_factory=dict)
    in_system: Dict[int, float] = field(default_factory=dict)  # time-weighted P(n in system)
    latencies: Dict[str, List[float]] = field(default_factory=dict)

    def to_rows(self) -> List[tuple]:
        rows = [(k, self.values[k]) for k in sorted(self.values)]
        rows += [(f"p_in_system[{n}]", p) for n, p in sorted(self.in_system.items())]
        return rows

    def to_csv(self) -> str:
        buf = io.StringIO()
        w = csv.writer(buf, lineterminator="\n")
        buf.write(METRICS_SCHEMA + "\n")
        w.writerow(["statistic", "value"])
        for name, value in self.to_rows():
            w.writerow([name, repr(value) if isinstance(value, float) else value])
        return buf.getvalue()

    def write_csv(self, path) -> None:
        with open(path, "w", newline="") as fh:
            fh.write(self.to_csv())

    @classmethod
    def from_csv(cls, text: str) -> "Metrics":
        lines = text.splitlines()
        if not lines or lines[0] != METRICS_SCHEMA:
            raise ValueError("missing metrics schema header")
        reader = csv.reader(io.StringIO("\n".join(lines[1:])))
        next(reader)
        m = cls()
        for name, value in reader:
            num = float(value) if any(c in value for c in ".eEn") else int(value)
            if name.startswith("p_in_system["):
                m.in_system[int(name[len("p_in_system["):-1])] = float(num)
            else:
                m.values[name] = num
        return m


def record_metrics(trace: SimTrace) -> Metrics:
    """Latencies, time-weighted in-system distribution and deadlock counts."""
    m = Metrics()
    arrivals: Dict[int, float] = {}
    kinds: Dict[int, str] = {}
    lat: Dict[str, List[float]] = {"read": [], "write": [], "repair": []}
    time_at: Dict[int, float] = {}
    n = 0
    last = 0.0
    end = 0.0
    counts = {"deadlock": 0, "demote": 0, "lock": 0, "stale": 0, "starved": 0}
    for t, ev, rid, kind, _, _, _ in trace.rows:
        if ev == "config":
            continue
        end = t
        if ev == "arrival" or ev == "done":
            time_at[n] = time_at.get(n, 0.0) + (t - last)
            last = t
            if ev == "arrival":
                n += 1
                arrivals[rid] = t
                kinds[rid] = kind
            else:
                n -= 1
                lat[kind].append(t - arrivals[rid])
        elif ev in counts:
            counts[ev] += 1
    if end > last:
        time_at[n] = time_at.get(n, 0.0) + (end - last)
    total = sum(time_at.values())
    m.in_system = {k: v / total for k, v in sorted(time_at.items())} if total > 0 else {}
    done = sum(len(v) for v in lat.values())
    m.values.update({
        "arrivals": len(arrivals),
        "completed": done,
        "span": end,
        "deadlock_rounds": counts["deadlock"],
        "demotions": counts["demote"],
        "lock_grants": counts["lock"],
        "stale_messages": counts["stale"],
        "starvation_signals": counts["starved"],
    })
    for kind, xs in lat.items():
        m.values[f"completed_{kind}"] = len(xs)
        m.values[f"mean_latency_{kind}"] = sum(xs) / len(xs) if xs else 0.0
    m.latencies = lat
    return m


# ---------------------------------------------------------------- trace check
class Violation(AssertionError):
    pass


def _distances(N: int, edges) -> List[List[int]]:
    adj = [[] for _ in range(N)]
    for a, b in edges:
        adj[a].append(b)
        adj[b].append(a)
    out = []
    for s in range(N):
        d = [-1] * N
        d[s] = 0
        dq = deque([s])
        while dq:
            u = dq.popleft()
            for v in adj[u]:
                if d[v] < 0:
                    d[v] = d[u] + 1
                    dq.append(v)
        out.append(d)
    return out


@dataclass
class CheckReport:
    rows: int = 0
    violations: List[str] = field(default_factory=list)
    quorums: int = 0
    lock_grants: int = 0

    @property
    def ok(self) -> bool:
        return not self.violations


def trace_check(trace: SimTrace, max_violations: int = 50) -> CheckReport:
    """Replay ``trace`` and collect every invariant violation found."""
    meta = trace.meta
    N, alpha = meta["N"], meta["alpha"]
    k, d, beta = meta["k"], meta["d"], meta["beta"]
    loc_of = {int(c): v * alpha + s for c, (v, s) in meta["placement"].items()}
    footprints = [frozenset(loc_of[c] for c in row) for row in meta["footprint"]]
    dist = _distances(N, meta["edges"])
    C = N * alpha
    readers = [set() for _ in range(C)]
    writer: List[Optional[int]] = [None] * C
    bits = ["10"] * C
    node_writes = [0] * N
    expected_wdt = " ".join(["0"] * N)  # recomputed whenever the set of write nodes changes
    held: Dict[int, Dict[int, str]] = defaultdict(dict)
    waiting: Dict[int, set] = defaultdict(set)
    kinds: Dict[int, str] = {}
    info: Dict[int, str] = {}
    quorum_seen: set = set()
    done: set = set()
    votes: set = set()
    lock_count: Dict[int, int] = {}
    unlock_count: Dict[int, int] = {}
    waiting_writes: set = set()
    rep = CheckReport()

    def fail(msg):
        if len(rep.violations) < max_violations:
            rep.violations.append(msg)

    def check_bits(t, loc, detail):
        want = "02" if writer[loc] is not None else ("11" if readers[loc] else "10")
        _, _, change = detail.partition(" ")
        if change:
            old, new = change.split(">")
            if old != bits[loc]:
                fail(f"t={t}: chunk {loc} bits transition from {old} but replay has {bits[loc]}")
            bits[loc] = new
        if bits[loc] != want:
            fail(f"t={t}: chunk {loc} bits {bits[loc]} disagree with holders (expected {want})")

    rep.rows = len(trace.rows)
    for t, ev, rid, kind, node, slot, detail in trace.rows:
        if ev == "vote":
            loc = node * alpha + slot
            if rid not in kinds:
                fail(f"t={t}: vote for request {rid} that never arrived")
            # a chunk may vote again only after its earlier vote was consumed
            key = (loc, rid)
            if key in votes or loc in held[rid]:
                fail(f"t={t}: duplicate vote from chunk {loc} for request {rid} epoch {detail}")
            votes.add(key)
        elif ev == "lock":
            loc = node * alpha + slot
            lock_type = detail.split(" ", 1)[0]
            rep.lock_grants += 1
            lock_count[rid] = lock_count.get(rid, 0) + 1
            if (loc, rid) not in votes:
                fail(f"t={t}: lock by {rid} on chunk {loc} without a vote")
            votes.discard((loc, rid))
            if writer[loc] is not None:
                fail(f"t={t}: {lock_type} lock by {rid} on chunk {loc} write-locked by {writer[loc]}")
            if lock_type == "write":
                if readers[loc]:
                    fail(f"t={t}: write lock by {rid} on chunk {loc} read-locked by {sorted(readers[loc])}")
                writer[loc] = rid
                node_writes[node] += 1
                if node_writes[node] == 1:
                    expected_wdt = None
            else:
                readers[loc].add(rid)
            held[rid][loc] = lock_type
            if lock_type == "read" and waiting_writes:
                mine = held[rid].keys()
                for w in waiting_writes:
                    if w == rid:
                        continue
                    done_set = {l for l, ty in held[w].items() if ty == "write"}
                    if done_set and not done_set.isdisjoint(mine) and not waiting[w].isdisjoint(mine):
                        fail(f"t={t}: request {rid} straddles pending write {w}")
            check_bits(t, loc, detail)
        elif ev == "unlock":
            loc = node * alpha + slot
            unlock_count[rid] = unlock_count.get(rid, 0) + 1
            if held.get(rid, {}).pop(loc, None) is None:
                fail(f"t={t}: request {rid} released chunk {loc} it did not hold")
            if writer[loc] == rid:
                writer[loc] = None
                node_writes[node] -= 1
                if node_writes[node] == 0:
                    expected_wdt = None
            else:
                readers[loc].discard(rid)
            check_bits(t, loc, detail)
        elif ev == "wait":
            loc = node * alpha + slot
            waiting[rid].add(loc)
            if detail == "discard":
                votes.discard((loc, rid))
            if kind == "write":
                waiting_writes.add(rid)
        elif ev == "unwait":
            w = waiting[rid]
            w.discard(node * alpha + slot)
            if not w:
                waiting_writes.discard(rid)
        elif ev == "withdraw":
            votes.discard((node * alpha + slot, rid))
        elif ev == "arrival":
            kinds[rid] = kind
            held[rid] = {}
            waiting[rid] = set()
            info[rid] = detail
        elif ev == "quorum":
            rep.quorums += 1
            quorum_seen.add(rid)
            h = held[rid]
            nodes: Dict[int, int] = {}
            for l in h:
                nodes[l // alpha] = nodes.get(l // alpha, 0) + 1
            if kind == "write":
                native = int(info[rid].split("native=")[1].split()[0])
                if set(h) != footprints[native] or any(ty != "write" for ty in h.values()):
                    fail(f"t={t}: write {rid} executes holding {sorted(h)} not footprint {sorted(footprints[native])}")
            elif kind == "read":
                if len(h) != k * alpha or len(nodes) != k or any(c != alpha for c in nodes.values()):
                    fail(f"t={t}: read {rid} executes with {len(h)} chunks on {len(nodes)} nodes")
            else:
                target = int(info[rid].split("target=")[1].split()[0])
                if len(h) != d * beta or len(nodes) != d or any(c != beta for c in nodes.values()):
                    fail(f"t={t}: repair {rid} executes with {len(h)} chunks on {len(nodes)} nodes")
                if target in nodes:
                    fail(f"t={t}: repair {rid} reads from its own target node {target}")
            if kind != "write" and any(ty != "read" for ty in h.values()):
                fail(f"t={t}: {kind} {rid} holds non-read locks")
        elif ev == "done":
            if rid not in quorum_seen:
                fail(f"t={t}: request {rid} done without quorum")
            if held[rid]:
                fail(f"t={t}: request {rid} done while holding {sorted(held[rid])}")
            done.add(rid)
        elif ev == "demote":
            if held[rid] or waiting[rid]:
                fail(f"t={t}: demoted request {rid} still holds locks or waits")
            quorum_seen.discard(rid)
            votes.difference_update({v for v in votes if v[1] == rid})
        elif ev == "wdt":
            if expected_wdt is None:
                wn = [u for u in range(N) if node_writes[u]]
                expected_wdt = " ".join(str(sum(dist[v][u] for u in wn)) for v in range(N))
            if detail != expected_wdt:
                fail(f"t={t}: write distance table {detail} != recomputed {expected_wdt}")
    missing = set(kinds) - done
    if missing:
        fail(f"end: {len(missing)} requests never completed, e.g. {sorted(missing)[:5]}")
    for r in kinds:
        if lock_count.get(r, 0) != unlock_count.get(r, 0):
            fail(f"end: request {r} has {lock_count.get(r, 0)} grants vs {unlock_count.get(r, 0)} releases")
    if any(b != "10" for b in bits):
        fail("end: chunks left locked")
    return rep
