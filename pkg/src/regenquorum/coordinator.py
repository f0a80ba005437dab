"""Super-user side of the protocol: lock table, vote accounting and target selection.

Chunks are addressed internally by a flat location ``loc = node * alpha + slot``.
The coordinator does not own the clock; it is driven by :class:`Simulation`
through ``start``, ``on_vote_delivery``, ``on_grant``, ``complete_request``,
``demote`` and ``resume``, and it asks the simulation to schedule follow-ups.
"""
from __future__ import annotations

from collections import defaultdict
from dataclasses import dataclass, field
from typing import Dict, Iterable, List, Optional, Sequence

from .chunk_store import READ, REPAIR, WRITE, ChunkState, LockBit
from .routing import rank_by_write_distance

WAITING_VOTES = "waiting-votes"
WAITING_LOCKS = "waiting-on-locks"
RUNNING = "locked-running"
DONE = "done"
DEMOTED = "demoted"
QUEUED = "queued"

# lock/unlock row details when the vote/lock bits of the chunk change
_TAKE = {"read": "read 10>11", "write": "write 10>02"}
_DROP = {"read": "read 11>10", "write": "write 02>10"}


class StaleVote(Exception):
    pass


class UnknownRequest(KeyError):
    pass


@dataclass(slots=True, eq=False)
class Request:
    id: int
    kind: str
    arrival_time: float
    priority: int = 0
    slot: int = -1
    state: str = QUEUED
    native_idx: Optional[int] = None
    target_node: Optional[int] = None  # repair: node being rebuilt, never a helper
    hint_nodes: Optional[tuple] = None  # first-round read/repair targets (scripted runs)
    service_time: Optional[float] = None
    quorum: int = 0
    need_nodes: int = 0
    epoch: int = 0
    target_chunks: frozenset = frozenset()
    # loc -> "read"/"write"; these are the votes that became locks
    held: Dict[int, str] = field(default_factory=dict)
    waiting: set = field(default_factory=set)
    pending_votes: set = field(default_factory=set)
    inflight: Dict[int, tuple] = field(default_factory=dict)
    nodes_held: set = field(default_factory=set)
    quorum_time: Optional[float] = None

    @property
    def votes(self) -> set:
        return set(self.held)

    def __hash__(self):
        return self.id


@dataclass(frozen=True)
class PendingWriteRecord:
    request_id: int
    done_set: frozenset
    waiting_set: frozenset


def check_consistency_restriction(candidate: Iterable[int],
                                  records: Sequence[PendingWriteRecord],
                                  request_id: Optional[int] = None) -> Optional[int]:
    """Return the id of a record the selection would straddle, else ``None``.

    A selection may not touch both the chunks a pending write already holds and
    the chunks it is still waiting for.
    """
    cand = candidate if isinstance(candidate, (set, frozenset)) else set(candidate)
    for rec in records:
        if rec.request_id == request_id:
            continue
        if not cand.isdisjoint(rec.done_set) and not cand.isdisjoint(rec.waiting_set):
            return rec.request_id
    return None


class LockTable:
    """Granted and waiting locks per chunk location."""

    HELD = ("read", "write")

    def __init__(self, alpha: int):
        self.alpha = alpha
        self.by_loc: Dict[int, Dict[int, str]] = defaultdict(dict)

    def add(self, req: int, loc: int, lock_type: str) -> None:
        self.by_loc[loc][req] = lock_type

    def remove(self, req: int, loc: int) -> None:
        d = self.by_loc.get(loc)
        if d is not None:
            d.pop(req, None)
            if not d:
                del self.by_loc[loc]

    def can_grant(self, loc: int, lock_type: str) -> bool:
        d = self.by_loc.get(loc)
        if not d:
            return True
        if lock_type == "write":
            return not any(t == "read" or t == "write" for t in d.values())
        return not any(t == "write" for t in d.values())

    def busy_for_read(self, loc: int) -> bool:
        d = self.by_loc.get(loc)
        return bool(d) and any(t == "write" or t == "waiting-write" for t in d.values())

    def entries(self) -> set:
        a = self.alpha
        return {(r, loc // a, loc % a, t) for loc, d in self.by_loc.items() for r, t in d.items()}


def read_selection(need: int, wdt: Sequence[int], records: Sequence[PendingWriteRecord],
                   locs_of, held_locs: Iterable[int] = (), excluded: Iterable[int] = (),
                   request_id: Optional[int] = None, preferred: Sequence[int] = ()) -> List[int]:
    """Greedy node choice for one solicitation round.

    ``preferred`` nodes (e.g. an adjacent window) are tried first, then the rest by
    descending write distance; a node is skipped when adding its chunks would
    straddle a pending write record.  May return fewer than ``need`` nodes.
    """
    excluded = set(excluded)
    order = [v for v in preferred if v not in excluded]
    if not records and len(order) >= need:
        return order[:need]
    seen = set(order)
    order += rank_by_write_distance(wdt, (v for v in range(len(wdt))
                                          if v not in excluded and v not in seen))
    chosen: List[int] = []
    chunkset = set(held_locs)
    for v in order:
        if len(chosen) == need:
            break
        locs = locs_of(v)
        if records and check_consistency_restriction(chunkset | set(locs), records, request_id) is not None:
            continue
        chosen.append(v)
        chunkset.update(locs)
    return chosen


def repair_selection(d: int, beta: int, wdt: Sequence[int], alpha: int,
                     table: Optional[LockTable] = None, exclude: Iterable[int] = ()) -> Dict[int, tuple]:
    """``d`` helper nodes by write distance, ``beta`` slots each (idle slots first)."""
    exclude = set(exclude)
    nodes = rank_by_write_distance(wdt, (v for v in range(len(wdt)) if v not in exclude))[:d]
    if len(nodes) < d:
        raise ValueError(f"only {len(nodes)} helper nodes available for d={d}")
    return {v: repair_slots(v, beta, alpha, table) for v in nodes}


def repair_slots(node: int, beta: int, alpha: int, table: Optional[LockTable]) -> tuple:
    base = node * alpha
    slots = sorted(range(alpha), key=lambda s: ((table is not None and table.busy_for_read(base + s)), s))
    return tuple(base + s for s in sorted(slots[:beta]))


class Coordinator:
    def __init__(self, sim, params, write_locs: Sequence[frozenset], topology, qv, rng):
        self.sim = sim
        self.params = params
        self.N = params.N
        self.alpha = params.alpha
        self.qv = qv
        self.topology = topology
        self.dist = topology.dist.tolist()
        self.dist_cols = topology.dist.T.tolist()
        self.rng = rng
        self.write_locs = list(write_locs)
        self.chunks = [ChunkState(v, s) for v in range(self.N) for s in range(self.alpha)]
        self.table = LockTable(self.alpha)
        self.requests: Dict[int, Request] = {}
        self.node_writes = [0] * self.N
        self.write_nodes: set = set()
        self.wdt = [0] * self.N
        self.active_writes: set = set()
        self.starved: set = set()
        self.parked: List[Request] = []

    # ------------------------------------------------------------ helpers
    def _emit(self, event, req, node="", slot="", detail=""):
        self.sim.rows.append((self.sim.now, event, req.id if req is not None else -1,
                              req.kind if req is not None else "", node, slot, detail))

    def records(self) -> List[PendingWriteRecord]:
        out = []
        for w in self.active_writes:
            if w.held and w.waiting:
                out.append(PendingWriteRecord(w.id, frozenset(w.held), frozenset(w.waiting)))
        return out

    def _refresh_wdt(self, added=(), removed=()):
        """Update the write distance table for nodes that gained or lost all write locks."""
        wdt = self.wdt
        for v in added:
            col = self.dist_cols[v]
            wdt = [a + b for a, b in zip(wdt, col)]
        for v in removed:
            col = self.dist_cols[v]
            wdt = [a - b for a, b in zip(wdt, col)]
        self.wdt = wdt
        self.sim.rows.append((self.sim.now, "wdt", -1, "", "", "", " ".join(map(str, wdt))))

    def _node_locs(self, req: Request, v: int) -> tuple:
        a = self.alpha
        if req.kind == READ:
            return tuple(range(v * a, v * a + a))
        return repair_slots(v, self.params.beta, a, self.table)

    def _wait(self, req: Request, loc: int, discard: bool = False):
        ch = self.chunks[loc]
        if discard:
            ch.withdraw_vote(req.id)
            ch.enqueue_wait(req.id, req.kind)
        req.waiting.add(loc)
        self.table.add(req.id, loc, "waiting-write" if req.kind == WRITE else "waiting-read")
        self._emit("wait", req, ch.node, ch.slot, "discard" if discard else "refused")

    def _unwait_all(self, req: Request):
        for loc in sorted(req.waiting):
            ch = self.chunks[loc]
            ch.cancel_wait(req.id)
            self.table.remove(req.id, loc)
            self._emit("unwait", req, ch.node, ch.slot, "cancel")
        req.waiting.clear()

    # ------------------------------------------------------------ lifecycle
    def admit(self, req: Request) -> None:
        self.requests[req.id] = req
        if req.kind == WRITE:
            req.target_chunks = self.write_locs[req.native_idx]
            req.quorum = len(req.target_chunks)
            self.active_writes.add(req)
        elif req.kind == READ:
            req.need_nodes = self.params.k
            req.quorum = self.qv.r
        else:
            req.need_nodes = self.params.d
            req.quorum = self.qv.rep

    def start(self, req: Request) -> None:
        """Begin soliciting votes for a request admitted to the running slot."""
        req.state = WAITING_VOTES
        self.sim.sched.mark_pending(req, self.sim.now)
        self.sim.ensure_check()
        if req.kind == WRITE:
            self.solicit_write(req, sorted(req.target_chunks))
        else:
            self.select(req)

    def handle_request(self, req: Request) -> None:
        self.start(req)

    def solicit_write(self, req: Request, locs: List[int]) -> None:
        self._emit("solicit", req, detail=" ".join(map(str, locs)))
        self.sim.schedule(self.sim.now + self.sim.delay, "vote-delivery", req, (req.epoch, tuple(locs), None))

    def select(self, req: Request) -> None:
        need = req.need_nodes - len(req.nodes_held) - len(req.inflight)
        if need <= 0:
            return
        a = self.alpha
        excluded = set(req.nodes_held) | set(req.inflight) | {loc // a for loc in req.waiting}
        if req.target_node is not None:
            excluded.add(req.target_node)
        fresh = not req.nodes_held and not req.inflight and not req.waiting
        preferred: Sequence[int] = ()
        if fresh and req.hint_nodes is not None and req.epoch == 0:
            preferred = [v for v in req.hint_nodes if v not in excluded][:need]
            need = len(preferred)
        elif fresh and not self.write_nodes and need <= self.N - len(excluded):
            preferred = self.topology.contiguous_window(need, self.rng, excluded)
        records = self.records()
        held_locs = set(req.held)
        chosen = read_selection(need, self.wdt, records, lambda v: self._node_locs(req, v),
                                held_locs, excluded, req.id, preferred)
        if chosen:
            if req in self.starved:
                self.starved.discard(req)
            req.state = WAITING_VOTES
            node_locs = tuple((v, self._node_locs(req, v)) for v in chosen)
            for v, locs in node_locs:
                req.inflight[v] = locs
            self._emit("solicit", req, detail=" ".join(str(v) for v in chosen))
            self.sim.schedule(self.sim.now + self.sim.delay, "vote-delivery", req,
                              (req.epoch, tuple(l for _, ls in node_locs for l in ls), node_locs))
        elif not req.inflight:
            req.state = WAITING_LOCKS
            if req not in self.starved:
                self.starved.add(req)
                self._emit("starved", req)

    # ------------------------------------------------------------ votes
    def on_vote_delivery(self, req: Request, payload) -> None:
        epoch, locs, node_locs = payload
        if epoch != req.epoch or req.state in (DONE, DEMOTED):
            self._emit("stale", req, detail=f"delivery epoch={epoch}")
            return
        voted = []
        rows, now, tag = self.sim.rows, self.sim.now, str(epoch)
        for loc in locs:
            ch = self.chunks[loc]
            if ch.request_vote(req.kind, req.id) is not None:
                voted.append(loc)
                req.pending_votes.add(loc)
                rows.append((now, "vote", req.id, req.kind, ch.node, ch.slot, tag))
            else:
                self._wait(req, loc)
        self.sim.schedule(self.sim.now + self.sim.delay, "grant", req, (epoch, tuple(voted), node_locs))

    def on_grant(self, req: Request, payload) -> None:
        epoch, voted, node_locs = payload
        if epoch != req.epoch or req.state in (DONE, DEMOTED):
            self._emit("stale", req, detail=f"grant epoch={epoch}")
            return
        if req.kind == WRITE:
            self._grant_write(req, voted)
        else:
            self._grant_nodes(req, set(voted), node_locs)

    def _lock(self, req: Request, loc: int, lock_type: str):
        ch = self.chunks[loc]
        free = ch.lock_bit is LockBit.NONE
        ch.apply_lock(lock_type, req.id)
        req.pending_votes.discard(loc)
        req.held[loc] = lock_type
        self.table.by_loc[loc][req.id] = lock_type
        # bits only change when a free chunk is taken
        detail = (_TAKE[lock_type] if free else lock_type)
        self.sim.rows.append((self.sim.now, "lock", req.id, req.kind, ch.node, ch.slot, detail))

    def _grant_write(self, req: Request, voted) -> None:
        table = self.table
        added = []
        for loc in voted:
            if table.can_grant(loc, "write"):
                self._lock(req, loc, "write")
                v = loc // self.alpha
                if self.node_writes[v] == 0:
                    self.write_nodes.add(v)
                    added.append(v)
                self.node_writes[v] += 1
            else:
                req.pending_votes.discard(loc)
                self._wait(req, loc, discard=True)
        if added:
            self._refresh_wdt(added=added)
        if len(req.held) == req.quorum:
            self._execute(req)
        elif req.waiting:
            req.state = WAITING_LOCKS

    def _grant_nodes(self, req: Request, voted: set, node_locs) -> None:
        table = self.table
        records = None
        for v, locs in node_locs:
            req.inflight.pop(v, None)
            ok = all(loc in voted and table.can_grant(loc, "read") for loc in locs)
            if ok:
                if records is None:
                    records = self.records()
                if records and check_consistency_restriction(set(req.held) | set(locs), records, req.id) is not None:
                    ok = False
                    self._emit("restricted", req, v)
            if ok:
                for loc in locs:
                    self._lock(req, loc, "read")
                req.nodes_held.add(v)
                continue
            for loc in locs:
                if loc in voted:
                    req.pending_votes.discard(loc)
                    if table.can_grant(loc, "read"):
                        self.chunks[loc].withdraw_vote(req.id)
                        self._emit("withdraw", req, loc // self.alpha, loc % self.alpha)
                    else:
                        self._wait(req, loc, discard=True)
            self._emit("refuse", req, v)
        if len(req.nodes_held) == req.need_nodes:
            self._execute(req)
        elif not req.inflight:
            self.select(req)

    def on_vote(self, req: Request, loc: int) -> None:
        """Single-vote entry point; equivalent to a one-chunk grant batch."""
        if req.state in (DONE, DEMOTED):
            raise StaleVote(f"request {req.id} is {req.state}")
        if req.kind == WRITE:
            self._grant_write(req, (loc,))
        else:
            v = loc // self.alpha
            self._grant_nodes(req, {loc}, ((v, (loc,)),))

    # ------------------------------------------------------------ execution
    def _execute(self, req: Request) -> None:
        sim = self.sim
        self._unwait_all(req)
        self.starved.discard(req)
        req.state = RUNNING
        req.quorum_time = sim.now
        sim.sched.mark_quorum(req, sim.now)
        if self.parked:
            self.release_parked()
        self._emit("quorum", req, detail=" ".join(map(str, sorted(req.held))))
        sim.schedule(sim.now + sim.service_time(req), "service-completion", req, req.epoch)

    def _release_all(self, req: Request) -> List[tuple]:
        promos = []
        removed = []
        a = self.alpha
        rows, now = self.sim.rows, self.sim.now
        for loc in sorted(req.held):
            ch = self.chunks[loc]
            for r, kind in ch.release_lock(req.id):
                promos.append((r, loc))
            self.table.remove(req.id, loc)
            lock_type = req.held[loc]
            detail = _DROP[lock_type] if ch.lock_bit is LockBit.NONE else lock_type
            rows.append((now, "unlock", req.id, req.kind, ch.node, ch.slot, detail))
            if req.held[loc] == "write":
                v = loc // a
                self.node_writes[v] -= 1
                if self.node_writes[v] == 0:
                    self.write_nodes.discard(v)
                    removed.append(v)
        req.held.clear()
        req.nodes_held.clear()
        if removed:
            self._refresh_wdt(removed=removed)
        return promos

    def complete_request(self, req: Request) -> None:
        if req.id not in self.requests:
            raise UnknownRequest(req.id)
        if req.state != RUNNING:
            raise StaleVote(f"completion for request {req.id} in state {req.state}")
        sim = self.sim
        promos = self._release_all(req)
        req.state = DONE
        del self.requests[req.id]
        self.active_writes.discard(req)
        self._emit("done", req)
        if self.parked:
            self.release_parked()
        started = sim.sched.finish(req, sim.now)
        self._promote(promos)
        for r in started:
            self.start(r)
        self._rekick()

    def demote(self, req: Request) -> None:
        """Drop every lock, wait and in-flight vote of ``req`` and retry later."""
        req.epoch += 1
        for loc in sorted(req.pending_votes):
            self.chunks[loc].withdraw_vote(req.id)
        req.pending_votes.clear()
        req.inflight.clear()
        self._unwait_all(req)
        promos = self._release_all(req)
        self.starved.discard(req)
        req.state = DEMOTED
        self._emit("demote", req, detail=f"priority={req.priority}")
        if req not in self.parked:
            self.parked.append(req)
        self._promote(promos)

    def release_parked(self) -> None:
        """Let demoted requests retry one message delay from now.

        A victim stays parked until the slot makes progress (a quorum forms or a
        request finishes), so it cannot re-take chunks it just gave up while the
        rest of the cycle is still stuck.
        """
        out, self.parked = self.parked, []
        for r in out:
            self.sim.schedule(self.sim.now + self.sim.delay, "resume", r, r.epoch)

    def resume(self, req: Request, epoch: int) -> None:
        if req.epoch != epoch or req.state != DEMOTED:
            return
        self.start(req)

    def _promote(self, promos) -> None:
        reqs = self.requests
        todo = []
        for rid, loc in promos:
            r = reqs[rid]
            if loc in r.waiting:
                r.waiting.discard(loc)
                self.table.remove(rid, loc)
                ch = self.chunks[loc]
                self._emit("unwait", r, ch.node, ch.slot, "promote")
                todo.append((r, loc))
        todo.sort(key=lambda e: (-e[0].priority, e[0].arrival_time, e[0].id, e[1]))
        write_locs: Dict[Request, list] = {}
        readers = []
        for r, loc in todo:
            if r.state in (DONE, DEMOTED, RUNNING):
                continue
            if r.kind == WRITE:
                write_locs.setdefault(r, []).append(loc)
            elif r not in readers:
                readers.append(r)
        for r, locs in write_locs.items():
            self.solicit_write(r, locs)
        for r in readers:
            self.select(r)

    def _rekick(self) -> None:
        if not self.starved:
            return
        for r in sorted(self.starved, key=lambda r: (-r.priority, r.arrival_time, r.id)):
            if r in self.starved:
                self.select(r)

    # ------------------------------------------------------------ checks
    def check_invariants(self) -> None:
        """Chunk bits, chunk holders and lock-table entries must agree."""
        for loc, ch in enumerate(self.chunks):
            ch.check()
            d = self.table.by_loc.get(loc, {})
            readers = {r for r, t in d.items() if t == "read"}
            writers = {r for r, t in d.items() if t == "write"}
            if readers != ch.readers or writers != ({ch.writer} if ch.writer is not None else set()):
                raise AssertionError(f"lock table disagrees with chunk {loc}: {d} vs {ch.readers}/{ch.writer}")
            waiters = {r for r, t in d.items() if t.startswith("waiting")}
            if waiters != {r for r, _ in ch.waiting}:
                raise AssertionError(f"waiting entries disagree on chunk {loc}: {waiters} vs {list(ch.waiting)}")
        fresh = [sum(row[u] for u in self.write_nodes) for row in self.dist]
        if fresh != self.wdt:
            raise AssertionError("write distance table is stale")
