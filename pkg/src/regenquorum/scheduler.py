"""Request queue: slots, priorities, timeout-based deadlock detection and demotion."""
from __future__ import annotations

import math
from collections import deque
from dataclasses import dataclass
from fractions import Fraction
from typing import Dict, Iterable, List, Optional

from .code_model import QuorumValues


@dataclass(frozen=True)
class SlotPolicy:
    mode: str  # "time" (window length) or "count" (requests per slot)
    value: float

    def __post_init__(self):
        if self.mode not in ("time", "count"):
            raise ValueError(f"unknown slot mode {self.mode!r}")
        if not self.value > 0:
            raise ValueError("slot window/count must be positive")
        if self.mode == "count" and int(self.value) != self.value:
            raise ValueError("slot count must be an integer")


@dataclass(frozen=True)
class DeadlockConfig:
    t0: float
    demotion_fraction: Fraction = Fraction(1, 4)

    def __post_init__(self):
        if not self.t0 > 0:
            raise ValueError("t0 must be positive")


def sort_key(req) -> tuple:
    return (-req.priority, req.arrival_time, req.id)


def request_vote_ratio(req, qv: Optional[QuorumValues] = None) -> Fraction:
    quorum = req.quorum if req.quorum else qv.for_kind(req.kind)
    if quorum <= 0:
        raise ValueError("quorum must be positive")
    return Fraction(len(req.held), quorum)


def resolve_deadlock(pending: Iterable, qv: Optional[QuorumValues] = None,
                     fraction: Fraction = Fraction(1, 4)) -> List:
    """Pick ceil(|pending|/4) minimum-ratio requests and lower their priority.

    Requests holding no locks cannot be part of a lock cycle, so they rank after
    every lock holder; demoting them alone would repeat forever.  Releasing the
    victims' locks is the coordinator's job; the returned list is in demotion
    order (ratio, then request id).
    """
    pending = list(pending)
    if not pending:
        return []
    count = math.ceil(len(pending) * fraction)

    def key(r):
        ratio = request_vote_ratio(r, qv)
        return (ratio == 0, ratio, r.id)

    victims = sorted(pending, key=key)[:count]
    for r in victims:
        r.priority -= 1
    return victims


class Scheduler:
    """Slot bookkeeping for one coordinator.

    The running slot is the oldest slot holding unfinished requests.  Requests
    in later slots are parked until every request of the running slot is done.
    """

    def __init__(self, policy: SlotPolicy, deadlock: DeadlockConfig):
        self.policy = policy
        self.deadlock = deadlock
        self.slots: Dict[int, List] = {}
        self.unfinished: Dict[int, int] = {}
        self.open_slots: deque = deque()
        self.arrivals = 0
        self.pending: set = set()  # running-slot requests that have not reached quorum
        self.stall_since = 0.0
        self.rounds = 0

    @property
    def running(self) -> Optional[int]:
        return self.open_slots[0] if self.open_slots else None

    def slot_of(self, now: float) -> int:
        if self.policy.mode == "time":
            return int(math.floor(now / self.policy.value))
        return self.arrivals // int(self.policy.value)

    def enqueue(self, req, now: float) -> int:
        """Assign ``req`` to a slot; ``req.slot`` is set and the slot id returned."""
        slot = self.slot_of(now)
        self.arrivals += 1
        if slot not in self.slots:
            self.slots[slot] = []
            self.unfinished[slot] = 0
            self.open_slots.append(slot)
        self.slots[slot].append(req)
        self.unfinished[slot] += 1
        req.slot = slot
        return slot

    def is_running(self, req) -> bool:
        return req.slot == self.running

    def next_actions(self, now: float = 0.0) -> List[int]:
        slot = self.running
        if slot is None:
            return []
        live = [r for r in self.slots[slot] if r.state != "done"]
        return [r.id for r in sorted(live, key=sort_key)]

    def mark_pending(self, req, now: float) -> None:
        if not self.pending:
            self.stall_since = now
        self.pending.add(req)

    def mark_quorum(self, req, now: float) -> None:
        self.pending.discard(req)
        self.stall_since = now

    def finish(self, req, now: float) -> List:
        """Record completion; returns the requests of a newly started slot (if any)."""
        self.pending.discard(req)
        self.stall_since = now  # a completion frees locks, so it counts as progress
        self.unfinished[req.slot] -= 1
        started: List = []
        while self.open_slots and self.unfinished[self.open_slots[0]] == 0:
            done_slot = self.open_slots.popleft()
            del self.slots[done_slot], self.unfinished[done_slot]
            self.rounds = 0
            if self.open_slots:
                self.stall_since = now
                started = sorted(self.slots[self.open_slots[0]], key=sort_key)
        return started

    def detect_deadlock(self, now: float, cfg: Optional[DeadlockConfig] = None) -> bool:
        cfg = cfg or self.deadlock
        if not self.pending:
            return False
        return now >= self.stall_since + cfg.t0

    def next_check_time(self) -> Optional[float]:
        if not self.pending:
            return None
        return self.stall_since + self.deadlock.t0
