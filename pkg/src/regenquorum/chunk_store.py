"""Per-chunk vote bit / lock bit state machine kept on the storage nodes."""
from __future__ import annotations

from collections import deque
from enum import IntEnum
from typing import List, NamedTuple, Optional, Tuple

READ = "read"
WRITE = "write"
REPAIR = "repair"
KINDS = (READ, WRITE, REPAIR)


class LockBit(IntEnum):
    NONE = 0
    READ = 1
    WRITE = 2


_FREE, _READ_LOCKED, _WRITE_LOCKED = LockBit.NONE, LockBit.READ, LockBit.WRITE


class ChunkError(Exception):
    pass


class DuplicateVote(ChunkError):
    pass


class IllegalLock(ChunkError):
    pass


class NotHeld(ChunkError):
    pass


class ChunkId(NamedTuple):
    node: int
    slot: int


class Vote(NamedTuple):
    node: int
    slot: int
    request_id: int


class ChunkState:
    """State of one stored chunk.

    ``waiting`` holds ``(request_id, kind)`` pairs refused while the chunk was
    locked.  ``voted`` holds requests with a vote in flight that has not yet been
    turned into a lock or withdrawn by the coordinator.
    """

    __slots__ = ("node", "slot", "vote_bit", "lock_bit", "readers", "writer", "waiting", "voted")

    def __init__(self, node: int = 0, slot: int = 0):
        self.node = node
        self.slot = slot
        self.vote_bit = 1
        self.lock_bit = LockBit.NONE
        self.readers: set = set()
        self.writer: Optional[int] = None
        self.waiting: deque = deque()
        self.voted: set = set()

    @property
    def bits(self) -> Tuple[int, int]:
        return self.vote_bit, int(self.lock_bit)

    def is_waiting(self, req: int) -> bool:
        return any(r == req for r, _ in self.waiting)

    def request_vote(self, kind: str, req: int) -> Optional[Vote]:
        if req in self.voted or req in self.readers or req == self.writer:
            raise DuplicateVote(f"chunk ({self.node},{self.slot}) already voted for request {req}")
        if self.vote_bit == 1 and (self.lock_bit is _FREE or kind != WRITE):
            self.voted.add(req)
            return Vote(self.node, self.slot, req)
        for r, _ in self.waiting:
            if r == req:
                return None
        self.waiting.append((req, kind))
        return None

    def withdraw_vote(self, req: int) -> None:
        self.voted.discard(req)

    def enqueue_wait(self, req: int, kind: str) -> None:
        if self.lock_bit == LockBit.NONE:
            raise IllegalLock(f"chunk ({self.node},{self.slot}) is free; nothing to wait for")
        if not self.is_waiting(req):
            self.waiting.append((req, kind))

    def cancel_wait(self, req: int) -> bool:
        before = len(self.waiting)
        self.waiting = deque(e for e in self.waiting if e[0] != req)
        return len(self.waiting) != before

    def apply_lock(self, kind: str, req: int) -> None:
        if req not in self.voted:
            raise IllegalLock(f"request {req} holds no vote on chunk ({self.node},{self.slot})")
        if kind == WRITE:
            if self.lock_bit is not _FREE:
                raise IllegalLock(f"write lock on busy chunk ({self.node},{self.slot})")
            self.voted.discard(req)
            self.writer = req
            self.vote_bit = 0
            self.lock_bit = _WRITE_LOCKED
        else:
            if self.lock_bit is _WRITE_LOCKED:
                raise IllegalLock(f"read lock on write-locked chunk ({self.node},{self.slot})")
            self.voted.discard(req)
            self.readers.add(req)
            self.lock_bit = _READ_LOCKED

    def release_lock(self, req: int) -> List[Tuple[int, str]]:
        """Drop ``req``'s lock and return the waiters that may now vote.

        A chunk that becomes free hands every waiter back for re-voting (in FIFO
        order) so that no waiter is stranded behind one that never re-locks.
        """
        if req == self.writer:
            self.writer = None
        elif req in self.readers:
            self.readers.discard(req)
        else:
            raise NotHeld(f"request {req} holds no lock on chunk ({self.node},{self.slot})")
        if self.writer is None and not self.readers:
            self.vote_bit = 1
            self.lock_bit = _FREE
            promoted = list(self.waiting)
            self.waiting.clear()
            return promoted
        promoted = []
        while self.waiting and self.waiting[0][1] != WRITE:
            promoted.append(self.waiting.popleft())
        return promoted

    def check(self) -> None:
        lb = self.lock_bit
        if lb == LockBit.WRITE:
            ok = self.vote_bit == 0 and not self.readers and self.writer is not None
        elif lb == LockBit.READ:
            ok = self.vote_bit == 1 and bool(self.readers) and self.writer is None
        else:
            ok = self.vote_bit == 1 and not self.readers and self.writer is None and not self.waiting
        if not ok:
            raise AssertionError(f"inconsistent chunk ({self.node},{self.slot}): bits={self.bits} "
                                 f"readers={self.readers} writer={self.writer} waiting={list(self.waiting)}")
