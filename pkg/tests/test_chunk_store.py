import pytest
from hypothesis import given, settings, strategies as st

from regenquorum.chunk_store import (
    READ,
    REPAIR,
    WRITE,
    ChunkState,
    DuplicateVote,
    IllegalLock,
    LockBit,
    NotHeld,
    Vote,
)


def lock(ch, kind, req):
    assert ch.request_vote(kind, req) is not None
    ch.apply_lock(WRITE if kind == WRITE else READ, req)


def test_free_chunk_votes():
    ch = ChunkState(2, 1)
    assert ch.request_vote(READ, 5) == Vote(2, 1, 5)
    assert ch.bits == (1, 0)


def test_read_locks_share():
    ch = ChunkState()
    lock(ch, READ, 1)
    lock(ch, REPAIR, 2)
    assert ch.bits == (1, 1)
    assert ch.readers == {1, 2}


def test_write_waits_behind_read_then_is_promoted():
    ch = ChunkState()
    lock(ch, READ, 1)
    assert ch.request_vote(WRITE, 2) is None
    assert list(ch.waiting) == [(2, WRITE)]
    assert ch.release_lock(1) == [(2, WRITE)]
    assert ch.bits == (1, 0)
    lock(ch, WRITE, 2)
    assert ch.bits == (0, 2)


def test_write_lock_blocks_everyone():
    ch = ChunkState()
    lock(ch, WRITE, 1)
    assert ch.request_vote(READ, 2) is None
    assert ch.request_vote(WRITE, 3) is None
    assert ch.release_lock(1) == [(2, READ), (3, WRITE)]


def test_readers_promoted_while_still_read_locked():
    ch = ChunkState()
    lock(ch, READ, 1)
    lock(ch, READ, 2)
    ch.enqueue_wait(7, READ)
    assert ch.release_lock(1) == [(7, READ)]
    assert ch.lock_bit == LockBit.READ


def test_errors():
    ch = ChunkState()
    ch.request_vote(READ, 1)
    with pytest.raises(DuplicateVote):
        ch.request_vote(READ, 1)
    with pytest.raises(IllegalLock):
        ch.apply_lock(READ, 9)
    with pytest.raises(NotHeld):
        ch.release_lock(4)
    with pytest.raises(IllegalLock):
        ch.enqueue_wait(3, READ)
    ch.apply_lock(READ, 1)
    ch.request_vote(WRITE, 2)
    assert ch.cancel_wait(2) and not ch.waiting


ops = st.lists(st.tuples(st.sampled_from(["vote", "lock", "release", "cancel"]),
                         st.sampled_from([READ, WRITE, REPAIR]), st.integers(0, 5)), max_size=60)


@settings(max_examples=200)
@given(ops)
def test_random_operation_sequences_keep_bits_consistent(seq):
    ch = ChunkState()
    kinds = {}
    for op, kind, req in seq:
        kind = kinds.setdefault(req, kind)
        try:
            if op == "vote":
                ch.request_vote(kind, req)
            elif op == "lock":
                ch.apply_lock(WRITE if kind == WRITE else READ, req)
            elif op == "release":
                ch.release_lock(req)
            else:
                ch.cancel_wait(req)
        except (DuplicateVote, IllegalLock, NotHeld):
            pass
        ch.check()
        assert not (ch.writer is not None and ch.readers)
        assert (ch.vote_bit == 0) == (ch.writer is not None)
