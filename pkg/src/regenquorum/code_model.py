"""Regenerating-code parameters, update footprints and quorum sizes.

The code itself is never evaluated over a field.  The protocol only needs to
know how many chunks exist, how many must be read or repaired from, and which
code chunks change when a given native chunk is updated.
"""
from __future__ import annotations

import csv
import io
from dataclasses import dataclass
from typing import Iterable, Optional, Sequence

import numpy as np


class ParamViolation(ValueError):
    """Raised when code parameters break one of the required inequalities."""


@dataclass(frozen=True)
class CodeParams:
    N: int
    n: int
    k: int
    d: int
    alpha: int
    beta: int
    q: int
    file_size_M: Optional[int] = None

    @property
    def total_chunks(self) -> int:
        return self.N * self.alpha


@dataclass(frozen=True)
class QuorumValues:
    r: int
    w: int
    rep: int

    def for_kind(self, kind: str) -> int:
        return {"read": self.r, "write": self.w, "repair": self.rep}[kind]


def validate_params(p: CodeParams) -> CodeParams:
    checks = [
        (p.N >= 1, "N >= 1"),
        (p.alpha >= 1, "alpha >= 1"),
        (0 < p.k, "0 < k"),
        (p.k < p.n, "k < n"),
        (p.k <= p.d, "k <= d"),
        (p.d < p.N, "d < N"),
        (0 < p.beta, "0 < beta"),
        (p.beta <= p.alpha, "beta <= alpha"),
        (0 < p.q, "0 < q"),
        (p.q <= p.total_chunks, "q <= N*alpha"),
        (p.alpha != 1 or p.n == p.N, "alpha == 1 implies n == N"),
    ]
    for ok, rule in checks:
        if not ok:
            raise ParamViolation(f"violated {rule} for {p}")
    return p


def quorum_values(p: CodeParams) -> QuorumValues:
    """Chunk-vote quorums: all chunks of k nodes, the q footprint chunks,
    and beta chunks from each of d helpers."""
    return QuorumValues(r=p.k * p.alpha, w=p.q, rep=p.d * p.beta)


class FootprintMatrix:
    """Row ``u`` is the set of code-chunk ids touched by an update of native chunk ``u``."""

    def __init__(self, rows: Sequence[Iterable[int]], total_chunks: int):
        frozen = tuple(frozenset(int(c) for c in row) for row in rows)
        if not frozen:
            raise ValueError("footprint needs at least one row")
        for u, row in enumerate(frozen):
            if not row:
                raise ValueError(f"footprint row {u} is empty")
            if min(row) < 0 or max(row) >= total_chunks:
                raise ValueError(f"footprint row {u} has chunk ids outside 0..{total_chunks - 1}")
        self.rows = frozen
        self.total_chunks = total_chunks

    @classmethod
    def dense(cls, k: int, total_chunks: int) -> "FootprintMatrix":
        return cls([range(total_chunks)] * k, total_chunks)

    @classmethod
    def uniform(cls, k: int, q: int, total_chunks: int, seed: int) -> "FootprintMatrix":
        rng = np.random.default_rng(seed)
        rows = [np.sort(rng.choice(total_chunks, size=q, replace=False)).tolist() for _ in range(k)]
        return cls(rows, total_chunks)

    @property
    def k(self) -> int:
        return len(self.rows)

    def footprint(self, native_idx: int) -> frozenset:
        if not 0 <= native_idx < len(self.rows):
            raise IndexError(f"native chunk {native_idx} out of range 0..{len(self.rows) - 1}")
        return self.rows[native_idx]

    def to_csv(self) -> str:
        buf = io.StringIO()
        w = csv.writer(buf, lineterminator="\n")
        for row in self.rows:
            w.writerow(sorted(row))
        return buf.getvalue()

    @classmethod
    def from_csv(cls, text: str, total_chunks: int) -> "FootprintMatrix":
        rows = [[int(x) for x in r if x.strip()] for r in csv.reader(io.StringIO(text)) if r]
        return cls(rows, total_chunks)

    def __eq__(self, other):
        return (isinstance(other, FootprintMatrix) and self.rows == other.rows
                and self.total_chunks == other.total_chunks)

    def __repr__(self):
        return f"FootprintMatrix(k={self.k}, total_chunks={self.total_chunks})"


def footprint(f: FootprintMatrix, native_idx: int) -> frozenset:
    return f.footprint(native_idx)


@dataclass(frozen=True)
class GiffordReport:
    read_write_overlap: bool  # r + w > V
    write_write_overlap: bool  # 2w > V
    r: int
    w: int
    total_votes: int

    @property
    def satisfied(self) -> bool:
        return self.read_write_overlap and self.write_write_overlap


def gifford_check(qv: QuorumValues, total_votes: int) -> GiffordReport:
    """Informational only; regenerating-code quorums need not meet Gifford's bounds."""
    return GiffordReport(
        read_write_overlap=qv.r + qv.w > total_votes,
        write_write_overlap=2 * qv.w > total_votes,
        r=qv.r,
        w=qv.w,
        total_votes=total_votes,
    )
