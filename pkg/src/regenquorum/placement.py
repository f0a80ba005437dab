"""Group formation from update footprints and greedy chunk-to-node packing."""
from __future__ import annotations

import csv
import io
from dataclasses import dataclass, field
from typing import Dict, List, Sequence, Tuple

from .code_model import FootprintMatrix


class CapacityExceeded(ValueError):
    pass


class Unplaced(KeyError):
    pass


@dataclass(frozen=True)
class Group:
    index: int
    chunks: frozenset


@dataclass
class PlacementMap:
    N: int
    alpha: int
    location: Dict[int, Tuple[int, int]] = field(default_factory=dict)
    # group indices in the order the greedy packer consumed them
    order: List[int] = field(default_factory=list)

    @property
    def nodes(self) -> Dict[int, List[int]]:
        inv: Dict[int, List[int]] = {v: [] for v in range(self.N)}
        for c, (v, s) in sorted(self.location.items(), key=lambda kv: kv[1]):
            inv[v].append(c)
        return inv

    def place(self, chunk: int, node: int) -> None:
        slot = sum(1 for v, _ in self.location.values() if v == node)
        if slot >= self.alpha:
            raise CapacityExceeded(f"node {node} already holds {self.alpha} chunks")
        self.location[chunk] = (node, slot)

    def to_csv(self) -> str:
        buf = io.StringIO()
        w = csv.writer(buf, lineterminator="\n")
        w.writerow(["# regenquorum-placement v1", self.N, self.alpha])
        w.writerow(["chunk", "node", "slot"])
        for c in sorted(self.location):
            w.writerow([c, *self.location[c]])
        return buf.getvalue()

    @classmethod
    def from_csv(cls, text: str) -> "PlacementMap":
        rows = list(csv.reader(io.StringIO(text)))
        if not rows or not rows[0][0].startswith("# regenquorum-placement"):
            raise ValueError("missing placement schema header")
        pm = cls(N=int(rows[0][1]), alpha=int(rows[0][2]))
        for c, v, s in rows[2:]:
            pm.location[int(c)] = (int(v), int(s))
        return pm


def build_groups(f: FootprintMatrix) -> List[Group]:
    return [Group(g, row) for g, row in enumerate(f.rows)]


def assign(groups: Sequence[Group], N: int, alpha: int) -> PlacementMap:
    """Pack groups onto nodes in slot order.

    The first group goes onto node 0, overflowing onto the following node.
    Each further group is the unplaced one sharing the most chunks with the
    node currently being filled (lowest group index on ties); only its
    not-yet-placed chunks are stored.
    """
    distinct = set().union(*(g.chunks for g in groups)) if groups else set()
    if len(distinct) > N * alpha:
        raise CapacityExceeded(f"{len(distinct)} distinct chunks exceed capacity {N * alpha}")
    pm = PlacementMap(N=N, alpha=alpha)
    node_content: List[set] = [set() for _ in range(N)]
    cursor = 0
    remaining = list(range(len(groups)))
    while remaining:
        context = node_content[cursor] if cursor < N else set()
        best = max(remaining, key=lambda g: (len(groups[g].chunks & context), -g))
        remaining.remove(best)
        pm.order.append(groups[best].index)
        for c in sorted(groups[best].chunks):
            if c in pm.location:
                continue
            while len(node_content[cursor]) == alpha:
                cursor += 1
            pm.place(c, cursor)
            node_content[cursor].add(c)
        while cursor < N and len(node_content[cursor]) == alpha:
            cursor += 1
    return pm


def complete_layout(pm: PlacementMap, total_chunks: int) -> PlacementMap:
    """Place chunks that belong to no group into the free slots, in id order."""
    free = [(v, s) for v in range(pm.N) for s in range(pm.alpha)
            if (v, s) not in set(pm.location.values())]
    missing = [c for c in range(total_chunks) if c not in pm.location]
    if len(missing) > len(free):
        raise CapacityExceeded(f"{len(missing)} unplaced chunks but only {len(free)} free slots")
    out = PlacementMap(N=pm.N, alpha=pm.alpha, location=dict(pm.location), order=list(pm.order))
    for c, loc in zip(missing, free):
        out.location[c] = loc
    return out


def identity_layout(N: int, alpha: int) -> PlacementMap:
    return PlacementMap(N=N, alpha=alpha,
                        location={v * alpha + s: (v, s) for v in range(N) for s in range(alpha)})


def locate(pm: PlacementMap, chunk: int) -> Tuple[int, int]:
    try:
        return pm.location[chunk]
    except KeyError:
        raise Unplaced(chunk) from None
