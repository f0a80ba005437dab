"""
Quorum sizes, write distance and chunk placement
================================================

"""
import random

from regenquorum import (CodeParams, FootprintMatrix, Topology, assign, build_groups,
                         gifford_check, pick_read_nodes, quorum_values, validate_params,
                         write_distance_table)

# an 8-node cloud storing one chunk per node: reads need 2 nodes, writes touch all 8
p = validate_params(CodeParams(N=8, n=8, k=2, d=3, alpha=1, beta=1, q=8))
qv = quorum_values(p)
print("read quorum", qv.r, "write quorum", qv.w, "repair quorum", qv.rep)
print("overlaps like replica voting:", gifford_check(qv, p.total_chunks).satisfied)

# partial footprints break the classic overlap rules, which is why the protocol
# has to lock chunks instead of relying on intersecting quorums
weak = quorum_values(CodeParams(N=10, n=20, k=4, d=6, alpha=2, beta=1, q=6))
print("q=6 of 20 chunks:", gifford_check(weak, 20))

# five nodes on a line, writes active on the 1st and 3rd: reads go far away
wdt = write_distance_table(Topology.path(5), [0, 2])
print("write distance per node", wdt.tolist())
print("one read node:", pick_read_nodes(wdt, 1, random.Random(0)))
print("two read nodes:", pick_read_nodes(wdt, 2, random.Random(0)))

# groups of chunks updated together are packed onto as few nodes as possible
fp = FootprintMatrix([[0, 1, 2], [2, 3, 4]], total_chunks=6)
pm = assign(build_groups(fp), N=3, alpha=2)
for node, chunks in pm.nodes.items():
    print(f"node {node}: chunks {chunks}")
