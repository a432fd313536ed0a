"""
Frequent subcircuits of a small adder
=====================================

Mine the saturated e-graph of a 4-bit ripple adder, then group the mined
patterns by the Boolean function they compute.
"""

from cellex import (
    MiningParams,
    build_egraph,
    default_library,
    default_rules,
    egraph_to_graph,
    fold_symmetric,
    group_by_function,
    make_adder,
    mine,
    saturate,
)
from cellex.graphify import vertex_count_report

lib = default_library()
g = build_egraph(make_adder(4, lib))
saturate(g, default_rules(lib))

# bipartite class/e-node graph; pin-swapped twins are folded to one copy
pg = fold_symmetric(egraph_to_graph(g, lib), lib)
print("pattern graph:", vertex_count_report(pg))

# small patterns keep this demo quick: at most 3 gates and 3 inputs
result = mine(pg, MiningParams(min_support=4, max_gates=3, max_inputs=3))
print(f"{len(result)} frequent patterns")

groups = group_by_function(result, lib)
groups.sort(key=lambda grp: (-grp.support, grp.hex()))
print(f"{len(groups)} distinct functions up to input permutation")
print(f"{'function':>9} {'arity':>5} {'support':>7} {'patterns':>8}  sop")
for grp in groups[:12]:
    print(f"{grp.hex():>9} {grp.arity:>5} {grp.support:>7} {len(grp.members):>8}  {grp.sop}")
