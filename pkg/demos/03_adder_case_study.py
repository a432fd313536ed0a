"""
Extending a library for ripple adders
=====================================

Mine a 16-bit adder, choose two new cells, then reuse those cells on wider
adders. Gate counts drop to a third because every full-adder stage collapses
into one majority cell and one 3-input XOR cell.
"""

import time

from cellex import (
    MiningParams,
    build_egraph,
    default_library,
    default_rules,
    egraph_to_graph,
    fold_symmetric,
    group_by_function,
    make_adder,
    make_candidates,
    mine,
    saturate,
    select_cells,
)
from cellex.netlist import equivalent
from cellex.selector import Evaluator, reduction_pct


def prepare(width):
    nl = make_adder(width, lib)
    g = build_egraph(nl)
    saturate(g, default_rules(lib))
    return nl, g, fold_symmetric(egraph_to_graph(g, lib), lib)


lib = default_library()
t0 = time.perf_counter()
nl16, g16, pg16 = prepare(16)
patterns = mine(pg16, MiningParams())
groups = group_by_function(patterns, lib)
cands = make_candidates(groups, lib)
print(f"mined {len(patterns)} patterns, {len(groups)} functions, "
      f"{len(cands)} candidate cells in {time.perf_counter() - t0:.1f}s")

ext, _ = select_cells(cands, 2, g16, pg16, lib)
for cell in ext.extensions:
    print(f"  new cell {cell.name}: {cell.sop}  est. area {cell.est_area}")

print(f"{'width':>5} {'gates':>6} {'new':>5} {'ratio':>6} {'area %':>7}")
for width in (16, 32, 64, 128, 256):
    nl, g, pg = prepare(width)
    res = Evaluator(g, pg, lib).evaluate(ext.extensions)
    assert equivalent(nl, res.netlist)
    print(f"{width:>5} {len(nl.gates):>6} {res.gates:>5} {res.gates / len(nl.gates):>6.3f} "
          f"{reduction_pct(nl.area(), res.area):>7.2f}")
