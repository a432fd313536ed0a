"""
E-graph basics on NOT(AND(a, b))
================================

Build the e-graph of a two-gate circuit, saturate it with the bundled rewrite
rules and look at what each e-class can now be implemented as.
"""

from cellex import build_egraph, default_library, default_rules, saturate
from cellex.egraph import area_costs, extract, extraction_to_netlist
from cellex.netlist import Gate, Netlist, equivalent

lib = default_library()

# y = NOT(AND(a, b)), written gate by gate
circuit = Netlist(["a", "b"], ["y"], [
    Gate("u1", "AND2X2", {"A": "a", "B": "b", "Y": "n"}),
    Gate("u2", "INVX1", {"A": "n", "Y": "y"}),
], lib)

# before saturation every gate is its own e-class
g = build_egraph(circuit)
print(f"before: {g.num_classes} classes, {g.num_nodes} e-nodes")

# rules only ever add equivalent alternatives
report = saturate(g, default_rules(lib))
print(f"after:  {report.enodes} e-nodes, stop reason {report.stop_reason!r}")

# the output class now offers several implementations
for nid in g.class_nodes(g.root("y")):
    node = g.nodes[nid]
    print("  y can be", node.op, node.children)

# pick the cheapest implementation by cell area
ex = extract(g, area_costs(lib))
mapped = extraction_to_netlist(g, ex, lib)
print(f"area {circuit.area():.4f} -> {mapped.area():.4f}:",
      [gate.cell for gate in mapped.gates])
assert equivalent(circuit, mapped)
