"""Standard cell library extension by equality saturation and frequent subcircuit mining."""

from .library import CellLibrary, CellType, TruthTable, default_library, parse_library, serialize_library
from .netlist import Netlist, make_adder, parse_netlist, serialize_netlist, simulate
from .egraph import EGraph, build_egraph, extract, extract_term
from .rewrite import SaturationLimits, default_rules, parse_rules, saturate
from .graphify import PatternGraph, egraph_to_graph, fold_symmetric
from .miner import MiningParams, mine
from .boolfn import canonicalize, group_by_function, pattern_function, quine_mccluskey
from .selector import QoRWeights, evaluate_extension, make_candidates, select_cells

__all__ = [
    "CellLibrary", "CellType", "TruthTable", "default_library", "parse_library",
    "serialize_library", "Netlist", "make_adder", "parse_netlist", "serialize_netlist",
    "simulate", "EGraph", "build_egraph", "extract", "extract_term", "SaturationLimits",
    "default_rules", "parse_rules", "saturate", "PatternGraph", "egraph_to_graph",
    "fold_symmetric", "MiningParams", "mine", "canonicalize", "group_by_function",
    "pattern_function", "quine_mccluskey", "QoRWeights", "evaluate_extension",
    "make_candidates", "select_cells",
]
