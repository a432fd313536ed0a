import json

import pytest

from oracles import pattern_code
from cellex import build_egraph, default_library, default_rules, make_adder, saturate
from cellex.boolfn import group_by_function, quine_mccluskey
from cellex.egraph import area_costs, extract, extraction_to_netlist
from cellex.graphify import egraph_to_graph, fold_symmetric
from cellex.library import CellLibrary, TruthTable
from cellex.miner import PatternGroupRaw, code_labels
from cellex.netlist import Gate, Netlist, equivalent
from cellex.selector import (
    CandidateCell,
    Evaluator,
    ExtendedLibrary,
    QoRWeights,
    SelectionError,
    emit_results,
    estimate_cell_area,
    evaluate_extension,
    fit_area_model,
    make_candidates,
    reduction_pct,
    select_cells,
    transistor_count,
)

MAJ = [("y", "OR2X2", ["g", "p"]), ("g", "AND2X2", ["a", "b"]),
       ("p", "AND2X2", ["x", "c"]), ("x", "XOR2X1", ["a", "b"])]
MAJ_INV = [("y", "INVX1", ["n"]), ("n", "NOR2X1", ["g", "p"]), ("g", "AND2X2", ["a", "b"]),
           ("p", "AND2X2", ["x", "c"]), ("x", "XOR2X1", ["a", "b"])]
XOR3 = [("y", "XOR2X1", ["x", "c"]), ("x", "XOR2X1", ["a", "b"])]
AND_OR = [("y", "OR2X2", ["g", "c"]), ("g", "AND2X2", ["a", "b"])]


@pytest.fixture(scope="module")
def lib():
    return default_library()


def raw(gates):
    code = pattern_code(gates, "y")
    n = sum(1 for lab in code_labels(code) if lab != "*")
    return PatternGroupRaw(code, [(0,)] * 1, 1, n)


@pytest.fixture(scope="module")
def adder4(lib):
    nl = make_adder(4, lib)
    g = build_egraph(nl)
    saturate(g, default_rules(lib))
    pg = fold_symmetric(egraph_to_graph(g, lib), lib)
    return nl, g, pg


@pytest.fixture(scope="module")
def candidates(lib):
    groups = group_by_function([raw(MAJ), raw(MAJ_INV), raw(XOR3), raw(AND_OR)], lib)
    return make_candidates(groups, lib)


def test_transistor_counts(lib):
    counts = {c.name: transistor_count(c.function) for c in lib.real_cells()}
    assert counts["INVX1"] == 2 and counts["NAND2X1"] == 4 and counts["AND2X2"] == 6
    assert counts["AOI21X1"] == 6 and counts["XOR2X1"] == 10


def test_area_fit_reproduces_inverter(lib):
    model = fit_area_model(lib)
    assert model.area(2) == pytest.approx(lib["INVX1"].area, rel=0.25)
    assert model.slope > 0


def test_majority_cheaper_than_discrete(lib):
    sop = quine_mccluskey(TruthTable(3, 0b11101000))
    est = estimate_cell_area(sop, lib)
    discrete = lib["AND2X2"].area * 2 + lib["NOR2X1"].area + lib["INVX1"].area
    assert est < discrete


def test_merged_realization_caps_estimate(lib):
    sop = quine_mccluskey(TruthTable(3, 0b10010110))
    assert estimate_cell_area(sop, lib, merged=20) < estimate_cell_area(sop, lib)
    assert estimate_cell_area(sop, lib, merged=20) < 2 * lib["XOR2X1"].area


def test_constant_rejected(lib):
    with pytest.raises(SelectionError):
        estimate_cell_area(quine_mccluskey(TruthTable(2, 0)), lib)


def test_tiny_library_rejected(lib):
    with pytest.raises(SelectionError):
        fit_area_model(CellLibrary.from_cells([lib["INVX1"]]))


def test_candidates_skip_base_functions(lib):
    groups = group_by_function(
        [raw([("y", "INVX1", ["n"]), ("n", "AND2X2", ["a", "b"])]), raw(MAJ)], lib)
    names = [c.name for c in make_candidates(groups, lib)]
    assert names == ["EXT3_E8"]


def test_empty_extension_matches_plain_extraction(lib, adder4):
    nl, g, pg = adder4
    ex = extract(g, area_costs(lib))
    plain = extraction_to_netlist(g, ex, lib)
    res = evaluate_extension(g, pg, ExtendedLibrary(lib))
    assert res.area == pytest.approx(plain.area())
    assert res.gates == len(plain.gates)


def test_fused_cell_is_picked(lib):
    small = CellLibrary.from_cells([c for c in lib.real_cells() if c.name != "NAND2X1"])
    nl = Netlist(["a", "b"], ["y"], [
        Gate("u1", "AND2X2", {"A": "a", "B": "b", "Y": "n"}),
        Gate("u2", "INVX1", {"A": "n", "Y": "y"}),
    ], small)
    g = build_egraph(nl)
    pg = egraph_to_graph(g, small)
    groups = group_by_function([raw([("y", "INVX1", ["n"]), ("n", "AND2X2", ["a", "b"])])], small)
    cand = CandidateCell("FUSED", groups[0], 2.0, 4)
    base = evaluate_extension(g, pg, ExtendedLibrary(small))
    res = evaluate_extension(g, pg, ExtendedLibrary(small, [cand]))
    assert res.area == 2.0 < base.area
    assert res.instances == {"FUSED": 1}
    assert equivalent(nl, res.netlist)


def test_budget_zero(lib, adder4, candidates):
    nl, g, pg = adder4
    ext, res = select_cells(candidates, 0, g, pg, lib)
    assert ext.extensions == []


def test_adder_selects_majority_and_parity(lib, adder4, candidates):
    nl, g, pg = adder4
    ext, res = select_cells(candidates, 2, g, pg, lib)
    assert sorted(ext.names) == ["EXT3_96", "EXT3_E8"]
    assert res.gates * 3 == len(nl.gates)
    assert equivalent(nl, res.netlist)


def test_budget_is_monotone(lib, adder4, candidates):
    nl, g, pg = adder4
    ev = Evaluator(g, pg, lib)
    areas = [select_cells(candidates, t, g, pg, lib, evaluator=ev)[1].area for t in range(4)]
    assert areas == sorted(areas, reverse=True)


def test_greedy_stops_without_gain(lib, adder4, candidates):
    nl, g, pg = adder4
    ext, _ = select_cells(candidates, 5, g, pg, lib)
    assert len(ext.extensions) < 5


def test_exhaustive_agrees_on_adder(lib, adder4, candidates):
    nl, g, pg = adder4
    greedy = select_cells(candidates, 2, g, pg, lib)
    full = select_cells(candidates, 2, g, pg, lib, exhaustive=True)
    assert full[1].area <= greedy[1].area
    assert sorted(full[0].names) == sorted(greedy[0].names)


def test_selection_deterministic(lib, adder4, candidates):
    nl, g, pg = adder4
    a = select_cells(candidates, 2, g, pg, lib)
    b = select_cells(list(reversed(candidates)), 2, g, pg, lib)
    assert a[0].names == b[0].names and a[1].area == b[1].area


def test_qor_weights():
    assert QoRWeights().cost(10.0, 7) == 10.0
    assert QoRWeights(delay=2).cost(10.0, 3) == 90.0
    with pytest.raises(SelectionError):
        QoRWeights(area=-1)


def test_reduction_arithmetic():
    assert f"{reduction_pct(2373.25, 1438.80):.2f}" == "39.37"
    assert reduction_pct(5.0, 5.0) == 0.0


def longest_path(nl):
    drivers = {g.conn[nl.lib[g.cell].output]: g for g in nl.gates}
    memo = {}

    def depth(net):
        if net not in drivers:
            return 0
        if net not in memo:
            g = drivers[net]
            memo[net] = 1 + max(depth(g.conn[p]) for p in nl.lib[g.cell].inputs)
        return memo[net]

    return max(depth(po) for po in nl.pos)


def test_emit_results(tmp_path, lib, adder4, candidates):
    nl, g, pg = adder4
    ext, res = select_cells(candidates, 2, g, pg, lib)
    report = emit_results(tmp_path, nl, ext, res, name="adder4")
    assert sorted(p.name for p in tmp_path.iterdir()) == [
        "extended_library.json", "mapped_netlist.json", "report.csv", "report.json"]
    doc = json.loads((tmp_path / "report.json").read_text())
    assert doc == report
    assert doc["functional_check"] is True
    assert doc["gates_extended"] == res.gates
    assert doc["depth_extended"] == longest_path(res.netlist) == 4
    assert doc["depth_original"] == longest_path(nl)
    assert doc["reduction_pct"] > 0
    assert {c["name"] for c in doc["cells"]} == {"EXT3_E8", "EXT3_96"}
    assert all(c["arity"] <= 3 and c["max_gates"] <= 5 for c in doc["cells"])
    rows = (tmp_path / "report.csv").read_text().splitlines()
    assert rows[0].startswith("circuit,library") and rows[1].startswith("adder4,")


def test_emit_results_bad_dir(tmp_path, lib, adder4):
    nl, g, pg = adder4
    res = evaluate_extension(g, pg, ExtendedLibrary(lib))
    blocker = tmp_path / "file"
    blocker.write_text("x")
    with pytest.raises(SelectionError, match="file"):
        emit_results(blocker / "out", nl, ExtendedLibrary(lib), res)
