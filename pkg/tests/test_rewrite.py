import pytest

from cellex.egraph import build_egraph
from cellex.library import default_library
from cellex.netlist import make_adder
from cellex.rewrite import (
    PApp,
    PVar,
    RuleError,
    SaturationLimits,
    default_rules,
    parse_pattern,
    parse_rules,
    rule_is_sound,
    saturate,
)


@pytest.fixture(scope="module")
def lib():
    return default_library()


def test_default_rule_set(lib):
    rules = default_rules(lib)
    assert len(rules) == 25
    assert all(rule_is_sound(r, lib) for r in rules)


def test_parse_examples(lib):
    [comm] = parse_rules("comm_and: AND2X2(x,y) => AND2X2(y,x)", lib)
    assert comm.lhs == PApp("AND2X2", (PVar("x"), PVar("y")))
    [dm] = parse_rules("demorgan_nand: OR2X2(INVX1(a),INVX1(b)) => NAND2X1(a,b)", lib)
    assert str(dm.rhs) == "NAND2X1(a,b)"


@pytest.mark.parametrize("text, msg", [
    ("bad: AND2X2(x) => x", "takes 2"),
    ("bad: FOO(x) => x", "unknown"),
    ("bad: INVX1(x) => AND2X2(x,y)", "not bound"),
    ("bad: x => INVX1(x)", "operator"),
    ("no arrow here", "expected"),
    ("r: INVX1(x) => x\nr: INVX1(x) => x", "duplicate"),
])
def test_rule_errors(lib, text, msg):
    with pytest.raises((RuleError, Exception), match=msg):
        parse_rules(text, lib)


def test_unsound_rule_detected(lib):
    [r] = parse_rules("wrong: AND2X2(x,y) => OR2X2(x,y)", lib)
    assert not rule_is_sound(r, lib)


def test_pattern_parser():
    p = parse_pattern(" NAND3X1( a , INVX1(b), c ) ")
    assert str(p) == "NAND3X1(a,INVX1(b),c)"


def test_adder_saturation_bounds(lib):
    nl = make_adder(8, lib)
    g = build_egraph(nl)
    limits = SaturationLimits.for_graph(g)
    rep = saturate(g, default_rules(lib), limits)
    assert len(nl.gates) <= rep.enodes <= limits.max_enodes
    assert rep.stop_reason == "saturated"
    for po in nl.pos:
        assert g.find(g.root(po)) in g.class_ids()


def test_node_limit_stops(lib):
    g = build_egraph(make_adder(8, lib))
    rep = saturate(g, default_rules(lib), SaturationLimits(max_enodes=100))
    assert rep.stop_reason == "node_limit" and rep.enodes <= 100


def test_iteration_limit(lib):
    g = build_egraph(make_adder(8, lib))
    rep = saturate(g, default_rules(lib), SaturationLimits(max_iterations=1))
    assert rep.stop_reason == "iteration_limit" and rep.iterations == 1


def test_limits_validated():
    with pytest.raises(ValueError):
        SaturationLimits(max_iterations=0)
