"""Rewrite-rule patterns, the rule document format and equality saturation."""

from __future__ import annotations

import json
import re
import time
from dataclasses import dataclass, asdict
from typing import Iterable

from .egraph import EGraph
from .library import PSEUDO_CELLS, CellLibrary, TruthTable


class RuleError(ValueError):
    pass


@dataclass(frozen=True)
class PVar:
    name: str

    def __str__(self):
        return self.name


@dataclass(frozen=True)
class PApp:
    op: str
    args: tuple["Pattern", ...]

    def __str__(self):
        return f"{self.op}({','.join(map(str, self.args))})"


Pattern = PVar | PApp


def pattern_vars(p: Pattern) -> list[str]:
    if isinstance(p, PVar):
        return [p.name]
    out = []
    for a in p.args:
        out += [v for v in pattern_vars(a) if v not in out]
    return list(dict.fromkeys(out))


def pattern_size(p: Pattern) -> int:
    return 0 if isinstance(p, PVar) else 1 + sum(pattern_size(a) for a in p.args)


@dataclass(frozen=True)
class RewriteRule:
    name: str
    lhs: Pattern
    rhs: Pattern

    def __str__(self):
        return f"{self.name}: {self.lhs} => {self.rhs}"


_TOKEN = re.compile(r"\s*(?:([A-Za-z_][A-Za-z0-9_]*)|(.))")


def parse_pattern(text: str) -> Pattern:
    tokens = [(m.group(1), m.group(2)) for m in _TOKEN.finditer(text) if m.group(0).strip()]
    pos = 0

    def parse() -> Pattern:
        nonlocal pos
        if pos >= len(tokens) or tokens[pos][0] is None:
            raise RuleError(f"expected identifier in pattern {text!r}")
        ident = tokens[pos][0]
        pos += 1
        if pos < len(tokens) and tokens[pos][1] == "(":
            pos += 1
            args = [parse()]
            while pos < len(tokens) and tokens[pos][1] == ",":
                pos += 1
                args.append(parse())
            if pos >= len(tokens) or tokens[pos][1] != ")":
                raise RuleError(f"unbalanced parentheses in pattern {text!r}")
            pos += 1
            return PApp(ident, tuple(args))
        if not ident[0].islower():
            raise RuleError(f"{ident!r} is not a variable (variables are lowercase)")
        return PVar(ident)

    p = parse()
    if pos != len(tokens):
        raise RuleError(f"trailing input in pattern {text!r}")
    return p


def _check_pattern(p: Pattern, lib: CellLibrary, rule: str):
    if isinstance(p, PVar):
        return
    if p.op in PSEUDO_CELLS or p.op not in lib:
        raise RuleError(f"rule {rule}: unknown op {p.op!r}")
    if lib[p.op].arity != len(p.args):
        raise RuleError(f"rule {rule}: {p.op} takes {lib[p.op].arity} arguments, got {len(p.args)}")
    for a in p.args:
        _check_pattern(a, lib, rule)


def parse_rules(text: str, lib: CellLibrary) -> list[RewriteRule]:
    rules = []
    names = set()
    for lineno, raw in enumerate(text.splitlines(), 1):
        line = raw.split("#", 1)[0].strip()
        if not line:
            continue
        if ":" not in line or "=>" not in line:
            raise RuleError(f"line {lineno}: expected 'name: LHS => RHS'")
        name, body = line.split(":", 1)
        name = name.strip()
        lhs_text, rhs_text = body.split("=>", 1)
        lhs, rhs = parse_pattern(lhs_text), parse_pattern(rhs_text)
        if isinstance(lhs, PVar):
            raise RuleError(f"rule {name}: left-hand side must be an operator pattern")
        _check_pattern(lhs, lib, name)
        _check_pattern(rhs, lib, name)
        unbound = set(pattern_vars(rhs)) - set(pattern_vars(lhs))
        if unbound:
            raise RuleError(f"rule {name}: right-hand side variables {sorted(unbound)} not bound")
        if name in names:
            raise RuleError(f"duplicate rule name {name!r}")
        names.add(name)
        rules.append(RewriteRule(name, lhs, rhs))
    return rules


def load_rules(path, lib: CellLibrary) -> list[RewriteRule]:
    with open(path, encoding="utf-8") as fh:
        return parse_rules(fh.read(), lib)


def default_rules(lib: CellLibrary) -> list[RewriteRule]:
    from importlib.resources import files

    return parse_rules(files("cellex.data").joinpath("default.rules").read_text(), lib)


def pattern_table(p: Pattern, variables: list[str], lib: CellLibrary) -> TruthTable:
    """Truth table of a pattern over the given variable order."""

    def ev(q: Pattern, env: dict[str, int]) -> int:
        if isinstance(q, PVar):
            return env[q.name]
        return lib[q.op].function(*[ev(a, env) for a in q.args])

    return TruthTable.from_function(
        len(variables), lambda *vals: ev(p, dict(zip(variables, vals)))
    )


def rule_is_sound(rule: RewriteRule, lib: CellLibrary) -> bool:
    vs = pattern_vars(rule.lhs)
    return pattern_table(rule.lhs, vs, lib) == pattern_table(rule.rhs, vs, lib)


# -- matching ----------------------------------------------------------------

Subst = dict[str, int]


def match_class(g: EGraph, p: Pattern, c: int, subst: Subst) -> list[Subst]:
    c = g.find(c)
    if isinstance(p, PVar):
        bound = subst.get(p.name)
        if bound is None:
            return [{**subst, p.name: c}]
        return [subst] if g.find(bound) == c else []
    out = []
    for nid in g.class_nodes(c):
        out += match_node(g, p, nid, subst)
    return out


def match_node(g: EGraph, p: PApp, nid: int, subst: Subst) -> list[Subst]:
    node = g.nodes[nid]
    if node.op != p.op or len(node.children) != len(p.args):
        return []
    todo = [subst]
    for arg, ch in zip(p.args, node.children):
        todo = [s1 for s0 in todo for s1 in match_class(g, arg, ch, s0)]
        if not todo:
            break
    return todo


def instantiate(g: EGraph, p: Pattern, subst: Subst) -> int:
    if isinstance(p, PVar):
        return subst[p.name]
    return g.add_enode(p.op, [instantiate(g, a, subst) for a in p.args])


# -- saturation --------------------------------------------------------------


@dataclass(frozen=True)
class SaturationLimits:
    max_iterations: int = 16
    max_enodes: int = 10_000
    time_budget: float = 60.0

    def __post_init__(self):
        if self.max_iterations <= 0 or self.max_enodes <= 0 or self.time_budget <= 0:
            raise ValueError("saturation limits must be positive")

    @classmethod
    def for_graph(cls, g: EGraph, factor: int = 10, **kw) -> "SaturationLimits":
        gates = sum(1 for nid in g.live_nodes() if g.nodes[nid].name is None)
        return cls(max_enodes=max(1, factor * gates), **kw)


@dataclass
class SaturationReport:
    iterations: int
    enodes: int
    classes: int
    stop_reason: str  # saturated | iteration_limit | node_limit | time_limit

    def to_json(self) -> dict:
        return asdict(self)

    def dumps(self) -> str:
        return json.dumps(self.to_json(), indent=2) + "\n"


def saturate(g: EGraph, rules: Iterable[RewriteRule],
             limits: SaturationLimits | None = None) -> SaturationReport:
    """Apply all rules to a fixpoint or until a limit trips.

    Matches are collected against the rebuilt graph in a fixed order (rule, class id,
    node id) and applied afterwards; the graph is rebuilt once per iteration.
    """
    rules = list(rules)
    limits = limits or SaturationLimits.for_graph(g)
    g.rebuild()
    start = time.monotonic()
    stop = "iteration_limit"
    it = 0
    while it < limits.max_iterations:
        it += 1
        by_op: dict[str, list[int]] = {}
        for c in g.class_ids():
            for nid in g.class_nodes(c):
                by_op.setdefault(g.nodes[nid].op, []).append(nid)
        matches = []
        for rule in rules:
            for nid in by_op.get(rule.lhs.op, ()):
                c = g.class_of(nid)
                for s in match_node(g, rule.lhs, nid, {}):
                    matches.append((rule, c, s))
        changed = False
        hit_limit = False
        for rule, c, s in matches:
            if g.num_nodes + pattern_size(rule.rhs) > limits.max_enodes:
                hit_limit = True
                break
            before = len(g.nodes)
            new = instantiate(g, rule.rhs, s)
            if len(g.nodes) != before:
                changed = True
            if g.find(new) != g.find(c):
                g.merge(new, c)
                changed = True
        g.rebuild()
        if hit_limit:
            stop = "node_limit"
            break
        if not changed:
            stop = "saturated"
            break
        if time.monotonic() - start > limits.time_budget:
            stop = "time_limit"
            break
    return SaturationReport(it, g.num_nodes, g.num_classes, stop)
