"""E-graph with hashconsing, union-find and deferred congruence repair."""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import Callable, Iterable, Mapping

from .library import INPUT_CELL, CellLibrary
from .netlist import Gate, Netlist


class EGraphError(ValueError):
    pass


@dataclass(frozen=True)
class ENode:
    op: str
    children: tuple[int, ...]
    name: str | None = None  # primary-input name, leaves only


@dataclass
class EClass:
    nodes: list[int] = field(default_factory=list)
    parents: list[int] = field(default_factory=list)


class EGraph:
    def __init__(self, lib: CellLibrary):
        self.lib = lib
        self.nodes: list[ENode] = []
        self.alive: list[bool] = []
        self.node_class: list[int] = []
        self.classes: dict[int, EClass] = {}
        self.hashcons: dict[ENode, int] = {}
        self.roots: dict[str, int] = {}
        self.leaves: dict[str, int] = {}
        self._uf: list[int] = []
        self._pending: list[int] = []

    # -- union-find ------------------------------------------------------

    def find(self, c: int) -> int:
        uf = self._uf
        root = c
        while uf[root] != root:
            root = uf[root]
        while uf[c] != root:
            uf[c], c = root, uf[c]
        return root

    def _new_class(self) -> int:
        cid = len(self._uf)
        self._uf.append(cid)
        self.classes[cid] = EClass()
        return cid

    # -- mutation --------------------------------------------------------

    def canonical(self, node: ENode) -> ENode:
        return ENode(node.op, tuple(self.find(c) for c in node.children), node.name)

    def add_enode(self, op: str, children: Iterable[int] = (), name: str | None = None) -> int:
        children = tuple(children)
        if op == INPUT_CELL:
            if children or name is None:
                raise EGraphError("input leaves take a name and no children")
        else:
            cell = self.lib[op]
            if len(children) != cell.arity:
                raise EGraphError(f"{op} takes {cell.arity} children, got {len(children)}")
        key = self.canonical(ENode(op, children, name))
        hit = self.hashcons.get(key)
        if hit is not None:
            return self.find(self.node_class[hit])
        nid = len(self.nodes)
        cid = self._new_class()
        self.nodes.append(key)
        self.alive.append(True)
        self.node_class.append(cid)
        self.hashcons[key] = nid
        self.classes[cid].nodes.append(nid)
        for ch in dict.fromkeys(key.children):
            self.classes[ch].parents.append(nid)
        return cid

    def merge(self, a: int, b: int) -> int:
        ra, rb = self.find(a), self.find(b)
        if ra == rb:
            return ra
        root, other = min(ra, rb), max(ra, rb)
        self._uf[other] = root
        keep, gone = self.classes[root], self.classes.pop(other)
        keep.nodes.extend(gone.nodes)
        keep.parents.extend(gone.parents)
        self._pending.append(root)
        return root

    def _kill(self, nid: int):
        self.alive[nid] = False
        self.classes[self.find(self.node_class[nid])].nodes.remove(nid)

    def rebuild(self) -> int:
        """Restore hashcons uniqueness and congruence; returns the number of repairs."""
        repairs = 0
        while self._pending:
            todo = sorted({self.find(c) for c in self._pending})
            self._pending.clear()
            for c in todo:
                repairs += self._repair(self.find(c))
        return repairs

    def _repair(self, c: int) -> int:
        merged = 0
        for nid in list(dict.fromkeys(self.classes[c].parents)):
            if not self.alive[nid]:
                continue
            old = self.nodes[nid]
            new = self.canonical(old)
            if new == old:
                continue
            if self.hashcons.get(old) == nid:
                del self.hashcons[old]
            other = self.hashcons.get(new)
            if other is not None and other != nid and self.alive[other]:
                keep, drop = min(nid, other), max(nid, other)
                ca, cb = self.node_class[nid], self.node_class[other]
                self._kill(drop)
                self.nodes[keep] = new
                self.hashcons[new] = keep
                self.merge(ca, cb)
                merged += 1
            else:
                self.nodes[nid] = new
                self.hashcons[new] = nid
        c = self.find(c)
        cls = self.classes[c]
        cls.parents = [p for p in dict.fromkeys(cls.parents) if self.alive[p]]
        return merged

    # -- queries ---------------------------------------------------------

    def class_of(self, nid: int) -> int:
        return self.find(self.node_class[nid])

    def class_ids(self) -> list[int]:
        return sorted(self.classes)

    def class_nodes(self, c: int) -> list[int]:
        return sorted(self.classes[self.find(c)].nodes)

    def live_nodes(self) -> list[int]:
        return [i for i, a in enumerate(self.alive) if a]

    @property
    def num_nodes(self) -> int:
        return sum(self.alive)

    @property
    def num_classes(self) -> int:
        return len(self.classes)

    def root(self, po: str) -> int:
        return self.find(self.roots[po])

    def leaf(self, pi: str) -> int:
        return self.find(self.leaves[pi])

    def congruence_violations(self) -> list[tuple[int, int]]:
        """Full-scan check: live node pairs with equal canonical form in different classes."""
        seen: dict[ENode, int] = {}
        bad = []
        for nid in self.live_nodes():
            key = self.canonical(self.nodes[nid])
            if key in seen and self.class_of(seen[key]) != self.class_of(nid):
                bad.append((seen[key], nid))
            seen.setdefault(key, nid)
        return bad

    # -- snapshots -------------------------------------------------------

    def to_json(self) -> dict:
        nodes = []
        for nid in self.live_nodes():
            n = self.canonical(self.nodes[nid])
            entry = {"id": nid, "op": n.op, "children": list(n.children), "class": self.class_of(nid)}
            if n.name is not None:
                entry["name"] = n.name
            nodes.append(entry)
        return {
            "nodes": nodes,
            "roots": {k: self.root(k) for k in self.roots},
            "leaves": {k: self.leaf(k) for k in self.leaves},
        }

    @classmethod
    def from_json(cls, doc: Mapping, lib: CellLibrary) -> "EGraph":
        g = cls(lib)
        top_node = max((n["id"] for n in doc["nodes"]), default=-1)
        top_class = max([n["class"] for n in doc["nodes"]] + [-1])
        g._uf = list(range(top_class + 1))
        g.nodes = [ENode("", ())] * (top_node + 1)
        g.alive = [False] * (top_node + 1)
        g.node_class = [0] * (top_node + 1)
        for n in doc["nodes"]:
            cid = n["class"]
            node = ENode(n["op"], tuple(n["children"]), n.get("name"))
            if node.op != INPUT_CELL and g.lib[node.op].arity != len(node.children):
                raise EGraphError(f"snapshot node {n['id']} has wrong arity")
            g.nodes[n["id"]] = node
            g.alive[n["id"]] = True
            g.node_class[n["id"]] = cid
            g.classes.setdefault(cid, EClass()).nodes.append(n["id"])
            g.hashcons[node] = n["id"]
        for n in doc["nodes"]:
            for ch in dict.fromkeys(n["children"]):
                if ch not in g.classes:
                    raise EGraphError(f"snapshot node {n['id']} references missing class {ch}")
                g.classes[ch].parents.append(n["id"])
        g.roots = dict(doc["roots"])
        g.leaves = dict(doc["leaves"])
        return g


def build_egraph(nl: Netlist) -> EGraph:
    """Insert every gate in topological order, children in the cell's pin order."""
    g = EGraph(nl.lib)
    vmap: dict[str, int] = {}
    for p in nl.pis:
        vmap[p] = g.add_enode(INPUT_CELL, (), name=p)
        g.leaves[p] = vmap[p]
    for gate in nl.topological_gates():
        inputs = [vmap[d] for d in nl.fanin_drivers(gate)]
        vmap[gate.id] = g.add_enode(gate.cell, inputs)
    for po in nl.pos:
        g.roots[po] = vmap[nl.driver(po)[0]]
    return g


# -- extraction --------------------------------------------------------------


@dataclass(frozen=True)
class Choice:
    """One implementation of an e-class: an e-node or an externally supplied composite."""

    op: str
    children: tuple[int, ...]
    cost: float
    node: int | None = None
    rank: int = 0


@dataclass
class Extraction:
    best: dict[int, Choice]
    total: dict[int, float]

    def cost(self, c: int) -> float:
        return self.total[c]


@dataclass(frozen=True)
class Term:
    op: str
    children: tuple["Term", ...] = ()
    name: str | None = None

    def size(self) -> int:
        return (0 if self.op == INPUT_CELL else 1) + sum(c.size() for c in self.children)


CostModel = Mapping[str, float] | Callable[[str], float]


def _op_cost(cost: CostModel, op: str) -> float:
    if op == INPUT_CELL:
        return 0.0
    return cost(op) if callable(cost) else cost[op]


def area_costs(lib: CellLibrary) -> dict[str, float]:
    return {c.name: c.area for c in lib.real_cells()}


def extract(g: EGraph, cost: CostModel, extra: Mapping[int, list[Choice]] | None = None,
            max_passes: int = 100_000) -> Extraction:
    """Minimum tree-cost implementation per class, relaxed to a fixpoint.

    Ties prefer e-nodes over composites, then the lowest e-node id (or composite rank).
    """
    options: dict[int, list[Choice]] = {}
    for c in g.class_ids():
        opts = []
        for nid in g.class_nodes(c):
            n = g.canonical(g.nodes[nid])
            opts.append(Choice(n.op, n.children, _op_cost(cost, n.op), nid, nid))
        for ch in (extra or {}).get(c, ()):
            opts.append(Choice(ch.op, tuple(g.find(x) for x in ch.children), ch.cost, None, ch.rank))
        options[c] = opts
    total = {c: math.inf for c in options}
    key = {c: (math.inf, 2, 0) for c in options}
    best: dict[int, Choice] = {}
    order = sorted(options)
    for _ in range(max_passes):
        changed = False
        for c in order:
            for opt in options[c]:
                val = opt.cost + sum(total[ch] for ch in opt.children)
                if val == math.inf:
                    continue
                k = (val, 0 if opt.node is not None else 1, opt.rank)
                if k < key[c]:
                    key[c] = k
                    total[c] = val
                    best[c] = opt
                    changed = True
        if not changed:
            return Extraction(best, total)
    raise EGraphError("extraction did not converge")


def _name_of(g: EGraph, c: int, ex: Extraction) -> str | None:
    ch = ex.best[c]
    return g.nodes[ch.node].name if ch.node is not None and ch.op == INPUT_CELL else None


def extract_term(g: EGraph, root: int, cost: CostModel, ex: Extraction | None = None) -> Term:
    ex = ex or extract(g, cost)
    memo: dict[int, Term] = {}

    def build(c: int, stack: frozenset) -> Term:
        c = g.find(c)
        if c in memo:
            return memo[c]
        if c not in ex.best:
            raise EGraphError(f"class {c} has no finite-cost term")
        if c in stack:
            raise EGraphError(f"cyclic extraction through class {c}")
        ch = ex.best[c]
        if ch.op == INPUT_CELL:
            t = Term(INPUT_CELL, (), _name_of(g, c, ex))
        else:
            t = Term(ch.op, tuple(build(x, stack | {c}) for x in ch.children))
        memo[c] = t
        return t

    return build(root, frozenset())


def term_cost(t: Term, cost: CostModel) -> float:
    return _op_cost(cost, t.op) + sum(term_cost(c, cost) for c in t.children)


def extraction_to_netlist(g: EGraph, ex: Extraction, lib: CellLibrary) -> Netlist:
    """Materialize the chosen implementations reachable from the PO roots as a netlist.

    Each class becomes at most one gate. A PO whose class is a primary input or is
    already named by an earlier PO gets a buffer.
    """
    pis = list(g.leaves)
    pos = list(g.roots)
    net: dict[int, str] = {}
    for p in pis:
        net[g.leaf(p)] = p
    needed: list[int] = []
    state: dict[int, int] = {}
    for po in pos:
        stack = [(g.root(po), False)]
        while stack:
            c, done = stack.pop()
            if done:
                state[c] = 2
                needed.append(c)
                continue
            if state.get(c) == 2:
                continue
            if state.get(c) == 1:
                raise EGraphError(f"cyclic extraction through class {c}")
            if c not in ex.best:
                raise EGraphError(f"class {c} has no finite-cost implementation")
            ch = ex.best[c]
            if ch.op == INPUT_CELL:
                state[c] = 2
                continue
            state[c] = 1
            stack.append((c, True))
            for x in reversed(ch.children):
                if state.get(x) != 2:
                    stack.append((x, False))
    po_class = {}
    for po in pos:
        c = g.root(po)
        if c not in net and c not in po_class:
            po_class[c] = po
            net[c] = po
    for c in needed:
        net.setdefault(c, f"n{c}")
    gates = []
    for c in needed:
        ch = ex.best[c]
        cell = lib[ch.op]
        conn = {pin: net[x] for pin, x in zip(cell.inputs, ch.children)}
        conn[cell.output] = net[c]
        gates.append(Gate(f"u{c}", ch.op, conn))
    buf = None
    for po in pos:
        c = g.root(po)
        if net[c] == po:
            continue
        if buf is None:
            from .library import TruthTable

            buf = lib.find_function(TruthTable(1, 0b10))
            if buf is None:
                raise EGraphError("a buffer cell is needed to drive a shared or PI-driven output")
        gates.append(Gate(f"buf_{po}", buf.name, {buf.inputs[0]: net[c], buf.output: po}))
    return Netlist(pis, pos, gates, lib)
