"""Gate-level netlists: document I/O, validation, simulation and benchmark generators."""

from __future__ import annotations

import heapq
import json
import random
from dataclasses import dataclass, field
from typing import Mapping

from .library import INPUT_CELL, OUTPUT_CELL, PSEUDO_CELLS, CellLibrary, TruthTable

PO_PREFIX = "po:"


class NetlistError(ValueError):
    pass


@dataclass(frozen=True)
class Gate:
    id: str
    cell: str
    conn: dict[str, str] = field(hash=False, compare=True)


@dataclass(frozen=True)
class Edge:
    """Net segment ``driver.out_pin -> sink.in_pin`` in the netlist DAG."""

    driver: str
    out_pin: str
    sink: str
    in_pin: str


@dataclass
class Netlist:
    pis: list[str]
    pos: list[str]
    gates: list[Gate]
    lib: CellLibrary = field(repr=False)

    def __post_init__(self):
        self._validate()

    # -- structure -------------------------------------------------------

    def _validate(self):
        lib = self.lib
        ids = set()
        for name in self.pis:
            if name in ids:
                raise NetlistError(f"duplicate primary input {name!r}")
            ids.add(name)
        self._gate = {}
        for g in self.gates:
            if g.id in ids or g.id.startswith(PO_PREFIX):
                raise NetlistError(f"duplicate or reserved gate id {g.id!r}")
            ids.add(g.id)
            if g.cell in PSEUDO_CELLS or g.cell not in lib:
                raise NetlistError(f"gate {g.id}: unknown cell type {g.cell!r}")
            cell = lib[g.cell]
            pins = set(cell.inputs) | {cell.output}
            for pin in g.conn:
                if pin not in pins:
                    raise NetlistError(f"gate {g.id}: unknown pin {pin!r} on {g.cell}")
            for pin in cell.inputs:
                if pin not in g.conn:
                    raise NetlistError(f"gate {g.id}: floating input pin {pin}")
            if cell.output not in g.conn:
                raise NetlistError(f"gate {g.id}: output pin {cell.output} unconnected")
            self._gate[g.id] = g

        driver: dict[str, tuple[str, str]] = {}
        for name in self.pis:
            driver[name] = (name, "O")
        for g in self.gates:
            net = g.conn[self.lib[g.cell].output]
            if net in driver:
                raise NetlistError(f"net {net!r} is multiply driven ({driver[net][0]} and {g.id})")
            driver[net] = (g.id, self.lib[g.cell].output)
        self._driver = driver

        fanout: dict[str, int] = {net: 0 for net in driver}
        edges = []
        for g in self.gates:
            cell = lib[g.cell]
            for pin in cell.inputs:
                net = g.conn[pin]
                if net not in driver:
                    raise NetlistError(f"gate {g.id}: input pin {pin} on undriven net {net!r}")
                d, dpin = driver[net]
                edges.append(Edge(d, dpin, g.id, pin))
                fanout[net] += 1
        if len(set(self.pos)) != len(self.pos):
            raise NetlistError("duplicate primary output")
        for po in self.pos:
            if po not in driver:
                raise NetlistError(f"primary output {po!r} is undriven")
            d, dpin = driver[po]
            edges.append(Edge(d, dpin, PO_PREFIX + po, "I"))
            fanout[po] += 1
        for g in self.gates:
            net = g.conn[lib[g.cell].output]
            if fanout[net] == 0:
                raise NetlistError(f"gate {g.id}: output net {net!r} drives nothing")
        self._edges = edges
        self._order = self._toposort()

    def _toposort(self) -> list[str]:
        indeg = {g.id: 0 for g in self.gates}
        succ: dict[str, list[str]] = {g.id: [] for g in self.gates}
        for e in self._edges:
            if e.driver in indeg and e.sink in indeg:
                indeg[e.sink] += 1
                succ[e.driver].append(e.sink)
        position = {g.id: i for i, g in enumerate(self.gates)}
        ready = [gid for gid, d in indeg.items() if d == 0]
        order = []
        heap = [(position[g], g) for g in ready]
        heapq.heapify(heap)
        while heap:
            _, gid = heapq.heappop(heap)
            order.append(gid)
            for s in succ[gid]:
                indeg[s] -= 1
                if indeg[s] == 0:
                    heapq.heappush(heap, (position[s], s))
        if len(order) != len(self.gates):
            stuck = sorted(g for g, d in indeg.items() if d > 0)
            raise NetlistError(f"combinational cycle through {stuck[:5]}")
        return order

    def gate(self, gid: str) -> Gate:
        return self._gate[gid]

    def driver(self, net: str) -> tuple[str, str]:
        return self._driver[net]

    def topological_gates(self) -> list[Gate]:
        return [self._gate[g] for g in self._order]

    def vertices(self) -> list[tuple[str, str]]:
        """``(vertex id, cell label)`` for the DAG view including PI/PO pseudo-gates."""
        vs = [(p, INPUT_CELL) for p in self.pis]
        vs += [(g.id, g.cell) for g in self.gates]
        vs += [(PO_PREFIX + p, OUTPUT_CELL) for p in self.pos]
        return vs

    def edges(self) -> list[Edge]:
        return list(self._edges)

    def fanin_drivers(self, g: Gate) -> list[str]:
        """Driver vertex ids of ``g``'s inputs, in the cell's pin order."""
        return [self._driver[g.conn[p]][0] for p in self.lib[g.cell].inputs]

    def area(self) -> float:
        return sum(self.lib[g.cell].area for g in self.gates)

    def depth(self) -> int:
        """Longest PI-to-PO path counted in gates."""
        level = {p: 0 for p in self.pis}
        for g in self.topological_gates():
            level[g.id] = 1 + max((level[d] for d in self.fanin_drivers(g)), default=0)
        return max((level[self._driver[po][0]] for po in self.pos), default=0)


# -- documents -------------------------------------------------------------


def parse_netlist(text: str, lib: CellLibrary) -> Netlist:
    try:
        doc = json.loads(text)
    except json.JSONDecodeError as exc:
        raise NetlistError(f"netlist is not valid JSON: {exc}") from exc
    return netlist_from_doc(doc, lib)


def netlist_from_doc(doc: Mapping, lib: CellLibrary) -> Netlist:
    try:
        gates = [Gate(str(g["id"]), str(g["cell"]), dict(g["conn"])) for g in doc["gates"]]
        return Netlist(list(doc["pis"]), list(doc["pos"]), gates, lib)
    except (KeyError, TypeError) as exc:
        raise NetlistError(f"malformed netlist document: {exc}") from exc


def netlist_to_doc(nl: Netlist) -> dict:
    return {
        "pis": list(nl.pis),
        "pos": list(nl.pos),
        "gates": [{"id": g.id, "cell": g.cell, "conn": dict(g.conn)} for g in nl.gates],
    }


def serialize_netlist(nl: Netlist) -> str:
    return json.dumps(netlist_to_doc(nl), indent=2) + "\n"


def load_netlist(path, lib: CellLibrary) -> Netlist:
    with open(path, encoding="utf-8") as fh:
        return parse_netlist(fh.read(), lib)


# -- simulation ------------------------------------------------------------


def _eval_word(table: TruthTable, words: list[int], full: int) -> int:
    out = 0
    for r in range(table.rows):
        if not table.row(r):
            continue
        term = full
        for k, w in enumerate(words):
            term &= w if (r >> k) & 1 else ~w
        out |= term
    return out & full


def simulate_words(nl: Netlist, words: Mapping[str, int], width: int) -> dict[str, int]:
    """Bit-parallel simulation: each PI carries ``width`` assignments packed in an int."""
    full = (1 << width) - 1
    value = {}
    for p in nl.pis:
        if p not in words:
            raise NetlistError(f"assignment misses primary input {p!r}")
        value[p] = words[p] & full
    for g in nl.topological_gates():
        cell = nl.lib[g.cell]
        ins = [value[nl.driver(g.conn[pin])[0]] for pin in cell.inputs]
        value[g.id] = _eval_word(cell.function, ins, full)
    return {po: value[nl.driver(po)[0]] for po in nl.pos}


def simulate(nl: Netlist, assignment: Mapping[str, bool]) -> dict[str, bool]:
    words = {}
    for p in nl.pis:
        if p not in assignment:
            raise NetlistError(f"assignment misses primary input {p!r}")
        words[p] = 1 if assignment[p] else 0
    out = simulate_words(nl, words, 1)
    return {po: bool(v) for po, v in out.items()}


def exhaustive_words(pis: list[str]) -> tuple[dict[str, int], int]:
    """Packed words enumerating all 2^|pis| assignments (PI k is row bit k)."""
    n = len(pis)
    width = 1 << n
    words = {}
    for k, p in enumerate(pis):
        w = 0
        for r in range(width):
            if (r >> k) & 1:
                w |= 1 << r
        words[p] = w
    return words, width


def random_words(pis: list[str], count: int, rng: random.Random) -> tuple[dict[str, int], int]:
    return {p: rng.getrandbits(count) for p in pis}, count


def equivalent(a: Netlist, b: Netlist, vectors: int = 1000, seed: int = 0,
               exhaustive_limit: int = 10) -> bool:
    """Compare two netlists over shared PIs/POs (exhaustive for small PI counts)."""
    pis = list(dict.fromkeys([*a.pis, *b.pis]))
    if len(pis) <= exhaustive_limit:
        words, width = exhaustive_words(pis)
    else:
        words, width = random_words(pis, vectors, random.Random(seed))
    oa = simulate_words(a, {p: words[p] for p in a.pis}, width)
    ob = simulate_words(b, {p: words[p] for p in b.pis}, width)
    return set(oa) == set(ob) and all(oa[k] == ob[k] for k in oa)


# -- generators ------------------------------------------------------------


def _require(lib: CellLibrary, table: TruthTable, what: str, missing: list[str]):
    cell = lib.find_function(table)
    if cell is None:
        missing.append(what)
    return cell


def make_adder(width: int, lib: CellLibrary) -> Netlist:
    """Ripple-carry adder with a fixed 6-gate full-adder stage.

    Stage i: ``x = XOR(a, b)``, ``s = XOR(x, c)``, ``g = AND(a, b)``,
    ``p = AND(x, c)``, ``n = NOR(g, p)``, ``c' = INV(n)``.
    """
    if width < 1:
        raise NetlistError(f"adder width must be positive, got {width}")
    missing: list[str] = []
    xor = _require(lib, TruthTable(2, 0b0110), "XOR2", missing)
    and2 = _require(lib, TruthTable(2, 0b1000), "AND2", missing)
    nor2 = _require(lib, TruthTable(2, 0b0001), "NOR2", missing)
    inv = _require(lib, TruthTable(1, 0b01), "INV", missing)
    if missing:
        raise NetlistError(f"library lacks functions required by the adder: {', '.join(missing)}")

    def inst(gid, cell, out, *ins):
        conn = dict(zip(cell.inputs, ins))
        conn[cell.output] = out
        return Gate(gid, cell.name, conn)

    pis = [f"a{i}" for i in range(width)] + [f"b{i}" for i in range(width)] + ["cin"]
    pos = [f"s{i}" for i in range(width)] + ["cout"]
    gates = []
    carry = "cin"
    for i in range(width):
        a, b = f"a{i}", f"b{i}"
        nxt = "cout" if i == width - 1 else f"c{i + 1}"
        gates += [
            inst(f"fa{i}_x", xor, f"x{i}", a, b),
            inst(f"fa{i}_s", xor, f"s{i}", f"x{i}", carry),
            inst(f"fa{i}_g", and2, f"g{i}", a, b),
            inst(f"fa{i}_p", and2, f"p{i}", f"x{i}", carry),
            inst(f"fa{i}_n", nor2, f"n{i}", f"g{i}", f"p{i}"),
            inst(f"fa{i}_c", inv, nxt, f"n{i}"),
        ]
        carry = nxt
    return Netlist(pis, pos, gates, lib)


def adder_operands(width: int, a: int, b: int, cin: int = 0) -> dict[str, bool]:
    bits = {f"a{i}": bool((a >> i) & 1) for i in range(width)}
    bits.update({f"b{i}": bool((b >> i) & 1) for i in range(width)})
    bits["cin"] = bool(cin)
    return bits


def adder_result(width: int, out: Mapping[str, bool]) -> int:
    value = sum(int(out[f"s{i}"]) << i for i in range(width))
    return value | (int(out["cout"]) << width)


def random_netlist(lib: CellLibrary, n_gates: int, n_pis: int, rng: random.Random,
                   cells: list[str] | None = None) -> Netlist:
    """Random valid DAG; unused gate outputs become primary outputs."""
    names = cells or sorted(c.name for c in lib.real_cells() if c.arity >= 1)
    pis = [f"i{k}" for k in range(n_pis)]
    nets = list(pis)
    unused = list(pis)
    gates = []
    for k in range(n_gates):
        cell = lib[rng.choice(names)]
        ins = []
        for _ in cell.inputs:
            pool = unused if unused and rng.random() < 0.6 else nets
            net = rng.choice(pool)
            ins.append(net)
            if net in unused:
                unused.remove(net)
        out = f"w{k}"
        conn = dict(zip(cell.inputs, ins))
        conn[cell.output] = out
        gates.append(Gate(f"g{k}", cell.name, conn))
        nets.append(out)
        unused.append(out)
    used = {net for g in gates for pin, net in g.conn.items() if pin != lib[g.cell].output}
    pos = [g.conn[lib[g.cell].output] for g in gates if g.conn[lib[g.cell].output] not in used]
    extra = [n for n in nets[n_pis:] if n not in pos and rng.random() < 0.1]
    pos = pos + extra
    pis = [p for p in pis if p in used]
    return Netlist(pis, pos, gates, lib)
