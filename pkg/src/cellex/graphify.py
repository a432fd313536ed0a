"""Bipartite, pin-labeled view of an e-graph for subgraph mining."""

from __future__ import annotations

from dataclasses import dataclass, field
from itertools import permutations

from .egraph import EGraph
from .library import INPUT_CELL, CellLibrary

CLASS_LABEL = "*"  # sorts before every cell name and pin name


class GraphifyError(ValueError):
    pass


@dataclass
class PatternGraph:
    """Class vertices come first (by canonical class id), then node vertices (by e-node id).

    ``edges`` holds ``(src, dst, pin)``: class->node edges carry the node's output pin,
    node->class edges carry the consumed input pin.
    """

    labels: list[str]
    origin: list[tuple[str, int]]
    edges: list[tuple[int, int, str]]
    pins: dict[str, tuple[tuple[str, ...], str]]
    adj: list[list[tuple[int, str]]] = field(init=False, repr=False)
    typed: list[dict[tuple[str, str], list[int]]] = field(init=False, repr=False)

    def __post_init__(self):
        self.adj = [[] for _ in self.labels]
        for s, d, pin in self.edges:
            self.adj[s].append((d, pin))
            self.adj[d].append((s, pin))
        for row in self.adj:
            row.sort(key=lambda t: (t[1], self.labels[t[0]], t[0]))
        # neighbours grouped by (edge label, neighbour label)
        # neighbour -> edge labels, per vertex
        self.nbrs: list[dict[int, list[str]]] = [{} for _ in self.labels]
        for a, b, pin in self.edges:
            self.nbrs[a].setdefault(b, []).append(pin)
            self.nbrs[b].setdefault(a, []).append(pin)
        self.typed = []
        for row in self.adj:
            groups: dict[tuple[str, str], list[int]] = {}
            for w, pin in row:
                groups.setdefault((pin, self.labels[w]), []).append(w)
            self.typed.append(groups)
        self._index = {o: v for v, o in enumerate(self.origin)}
        # owning class and pin-labelled children of each node vertex
        self.owner: dict[int, tuple[int, str]] = {}
        self.kids: dict[int, list[tuple[str, int]]] = {}
        for a, b, pin in self.edges:
            if self.labels[a] == CLASS_LABEL:
                self.owner[b] = (a, pin)
            else:
                self.kids.setdefault(a, []).append((pin, b))

    @property
    def cvertices(self) -> list[int]:
        return [v for v, lab in enumerate(self.labels) if lab == CLASS_LABEL]

    @property
    def nvertices(self) -> list[int]:
        return [v for v, lab in enumerate(self.labels) if lab != CLASS_LABEL]

    def is_class(self, v: int) -> bool:
        return self.labels[v] == CLASS_LABEL

    def vertex_of_class(self, cid: int) -> int:
        return self._index[("class", cid)]

    def vertex_of_node(self, nid: int) -> int:
        return self._index[("node", nid)]

    def out_edges(self, v: int) -> list[tuple[int, str]]:
        return [(d, p) for s, d, p in self.edges if s == v]

    def __len__(self) -> int:
        return len(self.labels)


def library_pins(lib: CellLibrary) -> dict[str, tuple[tuple[str, ...], str]]:
    return {name: (c.inputs, c.output) for name, c in lib.cells.items()}


def egraph_to_graph(g: EGraph, lib: CellLibrary) -> PatternGraph:
    classes = g.class_ids()
    nodes = g.live_nodes()
    labels = [CLASS_LABEL] * len(classes)
    origin: list[tuple[str, int]] = [("class", c) for c in classes]
    cvert = {c: k for k, c in enumerate(classes)}
    nvert = {}
    for nid in nodes:
        op = g.nodes[nid].op
        if op not in lib:
            raise GraphifyError(f"e-node {nid} uses op {op!r} missing from the library")
        nvert[nid] = len(labels)
        labels.append(op)
        origin.append(("node", nid))
    edges = []
    for c in classes:
        for nid in g.class_nodes(c):
            edges.append((cvert[c], nvert[nid], lib[g.nodes[nid].op].output))
    for nid in nodes:
        node = g.canonical(g.nodes[nid])
        for ch, pin in zip(node.children, lib[node.op].inputs):
            edges.append((nvert[nid], cvert[ch], pin))
    return PatternGraph(labels, origin, edges, library_pins(lib))


def symmetric_permutations(cell) -> list[tuple[int, ...]]:
    """Input permutations that leave a cell's function unchanged."""
    return [p for p in permutations(range(cell.arity)) if cell.function.permute(p) == cell.function]


def fold_symmetric(pg: PatternGraph, lib: CellLibrary) -> PatternGraph:
    """Copy of ``pg`` where pin-swapped twins inside one e-class lose all their edges.

    Two members of a class are twins when they share a cell type and their child
    lists differ only by an input permutation the cell's function ignores. The first
    twin (lowest vertex id) is kept; vertex ids are unchanged.
    """
    perms = {}
    children: dict[int, dict[str, int]] = {}
    owner: dict[int, int] = {}
    for s, d, pin in pg.edges:
        if pg.is_class(s):
            owner[d] = s
        else:
            children.setdefault(s, {})[pin] = d
    seen = set()
    dropped = set()
    for v in pg.nvertices:
        cell = lib[pg.labels[v]]
        if cell.arity < 2:
            continue
        if cell.name not in perms:
            perms[cell.name] = symmetric_permutations(cell)
        kids = [children[v][pin] for pin in cell.inputs]
        key = (owner.get(v), cell.name, min(tuple(kids[k] for k in p) for p in perms[cell.name]))
        if key in seen:
            dropped.add(v)
        seen.add(key)
    edges = [e for e in pg.edges if e[0] not in dropped and e[1] not in dropped]
    return PatternGraph(list(pg.labels), list(pg.origin), edges, dict(pg.pins))


def vertex_count_report(pg: PatternGraph) -> dict[str, int]:
    nclass = len(pg.cvertices)
    return {"classes": nclass, "nodes": len(pg) - nclass, "edges": len(pg.edges)}


def to_dot(pg: PatternGraph, name: str = "egraph") -> str:
    lines = [f"digraph {name} {{"]
    for v, lab in enumerate(pg.labels):
        kind, ident = pg.origin[v]
        if kind == "class":
            lines.append(f'  v{v} [shape=ellipse, style=dashed, label="c{ident}"];')
        else:
            shape = "plaintext" if lab == INPUT_CELL else "box"
            lines.append(f'  v{v} [shape={shape}, label="{lab}#{ident}"];')
    for s, d, pin in pg.edges:
        lines.append(f'  v{s} -> v{d} [label="{pin}"];')
    lines.append("}")
    return "\n".join(lines) + "\n"
