"""Frequent-subcircuit mining over a PatternGraph with rooted DFS codes.

Every code starts at the pattern's output e-class (vertex 0), so support can be
measured as the number of distinct host vertices that vertex 0 maps to. Codes are
compared with gSpan's lexicographic order; the class label ``*`` sorts first.
"""

from __future__ import annotations

import json
from dataclasses import dataclass, field
from typing import Callable, Iterable, NamedTuple, Sequence

from .graphify import CLASS_LABEL, PatternGraph
from .library import INPUT_CELL

Pins = dict[str, tuple[tuple[str, ...], str]]
Projection = tuple[int, ...]


class MiningError(ValueError):
    pass


class DFSEdge(NamedTuple):
    i: int
    j: int
    li: str
    lij: str
    lj: str

    @property
    def forward(self) -> bool:
        return self.j > self.i


DFSCode = tuple[DFSEdge, ...]


def edge_key(e: DFSEdge) -> tuple:
    """Sort key: backward edges precede forward ones, deeper forward sources first."""
    if e.j > e.i:
        return (1, -e.i, e.li, e.lij, e.lj, e.j)
    return (0, e.j, e.li, e.lij, e.lj, e.i)


def code_key(code: Iterable[DFSEdge]) -> tuple:
    return tuple(edge_key(e) for e in code)


def rightmost_path(code: Sequence[DFSEdge]) -> list[int]:
    """Vertices from the rightmost one back to vertex 0."""
    if not code:
        return [0]
    parent = {e.j: e.i for e in code if e.j > e.i}
    path = [max(parent)]
    while path[-1] in parent:
        path.append(parent[path[-1]])
    return path


def code_labels(code: Sequence[DFSEdge]) -> list[str]:
    labels: dict[int, str] = {}
    for e in code:
        labels.setdefault(e.i, e.li)
        labels.setdefault(e.j, e.lj)
    return [labels[v] for v in range(len(labels))]


def code_from_json(rows) -> DFSCode:
    return tuple(DFSEdge(int(i), int(j), str(a), str(b), str(c)) for i, j, a, b, c in rows)


def code_to_json(code: Sequence[DFSEdge]) -> list[list]:
    return [list(e) for e in code]


# -- canonical form -----------------------------------------------------------


def _undirected(code: Sequence[DFSEdge]):
    labels = code_labels(code)
    adj: list[list[tuple[int, str, int]]] = [[] for _ in labels]
    for k, e in enumerate(code):
        adj[e.i].append((e.j, e.lij, k))
        adj[e.j].append((e.i, e.lij, k))
    return labels, adj


def _candidates(labels, adj, vmap: Projection, used: frozenset, path: list[int]):
    """All rightmost-path one-edge continuations of a partial traversal."""
    r = path[0]
    inv = {w: v for v, w in enumerate(vmap)}
    out = []
    for w, lab, k in adj[vmap[r]]:
        j = inv.get(w)
        if j is not None and j < r and k not in used and j in path:
            out.append((DFSEdge(r, j, labels[vmap[r]], lab, labels[w]), vmap, k))
    nxt = len(vmap)
    for i in path:
        for w, lab, k in adj[vmap[i]]:
            if w not in inv and k not in used:
                out.append((DFSEdge(i, nxt, labels[vmap[i]], lab, labels[w]), vmap + (w,), k))
    return out


def _advance(path: list[int], e: DFSEdge) -> list[int]:
    if not e.forward:
        return path
    return [e.j] + path[path.index(e.i):]


def canonical_form(labels: Sequence[str], edges: Sequence[tuple[int, int, str]],
                   ) -> tuple[DFSCode, Projection]:
    """Smallest DFS code of a connected labeled graph, traversed from vertex 0.

    Also returns the vertex order of that code: entry ``v`` is the input vertex that
    the code calls ``v``.
    """
    adj: list[list[tuple[int, str, int]]] = [[] for _ in labels]
    for k, (a, b, lab) in enumerate(edges):
        adj[a].append((b, lab, k))
        adj[b].append((a, lab, k))
    states = [((0,), frozenset())]
    best: list[DFSEdge] = []
    path = [0]
    for _ in range(len(edges)):
        cands = [(c, vm, used | {k}) for vm, used in states
                 for c, vm, k in _candidates(labels, adj, vm, used, path)]
        if not cands:
            raise MiningError("graph is not connected from vertex 0")
        low = min(edge_key(c) for c, _, _ in cands)
        states = list(dict.fromkeys((vm, used) for c, vm, used in cands if edge_key(c) == low))
        best.append(next(c for c, _, _ in cands if edge_key(c) == low))
        path = _advance(path, best[-1])
    return tuple(best), states[0][0] if edges else (0,)


def min_code(code: Sequence[DFSEdge]) -> DFSCode:
    """Smallest DFS code of the graph described by ``code``, traversed from vertex 0."""
    return canonical_form(code_labels(code), [(e.i, e.j, e.lij) for e in code])[0]


def is_minimal(code: Sequence[DFSEdge]) -> bool:
    """True iff ``code`` is the smallest DFS code of its graph rooted at vertex 0."""
    if len(code) <= 1:
        return True
    labels, adj = _undirected(code)
    states = [((0,), frozenset())]
    path = [0]
    for target in code:
        tkey = edge_key(target)
        r = path[0]
        nxt = []
        for vm, used in states:
            inv = {w: v for v, w in enumerate(vm)}
            # backward candidates always precede forward ones
            for w, lab, k in adj[vm[r]]:
                j = inv.get(w)
                if j is None or j >= r or k in used or j not in path:
                    continue
                ck = (0, j, labels[vm[r]], lab, labels[w], r)
                if ck < tkey:
                    return False
                if ck == tkey:
                    nxt.append((vm, used | {k}))
            if not target.forward:
                continue
            # forward sources deeper than the target's are smaller
            n = len(vm)
            for i in path:
                if i < target.i:
                    break
                for w, lab, k in adj[vm[i]]:
                    if w in inv or k in used:
                        continue
                    ck = (1, -i, labels[vm[i]], lab, labels[w], n)
                    if ck < tkey:
                        return False
                    if ck == tkey:
                        nxt.append((vm + (w,), used | {k}))
        states = list(dict.fromkeys(nxt))
        path = _advance(path, target)
    return True


# -- circuit constraints ------------------------------------------------------


@dataclass(frozen=True)
class MiningParams:
    min_support: int = 4
    max_gates: int = 5
    max_inputs: int = 3
    max_patterns: int = 10_000

    def __post_init__(self):
        for name in ("min_support", "max_gates", "max_inputs", "max_patterns"):
            if getattr(self, name) <= 0:
                raise ValueError(f"{name} must be positive")


@dataclass
class _Shape:
    labels: list[str]
    out: list[list[int]]  # directed adjacency on pattern vertices
    indeg: list[int]
    child_pins: list[list[str]]


def _shape(code: Sequence[DFSEdge], pins: Pins) -> _Shape:
    labels = code_labels(code)
    n = len(labels)
    out: list[list[int]] = [[] for _ in range(n)]
    indeg = [0] * n
    child_pins: list[list[str]] = [[] for _ in range(n)]
    for e in code:
        c, node = (e.i, e.j) if labels[e.i] == CLASS_LABEL else (e.j, e.i)
        cell = labels[node]
        if cell not in pins or labels[c] != CLASS_LABEL:
            raise MiningError(f"edge {e} does not join an e-class to a known cell")
        if e.lij == pins[cell][1]:
            src, dst = c, node
        else:
            src, dst = node, c
            child_pins[node].append(e.lij)
        out[src].append(dst)
        indeg[dst] += 1
    return _Shape(labels, out, indeg, child_pins)


def _has_cycle(out: list[list[int]]) -> bool:
    state = [0] * len(out)
    for start in range(len(out)):
        if state[start]:
            continue
        stack = [(start, iter(out[start]))]
        state[start] = 1
        while stack:
            v, it = stack[-1]
            w = next(it, None)
            if w is None:
                state[v] = 2
                stack.pop()
            elif state[w] == 1:
                return True
            elif state[w] == 0:
                state[w] = 1
                stack.append((w, iter(out[w])))
    return False


def _gate_count(labels: list[str]) -> int:
    return sum(1 for lab in labels if lab != CLASS_LABEL)


def is_illegal(code: Sequence[DFSEdge], pins: Pins, params: MiningParams = MiningParams()) -> bool:
    """True when no extension of ``code`` can satisfy the circuit constraints."""
    if not code:
        return False
    return _illegal(_shape(code, pins), rightmost_path(code), pins, params)


def _illegal(s: _Shape, path: list[int], pins: Pins, params: MiningParams) -> bool:
    if s.labels[0] != CLASS_LABEL or s.indeg[0] > 0:
        return True  # the output class must stay a source
    if INPUT_CELL in s.labels:
        return True
    if any(lab == CLASS_LABEL and len(o) > 1 for lab, o in zip(s.labels, s.out)):
        return True
    if _gate_count(s.labels) > params.max_gates:
        return True
    if _has_cycle(s.out):
        return True
    # Growth only touches the rightmost path, so every other vertex is final.
    live = set(path)
    inputs = 0
    for v, lab in enumerate(s.labels):
        if v in live:
            continue
        if lab == CLASS_LABEL:
            if v and s.indeg[v] == 0:
                return True
            inputs += not s.out[v]
        elif s.indeg[v] != 1 or len(s.child_pins[v]) != len(pins[lab][0]):
            return True
    if inputs > params.max_inputs:
        return True
    return _cannot_finish(s, live, pins, params)


def _reaches(out: list[list[int]], a: int, b: int) -> bool:
    todo, seen = [a], {a}
    while todo:
        v = todo.pop()
        if v == b:
            return True
        for w in out[v]:
            if w not in seen:
                seen.add(w)
                todo.append(w)
    return False


def _cannot_finish(s: _Shape, live: set[int], pins: Pins, params: MiningParams) -> bool:
    """Counting bounds on what the remaining gate budget can still repair.

    Every node needs exactly one owning class and each added gate claims at most one
    class, so unclaimed classes beyond open nodes plus spare gates end up as inputs.
    With no spare gates, classes lacking a driver (including fresh owners for open
    nodes) must be fed from the input pins still free on existing nodes.
    """
    spare = params.max_gates - _gate_count(s.labels)
    is_cls = [lab == CLASS_LABEL for lab in s.labels]
    open_nodes = [v for v in live if not is_cls[v] and s.indeg[v] == 0]
    unclaimed = [v for v in range(1, len(s.labels)) if is_cls[v] and not s.out[v]]
    if len(unclaimed) - len(open_nodes) - spare > params.max_inputs:
        return True
    if spare:
        return False
    free_pins = sum(len(pins[s.labels[v]][0]) - len(s.child_pins[v])
                    for v in live if not is_cls[v])
    orphans = sum(1 for v in live if v and is_cls[v] and s.indeg[v] == 0)
    owners = [c for c in unclaimed if c in live]
    homeless = sum(1 for n in open_nodes
                   if not any(not _reaches(s.out, n, c) for c in owners))
    return orphans + homeless > free_pins


def _incomplete(s: _Shape, v: int, pins: Pins) -> bool:
    lab = s.labels[v]
    if lab == CLASS_LABEL:
        return v > 0 and s.indeg[v] == 0
    return s.indeg[v] != 1 or len(s.child_pins[v]) != len(pins[lab][0])


def _extension_filter(s: _Shape, path: list[int], pins: Pins,
                      params: MiningParams) -> Callable[[DFSEdge], bool]:
    """Cheap necessary condition for ``not is_illegal(code + (e,))`` on a legal code."""
    live = set(path)
    gates = _gate_count(s.labels)
    frozen_inputs = sum(1 for v, lab in enumerate(s.labels)
                        if lab == CLASS_LABEL and v not in live and not s.out[v])

    def allow(e: DFSEdge) -> bool:
        if INPUT_CELL in (e.li, e.lj):
            return False
        n = len(s.labels)
        cls_side, node_side = (e.i, e.j) if e.li == CLASS_LABEL else (e.j, e.i)
        cell = e.lj if e.li == CLASS_LABEL else e.li
        member = e.lij == pins[cell][1]
        if member and cls_side < n and s.out[cls_side]:
            return False
        if not member and cls_side == 0:
            return False
        if e.forward and e.j == n and e.lj != CLASS_LABEL and gates >= params.max_gates:
            return False
        if e.forward:
            k = path.index(e.i)
            inputs = frozen_inputs
            for v in path[:k]:
                if _incomplete(s, v, pins):
                    return False
                inputs += s.labels[v] == CLASS_LABEL and not s.out[v]
            return inputs <= params.max_inputs
        src, dst = (cls_side, node_side) if member else (node_side, cls_side)
        return not _reaches(s.out, dst, src)

    # path vertices that can still grow a forward edge at all
    sources = set()
    for k, i in enumerate(path):
        if s.labels[i] == CLASS_LABEL:
            if not s.out[i] or (i and gates < params.max_gates):
                sources.add(i)
        elif s.indeg[i] == 0 or len(s.child_pins[i]) < len(pins[s.labels[i]][0]):
            sources.add(i)
        if _incomplete(s, i, pins):
            break  # growing above i would freeze it unfinished
    allow.sources = sources
    return allow


def pattern_inputs(code: Sequence[DFSEdge], pins: Pins) -> list[int]:
    """SI class vertices in order of first appearance."""
    s = _shape(code, pins)
    return [v for v, lab in enumerate(s.labels) if lab == CLASS_LABEL and v != 0 and not s.out[v]]


def satisfies_constraints(code: Sequence[DFSEdge], pins: Pins,
                          params: MiningParams = MiningParams()) -> bool:
    if not code:
        return False
    s = _shape(code, pins)
    return not _illegal(s, rightmost_path(code), pins, params) and _complete(s, pins, params)


def _complete(s: _Shape, pins: Pins, params: MiningParams) -> bool:
    if len(s.out[0]) != 1:
        return False
    n_inputs = 0
    for v, lab in enumerate(s.labels):
        if lab == CLASS_LABEL:
            if v and s.indeg[v] == 0:
                return False  # a second output
            if v and not s.out[v]:
                n_inputs += 1
        else:
            if s.indeg[v] != 1 or sorted(s.child_pins[v]) != sorted(pins[lab][0]):
                return False  # dangling pin or no driver
    return 1 <= _gate_count(s.labels) and n_inputs <= params.max_inputs


# -- growth -------------------------------------------------------------------


def support(projections: Iterable[Projection]) -> int:
    return len({p[0] for p in projections})


def find_frequent_1edge(pg: PatternGraph, min_support: int) -> list[tuple[DFSCode, list[Projection]]]:
    groups: dict[DFSEdge, list[Projection]] = {}
    for v in pg.cvertices:
        for w, lab in pg.adj[v]:
            groups.setdefault(DFSEdge(0, 1, CLASS_LABEL, lab, pg.labels[w]), []).append((v, w))
    out = [((e,), ps) for e, ps in groups.items() if support(ps) >= min_support]
    out.sort(key=lambda t: code_key(t[0]))
    return out


def find_extensions(pg: PatternGraph, min_support: int, code: DFSCode,
                    projections: Sequence[Projection],
                    allow: Callable[[DFSEdge], bool] | None = None,
                    accept: Callable[[DFSCode], bool] | None = None,
                    ) -> list[tuple[DFSCode, list[Projection]]]:
    """Rightmost-path extensions with enough support, in code order.

    ``allow`` vetoes single edges before any counting; ``accept`` vetoes whole child
    codes after the support test but before their projections are built.
    """
    path = rightmost_path(code)
    r = path[0]
    last = code[-1]
    labels = code_labels(code)
    present = {(min(e.i, e.j), max(e.i, e.j), e.lij) for e in code}
    nxt = r + 1
    r_is_class = labels[r] == CLASS_LABEL
    backs = [j for j in path[1:]
             if (labels[j] == CLASS_LABEL) != r_is_class and (last.forward or j >= last.j)]
    # backward edge per (target, edge label); None when vetoed or out of order
    bcache: dict[tuple[int, str], DFSEdge | None] = {}

    def back_edge(j: int, lab: str) -> DFSEdge | None:
        e = None
        if (j, r, lab) not in present and (last.forward or (j, lab) > (last.j, last.lij)):
            e = DFSEdge(r, j, labels[r], lab, labels[j])
            if not ok(e):
                e = None
        bcache[(j, lab)] = e
        return e

    verdict: dict[DFSEdge, bool] = {}

    def ok(e: DFSEdge) -> bool:
        v = verdict.get(e)
        if v is None:
            v = verdict[e] = allow is None or allow(e)
        return v

    # forward edge per path position and (edge label, new label); None when vetoed
    tcache: list[dict[tuple[str, str], DFSEdge | None]] = [{} for _ in path]

    def fwd_edge(k: int, key: tuple[str, str]) -> DFSEdge | None:
        e = DFSEdge(path[k], nxt, labels[path[k]], key[0], key[1])
        e = tcache[k][key] = e if ok(e) else None
        return e

    typed = pg.typed
    nbrs = pg.nbrs
    sources = getattr(allow, "sources", None)
    spots = [(k, i) for k, i in enumerate(path) if sources is None or i in sources]
    # pass 1: root images per candidate edge
    roots: dict[DFSEdge, set[int]] = {}
    for proj in projections:
        root = proj[0]
        if backs:
            nb = nbrs[proj[r]]
            for j in backs:
                labs = nb.get(proj[j])
                if labs:
                    for lab in labs:
                        key = (j, lab)
                        e = bcache[key] if key in bcache else back_edge(j, lab)
                        if e is not None:
                            roots.setdefault(e, set()).add(root)
        used = None
        for k, i in spots:
            tc = tcache[k]
            for key, ws in typed[proj[i]].items():
                e = tc[key] if key in tc else fwd_edge(k, key)
                if e is None:
                    continue
                seen = roots.get(e)
                if seen is not None and root in seen:
                    continue
                if used is None:
                    used = set(proj)
                for w in ws:
                    if w not in used:
                        if seen is None:
                            roots[e] = {root}
                        else:
                            seen.add(root)
                        break
    keep = sorted((e for e, rs in roots.items() if len(rs) >= min_support), key=edge_key)
    keep = [e for e in keep if accept is None or accept(code + (e,))]
    if not keep:
        return []

    # pass 2: projections for the surviving edges only
    wanted = set(keep)
    groups: dict[DFSEdge, list[Projection]] = {e: [] for e in keep}
    for proj in projections:
        if backs:
            nb = nbrs[proj[r]]
            for j in backs:
                for lab in nb.get(proj[j], ()):
                    e = bcache.get((j, lab))
                    if e in wanted:
                        groups[e].append(proj)
        used = set(proj)
        for k, i in spots:
            tc = tcache[k]
            for key, ws in typed[proj[i]].items():
                e = tc.get(key)
                if e in wanted:
                    groups[e].extend(proj + (w,) for w in ws if w not in used)
    return [(code + (e,), groups[e]) for e in keep]


def find_projections(pg: PatternGraph, code: Sequence[DFSEdge]) -> list[Projection]:
    """All embeddings of ``code`` into ``pg``, rebuilt edge by edge."""
    if not code:
        return []
    first = code[0]
    projs: list[Projection] = [(v,) for v in pg.cvertices] if first.li == CLASS_LABEL else \
        [(v,) for v, lab in enumerate(pg.labels) if lab == first.li]
    for e in code:
        nxt = []
        for p in projs:
            if e.forward:
                used = set(p)
                for w, lab in pg.adj[p[e.i]]:
                    if lab == e.lij and pg.labels[w] == e.lj and w not in used:
                        nxt.append(p + (w,))
            elif e.lij in pg.nbrs[p[e.i]].get(p[e.j], ()):
                nxt.append(p)
        projs = nxt
    return projs


@dataclass
class PatternGroupRaw:
    code: DFSCode
    projections: list[Projection]
    support: int
    gates: int
    inputs: list[int] = field(default_factory=list)

    def to_json(self, sample: int = 10) -> dict:
        return {
            "code": code_to_json(self.code),
            "support": self.support,
            "projections_sample": [list(p) for p in self.projections[:sample]],
            "gates": self.gates,
            "inputs": len(self.inputs),
        }


@dataclass
class MiningResult:
    patterns: list[PatternGroupRaw]
    truncated: bool = False
    explored: int = 0

    def __iter__(self):
        return iter(self.patterns)

    def __len__(self):
        return len(self.patterns)

    def __getitem__(self, k):
        return self.patterns[k]

    def to_json(self) -> dict:
        return {"truncated": self.truncated, "patterns": [p.to_json() for p in self.patterns]}

    def dumps(self) -> str:
        return json.dumps(self.to_json(), indent=1) + "\n"


def _closure(pg: PatternGraph, gates: Iterable[int]):
    """The subgraph induced by a set of host gates, rooted at its output class.

    A valid pattern over a gate set contains exactly each gate's owner edge and
    child edges, so once a code holds its full gate budget its projections fully
    determine what it can become. Returns ``(labels, edges, host)`` or None when the
    gates cannot form one single-output subcircuit.
    """
    gates = sorted(gates)
    owners = {}
    children = set()
    for h in gates:
        c = pg.owner[h][0]
        if c in owners:
            return None  # one class, two chosen gates
        owners[c] = h
        children.update(k for _, k in pg.kids.get(h, ()))
    roots = [c for c in owners if c not in children]
    if len(roots) != 1:
        return None
    host = [roots[0]] + gates
    host += sorted((set(owners) | children) - set(host))
    local = {h: v for v, h in enumerate(host)}
    labels = [pg.labels[h] for h in host]
    edges = []
    for h in gates:
        c, pin = pg.owner[h]
        edges.append((local[c], local[h], pin))
        edges.extend((local[h], local[k], p) for p, k in pg.kids.get(h, ()))
    return labels, edges, host


def mine(pg: PatternGraph, params: MiningParams = MiningParams()) -> MiningResult:
    """All frequent valid subcircuits, sorted by code.

    Growth follows rightmost-path extension. A code that already holds
    ``max_gates`` gates is closed per projection instead of grown further.
    """
    pins = pg.pins
    found: list[PatternGroupRaw] = []
    result = MiningResult(found)
    shapes: dict[DFSCode, tuple[_Shape, list[int]]] = {}
    closed: dict[DFSCode, dict[Projection, None]] = {}
    seen_gates: set[frozenset] = set()

    def accept(child: DFSCode) -> bool:
        s, path = _shape(child, pins), rightmost_path(child)
        if _illegal(s, path, pins, params) or not is_minimal(child):
            return False
        shapes[child] = (s, path)
        return True

    def emit(code: DFSCode, projs: list[Projection], sup: int, s: _Shape):
        if len(found) >= params.max_patterns:
            result.truncated = True
            return
        inputs = [v for v, lab in enumerate(s.labels) if lab == CLASS_LABEL and v and not s.out[v]]
        found.append(PatternGroupRaw(code, projs, sup, _gate_count(s.labels), inputs))

    def close(code: DFSCode, projs: list[Projection]):
        gate_idx = [v for v, lab in enumerate(code_labels(code)) if lab != CLASS_LABEL]
        for proj in projs:
            gates = frozenset(proj[v] for v in gate_idx)
            if gates in seen_gates:
                continue
            seen_gates.add(gates)
            got = _closure(pg, gates)
            if got is None:
                continue
            labels, edges, host = got
            canon, order = canonical_form(labels, edges)
            if satisfies_constraints(canon, pins, params):
                closed.setdefault(canon, {})[tuple(host[v] for v in order)] = None

    def grow(code: DFSCode, projs: list[Projection], parent_support: int):
        if result.truncated:
            return
        result.explored += 1
        sup = support(projs)
        assert sup <= parent_support, "support must not grow under extension"
        s, path = shapes.pop(code)
        if _gate_count(s.labels) == params.max_gates:
            close(code, projs)
            return
        if _complete(s, pins, params):
            emit(code, projs, sup, s)
        allow = _extension_filter(s, path, pins, params)
        for child, cprojs in find_extensions(pg, params.min_support, code, projs, allow, accept):
            grow(child, cprojs, sup)

    for code, projs in find_frequent_1edge(pg, params.min_support):
        if accept(code):
            grow(code, projs, support(projs))
    for code in sorted(closed, key=code_key):
        projs = list(closed[code])
        sup = support(projs)
        if sup >= params.min_support and not result.truncated:
            emit(code, projs, sup, _shape(code, pins))
    found.sort(key=lambda p: code_key(p.code))
    return result
