"""Pattern functions, two-level minimization and permutation-equivalence grouping."""

from __future__ import annotations

from dataclasses import dataclass, field
from functools import lru_cache
from itertools import permutations
from typing import Iterable, Sequence

from .graphify import CLASS_LABEL
from .library import MAX_ARITY, CellLibrary, LibraryError, TruthTable
from .miner import DFSEdge, PatternGroupRaw, code_labels

VAR_NAMES = "abcdef"


class FunctionError(ValueError):
    pass


@dataclass(frozen=True)
class PatternFunction:
    inputs: tuple[int, ...]  # SI pattern vertices, in first-appearance order
    table: TruthTable


def pattern_function(code: Sequence[DFSEdge] | PatternGroupRaw, lib: CellLibrary) -> PatternFunction:
    """Evaluate a valid pattern's gates over every assignment of its inputs."""
    if isinstance(code, PatternGroupRaw):
        code = code.code
    labels = code_labels(code)
    member: dict[int, int] = {}
    kids: dict[int, dict[str, int]] = {}
    for e in code:
        cls, node = (e.i, e.j) if labels[e.i] == CLASS_LABEL else (e.j, e.i)
        cell = lib[labels[node]]
        if e.lij == cell.output:
            member[cls] = node
        else:
            kids.setdefault(node, {})[e.lij] = cls
    inputs = tuple(v for v, lab in enumerate(labels) if lab == CLASS_LABEL and v and v not in member)
    if len(inputs) > MAX_ARITY:
        raise FunctionError(f"pattern has {len(inputs)} inputs; at most {MAX_ARITY} supported")
    width = 1 << len(inputs)
    full = (1 << width) - 1
    # bit-parallel: one word holds the value for all rows
    words: dict[int, int] = {}
    for k, v in enumerate(inputs):
        w = 0
        for r in range(width):
            if (r >> k) & 1:
                w |= 1 << r
        words[v] = w

    def value(cls: int, stack: frozenset) -> int:
        if cls in words:
            return words[cls]
        if cls in stack or cls not in member:
            raise FunctionError(f"pattern class {cls} has no acyclic driver")
        node = member[cls]
        cell = lib[labels[node]]
        ins = [value(kids[node][p], stack | {cls}) for p in cell.inputs]
        out = 0
        for row in range(cell.function.rows):
            if not cell.function.row(row):
                continue
            term = full
            for k, w in enumerate(ins):
                term &= w if (row >> k) & 1 else ~w & full
            out |= term
        words[cls] = out
        return out

    return PatternFunction(inputs, TruthTable(len(inputs), value(0, frozenset())))


# -- two-level minimization --------------------------------------------------


@dataclass(frozen=True, order=True)
class Cube:
    """Product term: variable ``k`` appears iff bit ``k`` of ``care`` is set,
    positive iff bit ``k`` of ``value`` is also set."""

    care: int
    value: int

    def covers(self, row: int) -> bool:
        return (row & self.care) == self.value

    @property
    def literals(self) -> int:
        return bin(self.care).count("1")

    def rows(self, arity: int) -> int:
        """Bitmask of the truth-table rows inside the cube."""
        return _cube_rows(arity, self.care, self.value)

    def sort_key(self, arity: int) -> tuple:
        return tuple(
            (0 if (self.care >> k) & 1 else 1, 0 if (self.value >> k) & 1 else 1)
            for k in range(arity)
        )

    def render(self, arity: int) -> str:
        lits = [
            (VAR_NAMES[k] if (self.value >> k) & 1 else "!" + VAR_NAMES[k])
            for k in range(arity) if (self.care >> k) & 1
        ]
        return "*".join(lits) if lits else "1"


@lru_cache(maxsize=None)
def _cube_rows(arity: int, care: int, value: int) -> int:
    bits = 0
    for r in range(1 << arity):
        if (r & care) == value:
            bits |= 1 << r
    return bits


@dataclass(frozen=True)
class MinimizedSOP:
    arity: int
    cubes: tuple[Cube, ...]

    def evaluate(self, row: int) -> int:
        return int(any(c.covers(row) for c in self.cubes))

    def table(self) -> TruthTable:
        bits = 0
        for c in self.cubes:
            bits |= c.rows(self.arity)
        return TruthTable(self.arity, bits)

    @property
    def literals(self) -> int:
        return sum(c.literals for c in self.cubes)

    def render(self) -> str:
        if not self.cubes:
            return "0"
        return " + ".join(c.render(self.arity) for c in self.cubes)

    def __str__(self):
        return self.render()


def prime_implicants(t: TruthTable) -> list[Cube]:
    """Tabular merging: combine cubes that differ in one literal until nothing merges."""
    n = t.arity
    full = (1 << n) - 1
    level = {(full, r) for r in range(t.rows) if t.row(r)}
    primes: set[tuple[int, int]] = set()
    while level:
        merged: set[tuple[int, int]] = set()
        used: set[tuple[int, int]] = set()
        for care, value in level:
            for k in range(n):
                bit = 1 << k
                if care & bit and not value & bit and (care, value | bit) in level:
                    merged.add((care & ~bit, value))
                    used.add((care, value))
                    used.add((care, value | bit))
        primes |= level - used
        level = merged
    return sorted((Cube(c, v) for c, v in primes), key=lambda q: q.sort_key(n))


def quine_mccluskey(t: TruthTable) -> MinimizedSOP:
    """Exact minimum-cube SOP; ties go to fewer literals, then to cube order."""
    n = t.arity
    primes = prime_implicants(t)
    if not primes:
        return MinimizedSOP(n, ())
    rows = [p.rows(n) for p in primes]
    keys = [p.sort_key(n) for p in primes]
    lits = [p.literals for p in primes]
    covering: dict[int, list[int]] = {}
    for r in range(t.rows):
        if t.row(r):
            covering[r] = [k for k, m in enumerate(rows) if (m >> r) & 1]

    # primes that alone cover some row are in every cover
    chosen = sorted({ks[0] for ks in covering.values() if len(ks) == 1})
    covered = 0
    for k in chosen:
        covered |= rows[k]
    best: list = [None]

    def rank(picks: list[int]) -> tuple:
        return (len(picks), sum(lits[k] for k in picks), sorted(keys[k] for k in picks))

    def search(picks: list[int], covered: int):
        todo = t.bits & ~covered
        if best[0] is not None:
            size, nlits = len(picks), sum(lits[k] for k in picks)
            bsize, blits = best[0][0], best[0][1]
            extra = 1 if todo else 0
            if (size + extra, nlits) > (bsize, blits):
                return
        if not todo:
            r = rank(picks)
            if best[0] is None or r < best[0]:
                best[0] = r
                best.append(list(picks))
            return
        # branch on the uncovered row with the fewest options
        row = min((r for r in covering if (todo >> r) & 1), key=lambda r: (len(covering[r]), r))
        for k in covering[row]:
            if k in picks:
                continue
            picks.append(k)
            search(picks, covered | rows[k])
            picks.pop()

    search(list(chosen), covered)
    winner = best[-1]
    cubes = sorted((primes[k] for k in winner), key=lambda q: q.sort_key(n))
    return MinimizedSOP(n, tuple(cubes))


# -- permutation equivalence -------------------------------------------------


@dataclass(frozen=True)
class CanonicalFunction:
    table: TruthTable
    perm: tuple[int, ...]  # source.permute(perm) == table

    def hex(self) -> str:
        return table_hex(self.table)


def table_hex(t: TruthTable) -> str:
    return "0x" + format(t.bits, f"0{max(1, t.rows // 4)}x")


@lru_cache(maxsize=None)
def _perms(n: int) -> tuple[tuple[int, ...], ...]:
    return tuple(permutations(range(n)))


def canonicalize(f: PatternFunction | TruthTable) -> CanonicalFunction:
    """Smallest table over all input permutations, with the first permutation reaching it."""
    t = f.table if isinstance(f, PatternFunction) else f
    best = None
    for p in _perms(t.arity):
        cand = t.permute(p)
        if best is None or cand.bits < best[0].bits:
            best = (cand, p)
    return CanonicalFunction(best[0], best[1])


@dataclass
class GroupMember:
    pattern: PatternGroupRaw
    function: PatternFunction
    perm: tuple[int, ...]

    def pin_order(self) -> tuple[int, ...]:
        """Pattern input vertex feeding each canonical cell pin."""
        order = [0] * len(self.perm)
        for k, pin in enumerate(self.perm):
            order[pin] = self.function.inputs[k]
        return tuple(order)


@dataclass
class PatternGroup:
    function: TruthTable  # canonical
    members: list[GroupMember] = field(default_factory=list)
    sop: MinimizedSOP | None = None

    @property
    def arity(self) -> int:
        return self.function.arity

    @property
    def support(self) -> int:
        roots = set()
        for m in self.members:
            roots.update(p[0] for p in m.pattern.projections)
        return len(roots)

    @property
    def max_gates(self) -> int:
        return max(m.pattern.gates for m in self.members)

    def hex(self) -> str:
        return table_hex(self.function)

    def to_json(self) -> dict:
        return {
            "function": self.hex(),
            "arity": self.arity,
            "sop": self.sop.render() if self.sop else None,
            "support": self.support,
            "members": len(self.members),
            "max_gates": self.max_gates,
        }


def group_by_function(patterns: Iterable[PatternGroupRaw], lib: CellLibrary,
                      min_gates: int = 1) -> list[PatternGroup]:
    """Bucket patterns by permutation-canonical function, in first-seen order."""
    groups: dict[TruthTable, PatternGroup] = {}
    for pat in patterns:
        if pat.gates < min_gates:
            continue
        try:
            fn = pattern_function(pat.code, lib)
        except (FunctionError, LibraryError):
            continue
        canon = canonicalize(fn)
        grp = groups.get(canon.table)
        if grp is None:
            grp = groups[canon.table] = PatternGroup(canon.table)
            grp.sop = quine_mccluskey(canon.table)
        grp.members.append(GroupMember(pat, fn, canon.perm))
    return list(groups.values())
