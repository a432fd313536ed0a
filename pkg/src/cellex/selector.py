"""Candidate cell scoring, extraction-based area evaluation and greedy selection."""

from __future__ import annotations

import csv
import io
import json
import logging
import multiprocessing
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass, field
from itertools import combinations
from pathlib import Path
from typing import Iterable, Sequence

import numpy as np

from .boolfn import MinimizedSOP, PatternGroup, canonicalize, quine_mccluskey, table_hex
from .egraph import Choice, EGraph, Extraction, area_costs, extract, extraction_to_netlist
from .graphify import PatternGraph
from .library import CellLibrary, CellType, TruthTable, serialize_library
from .miner import code_labels, find_projections
from .netlist import Netlist, equivalent, serialize_netlist

log = logging.getLogger(__name__)

PIN_NAMES = ("A", "B", "C", "D", "E", "F")


class SelectionError(ValueError):
    pass


# -- area model --------------------------------------------------------------


def _negative_unate(t: TruthTable) -> bool:
    for k in range(t.arity):
        bit = 1 << k
        for r in range(t.rows):
            if not r & bit and t.row(r) < t.row(r | bit):
                return False
    return True


def transistor_count(t: TruthTable) -> int:
    """Static CMOS complex gate: two transistors per SOP literal.

    A negative-unate function is built directly from the complement's SOP; anything
    else pays two more transistors for an output inverter.
    """
    if t.bits in (0, t.mask):
        raise SelectionError("constant functions have no gate realization")
    if _negative_unate(t):
        return 2 * quine_mccluskey(t.complement()).literals
    return 2 * quine_mccluskey(t).literals + 2


@dataclass(frozen=True)
class AreaModel:
    intercept: float
    slope: float

    def area(self, transistors: float) -> float:
        return self.intercept + self.slope * transistors


def fit_area_model(base: CellLibrary) -> AreaModel:
    """Least-squares line through the base cells' (transistor count, area) pairs."""
    cells = [c for c in base.real_cells() if c.function.bits not in (0, c.function.mask)]
    if len(cells) < 2:
        raise SelectionError("area model needs at least two non-constant base cells")
    x = np.array([transistor_count(c.function) for c in cells], dtype=float)
    y = np.array([c.area for c in cells], dtype=float)
    if np.ptp(x) == 0:
        return AreaModel(0.0, float(y.mean() / x[0]))
    design = np.column_stack([np.ones_like(x), x])
    (a, b), *_ = np.linalg.lstsq(design, y, rcond=None)
    return AreaModel(float(a), float(b))


def estimate_cell_area(sop: MinimizedSOP, base: CellLibrary, merged: int | None = None,
                       model: AreaModel | None = None) -> float:
    """Estimated area of a new cell.

    ``merged`` is the transistor total of an existing gate-level realization; the cell
    uses whichever of that and the single complex gate is smaller.
    """
    t = sop.table()
    if t.bits in (0, t.mask):
        raise SelectionError("constant function rejected as a cell")
    model = model or fit_area_model(base)
    count = transistor_count(t)
    if merged is not None:
        count = min(count, merged)
    return round(model.area(count), 4)


# -- candidates and extended libraries --------------------------------------


@dataclass
class CandidateCell:
    name: str
    group: PatternGroup
    est_area: float
    transistors: int
    support: int = -1

    def __post_init__(self):
        if self.support < 0:
            self.support = self.group.support

    @property
    def function(self) -> TruthTable:
        return self.group.function

    @property
    def sop(self) -> MinimizedSOP:
        return self.group.sop

    def cell_type(self) -> CellType:
        n = self.function.arity
        return CellType(self.name, PIN_NAMES[:n], "Y", self.est_area, self.function)

    def to_json(self) -> dict:
        return {
            "name": self.name,
            "function": table_hex(self.function),
            "arity": self.function.arity,
            "sop": self.sop.render(),
            "est_area": self.est_area,
            "transistors": self.transistors,
            "support": self.support,
            "patterns": len(self.group.members),
            "max_gates": self.group.max_gates,
        }


def candidate_name(t: TruthTable) -> str:
    return f"EXT{t.arity}_{table_hex(t)[2:].upper()}"


def make_candidates(groups: Iterable[PatternGroup], base: CellLibrary,
                    max_inputs: int = 3, max_gates: int = 5) -> list[CandidateCell]:
    """One candidate per group that is non-trivial and not already a base function."""
    model = fit_area_model(base)
    known = {canonicalize(c.function).table for c in base.real_cells()}
    tcount = {c.name: transistor_count(c.function) for c in base.real_cells()
              if c.function.bits not in (0, c.function.mask)}
    out = []
    for grp in groups:
        t = grp.function
        if t.arity < 2 or t.arity > max_inputs or grp.max_gates > max_gates:
            continue
        if t.bits in (0, t.mask) or t in known:
            continue
        merged = min(sum(tcount.get(lab, 0) for lab in code_labels(m.pattern.code)
                         if lab in tcount) for m in grp.members)
        area = estimate_cell_area(grp.sop, base, merged, model)
        out.append(CandidateCell(candidate_name(t), grp, area, min(transistor_count(t), merged)))
    return sorted(out, key=lambda c: c.name)


@dataclass
class ExtendedLibrary:
    base: CellLibrary
    extensions: list[CandidateCell] = field(default_factory=list)

    @property
    def lib(self) -> CellLibrary:
        return self.base.extended(c.cell_type() for c in self.extensions)

    @property
    def names(self) -> list[str]:
        return [c.name for c in self.extensions]


@dataclass(frozen=True)
class QoRWeights:
    """Exponents of the cost product delay^d * power^p * area^a.

    Delay is the unit-gate depth; power has no model and contributes a factor of 1.
    """

    delay: float = 0.0
    power: float = 0.0
    area: float = 1.0

    def __post_init__(self):
        if min(self.delay, self.power, self.area) < 0:
            raise SelectionError("QoR exponents must be nonnegative")

    def cost(self, area: float, depth: int) -> float:
        return (max(depth, 1) ** self.delay) * (area ** self.area)


# -- evaluation --------------------------------------------------------------


@dataclass
class Evaluation:
    area: float
    gates: int
    depth: int
    netlist: Netlist
    extraction: Extraction | None
    instances: dict[str, int]

    def qor(self, weights: QoRWeights) -> float:
        return weights.cost(self.area, self.depth)


def cell_choices(cand: CandidateCell, g: EGraph, pg: PatternGraph,
                 rank: int = 0) -> dict[int, list[Choice]]:
    """Composite implementations offered by every match of the candidate's patterns."""
    out: dict[int, list[Choice]] = {}
    seen = set()
    for m in cand.group.members:
        order = m.pin_order()
        for proj in find_projections(pg, m.pattern.code):
            root = g.find(pg.origin[proj[0]][1])
            kids = tuple(g.find(pg.origin[proj[v]][1]) for v in order)
            if (root, kids) in seen:
                continue
            seen.add((root, kids))
            out.setdefault(root, []).append(Choice(cand.name, kids, cand.est_area, None, rank))
    return out


class Evaluator:
    """Extraction over one saturated e-graph, with per-candidate match caches."""

    def __init__(self, g: EGraph, pg: PatternGraph, base: CellLibrary):
        self.g = g
        self.pg = pg
        self.base = base
        self._choices: dict[str, dict[int, list[Choice]]] = {}

    def choices(self, cand: CandidateCell, rank: int) -> dict[int, list[Choice]]:
        if cand.name not in self._choices:
            self._choices[cand.name] = cell_choices(cand, self.g, self.pg, rank)
        return self._choices[cand.name]

    def evaluate(self, cells: Sequence[CandidateCell]) -> Evaluation:
        ext = ExtendedLibrary(self.base, list(cells))
        lib = ext.lib
        extra: dict[int, list[Choice]] = {}
        for rank, c in enumerate(sorted(cells, key=lambda c: c.name)):
            for cls, opts in self.choices(c, rank).items():
                extra.setdefault(cls, []).extend(
                    Choice(o.op, o.children, o.cost, None, rank) for o in opts)
        ex = extract(self.g, area_costs(lib), extra)
        nl = extraction_to_netlist(self.g, ex, lib)
        counts: dict[str, int] = {}
        for gate in nl.gates:
            counts[gate.cell] = counts.get(gate.cell, 0) + 1
        return Evaluation(round(nl.area(), 4), len(nl.gates), nl.depth(), nl, ex,
                          {c.name: counts.get(c.name, 0) for c in cells})


def unchanged(nl: Netlist) -> Evaluation:
    """The input netlist itself, used when no cell is selected."""
    return Evaluation(round(nl.area(), 4), len(nl.gates), nl.depth(), nl, None, {})


def evaluate_extension(g: EGraph, pg: PatternGraph, ext: ExtendedLibrary) -> Evaluation:
    return Evaluator(g, pg, ext.base).evaluate(ext.extensions)


def _tiebreak(c: CandidateCell) -> tuple:
    return (-c.support, c.est_area, c.name)


def select_cells(candidates: Sequence[CandidateCell], budget: int, g: EGraph, pg: PatternGraph,
                 base: CellLibrary, weights: QoRWeights = QoRWeights(),
                 exhaustive: bool = False, evaluator: Evaluator | None = None,
                 jobs: int = 1) -> tuple[ExtendedLibrary, Evaluation]:
    """Pick at most ``budget`` cells minimizing the QoR cost of the extracted netlist."""
    if budget < 0:
        raise SelectionError("cell budget must be nonnegative")
    ev = evaluator or Evaluator(g, pg, base)
    current: list[CandidateCell] = []
    now = ev.evaluate(current)
    if exhaustive:
        if len(candidates) > 15:
            raise SelectionError(f"exhaustive selection limited to 15 candidates, got {len(candidates)}")
        best = (now.qor(weights), 0, (), now)
        for k in range(1, budget + 1):
            for subset in combinations(sorted(candidates, key=_tiebreak), k):
                res = ev.evaluate(subset)
                key = (res.qor(weights), k, tuple(_tiebreak(c) for c in subset), res)
                if key[:3] < best[:3]:
                    best = key
        return ExtendedLibrary(base, _unkey(best[2], candidates)), best[3]
    pool = sorted(candidates, key=_tiebreak)
    while len(current) < budget and pool:
        base_cost = now.qor(weights)
        costs = _score(ev, [[*current, c] for c in pool], weights, jobs)
        scored = [(base_cost - q, c) for q, c in zip(costs, pool)]
        for gain, c in scored:
            log.debug("candidate %s gain %.4f", c.name, gain)
        best = max(s[0] for s in scored)
        gain, pick = min((s for s in scored if s[0] == best), key=lambda s: _tiebreak(s[1]))
        if gain <= 0:
            break
        log.info("selected %s (gain %.4f)", pick.name, gain)
        current.append(pick)
        pool.remove(pick)
        now = ev.evaluate(current)
    return ExtendedLibrary(base, current), now


_WORKER: tuple | None = None


def _worker_init(ev: Evaluator, weights: QoRWeights):
    global _WORKER
    _WORKER = (ev, weights)


def _worker_cost(cells) -> float:
    ev, weights = _WORKER
    return ev.evaluate(cells).qor(weights)


def _score(ev: Evaluator, subsets: list[list[CandidateCell]], weights: QoRWeights,
           jobs: int) -> list[float]:
    if jobs <= 1 or len(subsets) < 2:
        return [ev.evaluate(cells).qor(weights) for cells in subsets]
    for cells in subsets:  # fill the match cache before forking
        for rank, c in enumerate(cells):
            ev.choices(c, rank)
    ctx = multiprocessing.get_context("fork")
    with ProcessPoolExecutor(jobs, mp_context=ctx, initializer=_worker_init,
                             initargs=(ev, weights)) as pool:
        return list(pool.map(_worker_cost, subsets))


def _unkey(keys, candidates):
    by = {_tiebreak(c): c for c in candidates}
    return [by[k] for k in keys]


# -- reporting ---------------------------------------------------------------


def reduction_pct(original: float, extended: float) -> float:
    if original <= 0:
        return 0.0
    return round(100.0 * (1.0 - extended / original), 2)


def check_constraints(ext: ExtendedLibrary, max_inputs: int, max_gates: int):
    for c in ext.extensions:
        cell = c.cell_type()
        if cell.arity > max_inputs or c.group.max_gates > max_gates:
            raise SelectionError(f"cell {c.name} violates the input or size bound")


def build_report(original: Netlist, ext: ExtendedLibrary, result: Evaluation,
                 name: str = "circuit", functional: bool | None = None) -> dict:
    orig_area = round(original.area(), 4)
    return {
        "circuit": name,
        "area_model": "estimated",
        "original_area": orig_area,
        "extended_area": result.area,
        "reduction_pct": reduction_pct(orig_area, result.area),
        "depth_original": original.depth(),
        "depth_extended": result.depth,
        "gates_original": len(original.gates),
        "gates_extended": result.gates,
        "gate_ratio": round(result.gates / len(original.gates), 4) if original.gates else 0.0,
        "functional_check": functional,
        "cells": [dict(c.to_json(), instances=result.instances.get(c.name, 0))
                  for c in ext.extensions],
    }


REPORT_COLUMNS = ["circuit", "library", "original_area", "extended_area", "reduction_pct",
                  "depth_original", "depth_extended", "gates_original", "gates_extended"]


def report_csv(report: dict) -> str:
    buf = io.StringIO()
    w = csv.writer(buf, lineterminator="\n")
    w.writerow(REPORT_COLUMNS)
    lib = "+".join(c["name"] for c in report["cells"]) or "base"
    w.writerow([report["circuit"], lib] + [report[k] for k in REPORT_COLUMNS[2:]])
    return buf.getvalue()


def emit_results(outdir: str | Path, original: Netlist, ext: ExtendedLibrary, result: Evaluation,
                 name: str = "circuit", check: bool = True, seed: int = 0) -> dict:
    """Write report.json, report.csv, extended_library.json and mapped_netlist.json."""
    out = Path(outdir)
    functional = equivalent(original, result.netlist, seed=seed) if check else None
    if functional is False:
        raise SelectionError("rewritten netlist is not equivalent to the original")
    report = build_report(original, ext, result, name, functional)
    files = {
        "report.json": json.dumps(report, indent=2, sort_keys=True) + "\n",
        "report.csv": report_csv(report),
        "extended_library.json": serialize_library(ext.lib),
        "mapped_netlist.json": serialize_netlist(result.netlist),
    }
    try:
        out.mkdir(parents=True, exist_ok=True)
        for fname, text in files.items():
            (out / fname).write_text(text, encoding="utf-8")
    except OSError as exc:
        raise SelectionError(f"cannot write results to {out}: {exc}") from exc
    return report
