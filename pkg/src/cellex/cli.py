"""Command-line front end: ``cellex {saturate,mine,extend,report}``."""

from __future__ import annotations

import argparse
import json
import logging
import os
import sys
import time
from contextlib import contextmanager
from dataclasses import dataclass, field
from pathlib import Path

from .boolfn import group_by_function
from .egraph import EGraph, build_egraph
from .graphify import PatternGraph, egraph_to_graph, fold_symmetric, to_dot, vertex_count_report
from .library import CellLibrary, default_library, load_library
from .miner import MiningParams, PatternGroupRaw, code_from_json, code_labels, code_to_json, mine
from .netlist import Netlist, load_netlist, make_adder
from .rewrite import SaturationLimits, default_rules, load_rules, saturate
from .selector import (
    CandidateCell,
    Evaluator,
    ExtendedLibrary,
    QoRWeights,
    check_constraints,
    emit_results,
    make_candidates,
    select_cells,
    unchanged,
)

log = logging.getLogger("cellex")


class StageError(RuntimeError):
    def __init__(self, stage: str, exc: Exception):
        super().__init__(f"[{stage}] {exc}")
        self.stage = stage


@dataclass
class RunConfig:
    netlist: Path | None = None
    adder: int | None = None
    lib: Path | None = None
    rules: Path | None = None
    cells: Path | None = None
    out: Path = Path("cellex_out")
    mining: MiningParams = field(default_factory=MiningParams)
    limits: SaturationLimits | None = None
    max_cells: int = 5
    weights: QoRWeights = field(default_factory=QoRWeights)
    seed: int = 0
    exhaustive: bool = False
    dot: bool = False
    jobs: int = 1


@contextmanager
def stage(name: str, timings: dict):
    t0 = time.perf_counter()
    try:
        yield
    except StageError:
        raise
    except Exception as exc:
        raise StageError(name, exc) from exc
    timings[name] = time.perf_counter() - t0
    log.info("stage %s: %.2fs", name, timings[name])


def _write(out: Path, name: str, text: str):
    out.mkdir(parents=True, exist_ok=True)
    (out / name).write_text(text, encoding="utf-8")


def _dumps(doc) -> str:
    return json.dumps(doc, indent=1, sort_keys=True) + "\n"


def load_inputs(cfg: RunConfig, timings: dict) -> tuple[CellLibrary, Netlist, list]:
    with stage("load", timings):
        lib = load_library(cfg.lib) if cfg.lib else default_library()
        if cfg.adder is not None:
            nl = make_adder(cfg.adder, lib)
        else:
            nl = load_netlist(cfg.netlist, lib)
        rules = load_rules(cfg.rules, lib) if cfg.rules else default_rules(lib)
    return lib, nl, rules


def run_saturation(cfg: RunConfig, lib, nl, rules, timings) -> EGraph:
    with stage("saturate", timings):
        g = build_egraph(nl)
        report = saturate(g, rules, cfg.limits)
        _write(cfg.out, "saturation.json", report.dumps())
        _write(cfg.out, "egraph.json", _dumps(g.to_json()))
        log.info("saturation: %s, %d e-nodes for %d gates", report.stop_reason,
                 report.enodes, len(nl.gates))
    return g


def run_graphify(cfg: RunConfig, g: EGraph, lib, timings) -> PatternGraph:
    with stage("graphify", timings):
        full = egraph_to_graph(g, lib)
        pg = fold_symmetric(full, lib)
        if cfg.dot:
            _write(cfg.out, "pattern_graph.dot", to_dot(full))
        log.info("pattern graph: %s", vertex_count_report(pg))
    return pg


def run_mining(cfg: RunConfig, pg: PatternGraph, lib, timings):
    with stage("mine", timings):
        result = mine(pg, cfg.mining)
        if result.truncated:
            log.warning("mining stopped at %d patterns", cfg.mining.max_patterns)
        _write(cfg.out, "patterns.json", result.dumps())
    with stage("group", timings):
        groups = group_by_function(result, lib)
        _write(cfg.out, "groups.json", _dumps([grp.to_json() for grp in groups]))
    return result, groups


def cells_doc(cells: list[CandidateCell]) -> list[dict]:
    return [dict(c.to_json(), codes=[code_to_json(m.pattern.code) for m in c.group.members])
            for c in cells]


def cells_from_doc(doc: list[dict], lib: CellLibrary) -> list[CandidateCell]:
    out = []
    for entry in doc:
        pats = []
        for rows in entry["codes"]:
            code = code_from_json(rows)
            gates = sum(1 for lab in code_labels(code) if lab != "*")
            pats.append(PatternGroupRaw(code, [], 0, gates))
        groups = group_by_function(pats, lib)
        if len(groups) != 1:
            raise ValueError(f"cell {entry['name']}: patterns do not share one function")
        out.append(CandidateCell(entry["name"], groups[0], float(entry["est_area"]),
                                 int(entry["transistors"]), int(entry["support"])))
    return out


def circuit_name(cfg: RunConfig) -> str:
    if cfg.adder is not None:
        return f"adder{cfg.adder}"
    return Path(cfg.netlist).stem


def cmd_saturate(cfg: RunConfig) -> int:
    timings: dict = {}
    lib, nl, rules = load_inputs(cfg, timings)
    run_saturation(cfg, lib, nl, rules, timings)
    return 0


def cmd_mine(cfg: RunConfig) -> int:
    timings: dict = {}
    lib, nl, rules = load_inputs(cfg, timings)
    g = run_saturation(cfg, lib, nl, rules, timings)
    pg = run_graphify(cfg, g, lib, timings)
    run_mining(cfg, pg, lib, timings)
    return 0


def cmd_extend(cfg: RunConfig) -> int:
    timings: dict = {}
    lib, nl, rules = load_inputs(cfg, timings)
    g = run_saturation(cfg, lib, nl, rules, timings)
    pg = run_graphify(cfg, g, lib, timings)
    _, groups = run_mining(cfg, pg, lib, timings)
    with stage("select", timings):
        cands = make_candidates(groups, lib, cfg.mining.max_inputs, cfg.mining.max_gates)
        _write(cfg.out, "candidates.json", _dumps([c.to_json() for c in cands]))
        selected = select_cells(cands, cfg.max_cells, g, pg, lib, cfg.weights,
                                exhaustive=cfg.exhaustive, jobs=cfg.jobs)
    report = finish_report(cfg, nl, selected, timings)
    print(f"{report['circuit']}: area {report['original_area']} -> {report['extended_area']} "
          f"({report['reduction_pct']:.2f}% reduction), "
          f"{len(report['cells'])} new cell(s), results in {cfg.out}")
    return 0


def cmd_report(cfg: RunConfig) -> int:
    """Apply previously selected cells to a (possibly different) netlist."""
    timings: dict = {}
    lib, nl, rules = load_inputs(cfg, timings)
    with stage("load", timings):
        cells = cells_from_doc(json.loads(Path(cfg.cells).read_text(encoding="utf-8")), lib)
    g = run_saturation(cfg, lib, nl, rules, timings)
    pg = run_graphify(cfg, g, lib, timings)
    with stage("evaluate", timings):
        ext = ExtendedLibrary(lib, cells)
        result = Evaluator(g, pg, lib).evaluate(cells)
    report = finish_report(cfg, nl, (ext, result), timings)
    print(f"{report['circuit']}: area {report['original_area']} -> {report['extended_area']} "
          f"({report['reduction_pct']:.2f}% reduction), gate ratio {report['gate_ratio']}")
    return 0


def finish_report(cfg: RunConfig, nl: Netlist, selected, timings) -> dict:
    ext, result = selected
    with stage("emit", timings):
        if not ext.extensions:
            result = unchanged(nl)
        check_constraints(ext, cfg.mining.max_inputs, cfg.mining.max_gates)
        report = emit_results(cfg.out, nl, ext, result, name=circuit_name(cfg), seed=cfg.seed)
        _write(cfg.out, "selected_cells.json", _dumps(cells_doc(ext.extensions)))
    return report


COMMANDS = {"saturate": cmd_saturate, "mine": cmd_mine, "extend": cmd_extend, "report": cmd_report}


def build_parser() -> argparse.ArgumentParser:
    p = argparse.ArgumentParser(prog="cellex", description=(
        "Propose new standard cells for a mapped netlist by equality saturation and "
        "frequent subcircuit mining."))
    sub = p.add_subparsers(dest="command", required=True)
    helps = {
        "saturate": "build and saturate the e-graph",
        "mine": "saturate, then mine frequent subcircuits and group them by function",
        "extend": "full flow: mine, select up to --max-cells new cells, emit results",
        "report": "apply cells from a selected_cells.json to a netlist",
    }
    for name, text in helps.items():
        s = sub.add_parser(name, help=text)
        s.add_argument("--config", type=Path, help="JSON file with default values for any flag")
        src = s.add_mutually_exclusive_group()
        src.add_argument("--netlist", type=Path, help="mapped netlist JSON")
        src.add_argument("--adder", type=int, metavar="WIDTH", help="use the built-in ripple adder")
        s.add_argument("--lib", type=Path, help="cell library JSON (default: bundled)")
        s.add_argument("--rules", type=Path, help="rewrite rules file (default: bundled)")
        s.add_argument("--out", type=Path, default=Path("cellex_out"), help="output directory")
        s.add_argument("--max-enodes", type=int, help="saturation e-node cap (default 10x gates)")
        s.add_argument("--max-iterations", type=int, default=16)
        s.add_argument("--seed", type=int, default=0, help="seed for random simulation vectors")
        s.add_argument("--dot", action="store_true", help="also write pattern_graph.dot")
        if name in ("mine", "extend", "report"):
            s.add_argument("--min-support", type=int, default=4)
            s.add_argument("--max-size", type=int, default=5, help="gates per pattern (N)")
            s.add_argument("--max-inputs", type=int, default=3, help="inputs per pattern (K)")
            s.add_argument("--max-patterns", type=int, default=10000)
        if name == "extend":
            s.add_argument("--max-cells", type=int, default=5, help="new cell budget (T)")
            s.add_argument("--exhaustive", action="store_true",
                           help="search all cell subsets instead of greedy selection")
            s.add_argument("--jobs", type=int, default=1, help="worker processes for selection")
            s.add_argument("--delay-exp", type=float, default=0.0)
            s.add_argument("--area-exp", type=float, default=1.0)
        if name == "report":
            s.add_argument("--cells", type=Path, required=True, help="selected_cells.json")
    return p


def _apply_config(parser: argparse.ArgumentParser, argv):
    """Parse twice so a --config file supplies defaults and explicit flags still win."""
    args = parser.parse_args(argv)
    if not args.config:
        return args
    try:
        doc = json.loads(Path(args.config).read_text(encoding="utf-8"))
    except (OSError, json.JSONDecodeError) as exc:
        parser.error(f"--config: cannot read {args.config}: {exc}")
    if not isinstance(doc, dict):
        parser.error("--config: expected a JSON object")
    sub = parser._subparsers._group_actions[0].choices[args.command]
    known = {a.dest for a in sub._actions}
    bad = sorted(k for k in (key.replace("-", "_") for key in doc) if k not in known)
    if bad:
        parser.error(f"--config: unknown keys {', '.join(bad)}")
    sub.set_defaults(**{k.replace("-", "_"): v for k, v in doc.items()})
    return parser.parse_args(argv)


def config_from_args(parser, args) -> RunConfig:
    for flag in ("netlist", "lib", "rules", "cells"):
        path = getattr(args, flag, None)
        if path is not None and not Path(path).is_file():
            parser.error(f"--{flag}: no such file: {path}")
    if args.netlist is None and args.adder is None:
        parser.error("one of --netlist or --adder is required")
    if args.adder is not None and args.adder < 1:
        parser.error("--adder: width must be positive")
    try:
        mining = MiningParams(getattr(args, "min_support", 4), getattr(args, "max_size", 5),
                              getattr(args, "max_inputs", 3), getattr(args, "max_patterns", 10000))
        limits = None
        if args.max_enodes is not None or args.max_iterations != 16:
            limits = SaturationLimits(max_iterations=args.max_iterations,
                                      max_enodes=args.max_enodes or 10_000_000)
        weights = QoRWeights(delay=getattr(args, "delay_exp", 0.0),
                             area=getattr(args, "area_exp", 1.0))
    except ValueError as exc:
        parser.error(str(exc))
    max_cells = getattr(args, "max_cells", 5)
    if max_cells < 0:
        parser.error("--max-cells: must be nonnegative")
    jobs = getattr(args, "jobs", 1)
    if jobs < 1:
        parser.error("--jobs: must be positive")
    return RunConfig(
        netlist=args.netlist, adder=args.adder, lib=args.lib, rules=args.rules,
        cells=getattr(args, "cells", None), out=args.out, mining=mining, limits=limits,
        max_cells=max_cells, weights=weights, seed=args.seed,
        exhaustive=getattr(args, "exhaustive", False), dot=args.dot, jobs=jobs,
    )


def main(argv=None) -> int:
    level = os.environ.get("CELLE_LOG", "WARNING").upper()
    logging.basicConfig(level=getattr(logging, level, logging.WARNING),
                        format="%(levelname)s %(name)s: %(message)s", stream=sys.stderr)
    parser = build_parser()
    args = _apply_config(parser, argv)
    cfg = config_from_args(parser, args)
    try:
        return COMMANDS[args.command](cfg)
    except StageError as exc:
        print(f"cellex: error: {exc}", file=sys.stderr)
        return 1


if __name__ == "__main__":
    sys.exit(main())
