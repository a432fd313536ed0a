import json

import pytest

from cellex.cli import main
from cellex.library import default_library
from cellex.netlist import make_adder, serialize_netlist


@pytest.fixture(scope="module")
def extended(tmp_path_factory):
    out = tmp_path_factory.mktemp("extend")
    assert main(["extend", "--adder", "4", "--out", str(out)]) == 0
    return out


def test_extend_writes_fixed_files(extended):
    names = sorted(p.name for p in extended.iterdir())
    assert names == sorted([
        "candidates.json", "egraph.json", "extended_library.json", "groups.json",
        "mapped_netlist.json", "patterns.json", "report.csv", "report.json",
        "saturation.json", "selected_cells.json"])
    report = json.loads((extended / "report.json").read_text())
    assert report["reduction_pct"] > 0
    assert report["functional_check"] is True
    assert 1 <= len(report["cells"]) <= 5
    assert report["gates_extended"] < report["gates_original"]


def test_report_applies_cells_to_wider_adder(extended, tmp_path):
    cells = extended / "selected_cells.json"
    assert main(["report", "--adder", "12", "--cells", str(cells), "--out", str(tmp_path)]) == 0
    report = json.loads((tmp_path / "report.json").read_text())
    assert report["functional_check"] is True
    assert report["reduction_pct"] > 0
    first = json.loads((extended / "selected_cells.json").read_text())
    assert [c["name"] for c in report["cells"]] == [c["name"] for c in first]


def test_missing_library_exit_code(tmp_path, capsys):
    with pytest.raises(SystemExit) as info:
        main(["extend", "--adder", "2", "--lib", str(tmp_path / "none.json")])
    assert info.value.code == 2
    assert "--lib" in capsys.readouterr().err


def test_netlist_required(capsys):
    with pytest.raises(SystemExit) as info:
        main(["saturate"])
    assert info.value.code == 2


def test_zero_budget(tmp_path):
    assert main(["extend", "--adder", "3", "--max-cells", "0", "--max-size", "2",
                 "--out", str(tmp_path)]) == 0
    report = json.loads((tmp_path / "report.json").read_text())
    assert report["cells"] == [] and report["reduction_pct"] == 0.0


def test_same_seed_same_bytes(tmp_path):
    args = ["extend", "--adder", "4", "--max-size", "3", "--seed", "7"]
    assert main(args + ["--out", str(tmp_path / "a")]) == 0
    assert main(args + ["--out", str(tmp_path / "b")]) == 0
    for name in ("report.json", "report.csv", "patterns.json", "mapped_netlist.json"):
        assert (tmp_path / "a" / name).read_bytes() == (tmp_path / "b" / name).read_bytes()


def test_parallel_selection_matches_serial(tmp_path):
    args = ["extend", "--adder", "4", "--max-size", "3"]
    assert main(args + ["--out", str(tmp_path / "s")]) == 0
    assert main(args + ["--jobs", "2", "--out", str(tmp_path / "p")]) == 0
    assert (tmp_path / "s" / "report.json").read_bytes() == (tmp_path / "p" / "report.json").read_bytes()


def test_config_file(tmp_path):
    cfg = tmp_path / "run.json"
    cfg.write_text(json.dumps({"adder": 3, "max_cells": 0, "max-size": 2}))
    assert main(["extend", "--config", str(cfg), "--out", str(tmp_path / "o")]) == 0
    assert json.loads((tmp_path / "o" / "report.json").read_text())["circuit"] == "adder3"


def test_config_rejects_unknown_key(tmp_path):
    cfg = tmp_path / "run.json"
    cfg.write_text(json.dumps({"adder": 3, "bogus": 1}))
    with pytest.raises(SystemExit) as info:
        main(["saturate", "--config", str(cfg)])
    assert info.value.code == 2


def test_netlist_file_and_stage_outputs(tmp_path):
    path = tmp_path / "add2.json"
    path.write_text(serialize_netlist(make_adder(2, default_library())))
    assert main(["mine", "--netlist", str(path), "--max-size", "2", "--dot",
                 "--out", str(tmp_path / "m")]) == 0
    names = {p.name for p in (tmp_path / "m").iterdir()}
    assert {"egraph.json", "saturation.json", "patterns.json", "groups.json",
            "pattern_graph.dot"} <= names
    sat = json.loads((tmp_path / "m" / "saturation.json").read_text())
    assert sat["stop_reason"] == "saturated"


def test_stage_tagged_failure(tmp_path, capsys):
    bad = tmp_path / "bad.json"
    bad.write_text("{not json")
    assert main(["saturate", "--netlist", str(bad), "--out", str(tmp_path / "o")]) == 1
    assert "[load]" in capsys.readouterr().err
