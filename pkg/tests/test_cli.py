from __future__ import annotations

import csv
import json
import subprocess
import sys

import pytest

from conftest import FIXTURES, LAB
from coroute.cli import METRICS_FIELDS, main
from coroute.pipeline import ComparisonReport


def rows(path):
    with open(path, newline="") as f:
        return list(csv.reader(f))


def test_plan_t1(tmp_path):
    assert main(["plan", str(FIXTURES / "T1.json"), "--out", str(tmp_path)]) == 0
    doc = json.loads((tmp_path / "plan.json").read_text())
    assert len(doc["plans"]) == 1
    table = rows(tmp_path / "metrics.csv")
    assert tuple(table[0]) == METRICS_FIELDS and len(table) == 2
    geo = json.loads((tmp_path / "routes.geojson").read_text())
    kinds = {f["properties"]["kind"] for f in geo["features"]}
    assert {"uav_sortie", "refuel_stop", "recharge", "mission_point"} <= kinds
    assert "planar" in geo["properties"]["crs"]


def test_validate_t3(tmp_path):
    assert main(["plan", str(FIXTURES / "T3.json"), "--out", str(tmp_path)]) == 0
    assert main(["validate", str(tmp_path / "plan.json"), "--out", str(tmp_path)]) == 0
    report = json.loads((tmp_path / "report.json").read_text())
    assert report["ok"] is True
    trace = rows(tmp_path / "trace.csv")
    assert trace[0] == ["time", "vehicle", "x", "y", "fuel", "task"] and len(trace) > 10


def test_validate_with_explicit_scenario(tmp_path):
    assert main(["plan", str(FIXTURES / "T3.json"), "--out", str(tmp_path)]) == 0
    code = main(["validate", str(tmp_path / "plan.json"), "--scenario", str(FIXTURES / "T3.json"), "--out", str(tmp_path)])
    assert code == 0


def test_validate_tampered_plan_fails(tmp_path):
    assert main(["plan", str(FIXTURES / "T3.json"), "--out", str(tmp_path)]) == 0
    doc = json.loads((tmp_path / "plan.json").read_text())
    for leg in doc["plans"][0]["ugv_route"]["legs"]:
        leg["depart"] += 10.0
        leg["arrive"] += 10.0
    (tmp_path / "bad.json").write_text(json.dumps(doc))
    assert main(["validate", str(tmp_path / "bad.json"), "--out", str(tmp_path)]) == 1
    assert json.loads((tmp_path / "report.json").read_text())["ok"] is False


def test_compare(tmp_path):
    assert main(["plan", str(LAB), "--out", str(tmp_path)]) == 0
    assert main(["compare", str(tmp_path / "plan.json"), "--out", str(tmp_path)]) == 0
    table = rows(tmp_path / "comparison.csv")
    assert tuple(table[0]) == ComparisonReport.FIELDS
    head = table[0]
    for r in table[1:]:
        rec = dict(zip(head, r))
        base, t = float(rec["baseline_time_s"]), float(rec["total_time_s"])
        assert float(rec["time_improvement_pct"]) == pytest.approx(100 * (base - t) / base, abs=0.006)


def test_plan_is_byte_identical(tmp_path):
    a, b = tmp_path / "a", tmp_path / "b"
    for out in (a, b):
        assert main(["plan", str(LAB), "--seed", "4", "--out", str(out)]) == 0
    for name in ("plan.json", "metrics.csv", "routes.geojson"):
        assert (a / name).read_bytes() == (b / name).read_bytes()


def test_gen(tmp_path):
    assert main(["gen", "--seed", "7", "--points", "12", "--area", "4", "--grid", "3", "--out", str(tmp_path)]) == 0
    doc = json.loads((tmp_path / "scenario.json").read_text())
    assert len(doc["mission_points"]) == 12
    assert main(["gen", "--seed", "7", "--out", str(tmp_path / "x.json")]) == 0
    assert (tmp_path / "x.json").read_text() == (tmp_path / "scenario.json").read_text()


@pytest.mark.parametrize(
    "argv",
    [
        [],
        ["fly"],
        ["plan"],
        ["plan", "missing.json"],
        ["plan", str(FIXTURES / "T1.json"), "--outer", "random"],
        ["plan", str(FIXTURES / "T1.json"), "--time-limit", "0"],
        ["validate", "missing.json"],
        ["validate", str(FIXTURES / "T1.json"), "--dt", "-1"],
        ["gen", "--points", "0"],
    ],
)
def test_usage_errors(argv, tmp_path, capsys):
    assert main(argv + ["--out", str(tmp_path)] if argv and argv[0] in ("plan", "validate", "gen") else argv) == 2
    assert capsys.readouterr().err


def test_invalid_scenario_exit_1(tmp_path, capsys):
    doc = json.loads((FIXTURES / "T3.json").read_text())
    doc["mission_points"].append({"id": 3, "x": 100.0, "y": 100.0})
    (tmp_path / "s.json").write_text(json.dumps(doc))
    assert main(["plan", str(tmp_path / "s.json"), "--out", str(tmp_path)]) == 1
    assert "uncovered mission point 3" in capsys.readouterr().err


def test_module_entry_point(tmp_path):
    res = subprocess.run(
        [sys.executable, "-m", "coroute", "plan", str(FIXTURES / "T1.json"), "--out", str(tmp_path)],
        capture_output=True,
        text=True,
    )
    assert res.returncode == 0, res.stderr
    assert (tmp_path / "plan.json").exists()


def test_profile_override(tmp_path):
    assert main(["plan", str(FIXTURES / "T3.json"), "--profile", "lab", "--out", str(tmp_path)]) == 0
    doc = json.loads((tmp_path / "plan.json").read_text())
    assert doc["scenario"]["uav"]["speed_mps"] == 0.2


@pytest.mark.parametrize("seed", range(100))
def test_gen_plan_validate_round_trip(seed, tmp_path):
    scen = tmp_path / "s.json"
    assert main(["gen", "--seed", str(seed), "--out", str(scen)]) == 0
    assert main(["plan", str(scen), "--seed", str(seed), "--out", str(tmp_path)]) == 0
    assert main(["validate", str(tmp_path / "plan.json"), "--out", str(tmp_path)]) == 0
