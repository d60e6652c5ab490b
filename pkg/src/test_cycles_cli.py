"""Tests for the cycles command line"""

import json
from fractions import Fraction

import numpy as np
import pytest

from cycles_cli import (
    EXIT_FAIL, EXIT_IO, EXIT_OK, DemoCheck, demo_tolerance, main, parse_col_map, parse_detector_override,
    refined, run_demo,
)
from demo_scenarios import DEMO_NAMES, demo_source
from scenario_dsl import parse_scenario

BROKEN = """scenario "broken" {
  horizon = 3
  agent firm { initial = 1 }
  pool nature { initial = abundant }
  cycle work {
    actor = firm
    va = 1
    ve = 1 from nature
    vl = 1 to ghost
  }
}
"""


@pytest.fixture
def demo_path(tmp_path):
    def write(name):
        path = tmp_path / f"{name}.cyc"
        path.write_text(demo_source(name), encoding="utf-8")
        return path
    return write


# ---------------------------------------------------------------------------
# check
# ---------------------------------------------------------------------------

def test_check_valid_scenario(demo_path, capsys):
    assert main(["check", str(demo_path("bankchain"))]) == EXIT_OK
    out = capsys.readouterr().out
    assert "5 cycles, 5 agents, 2 pools" in out


def test_check_reports_positioned_errors(tmp_path, capsys):
    path = tmp_path / "broken.cyc"
    path.write_text(BROKEN, encoding="utf-8")
    assert main(["check", str(path)]) == EXIT_FAIL
    err = capsys.readouterr().err
    assert f"{path}:9:15: error: unresolved reference 'ghost'" in err


def test_check_missing_file(tmp_path):
    assert main(["check", str(tmp_path / "absent.cyc")]) == EXIT_IO


def test_quiet_check_prints_nothing(demo_path, capsys):
    assert main(["--quiet", "check", str(demo_path("government"))]) == EXIT_OK
    assert capsys.readouterr().out == ""


# ---------------------------------------------------------------------------
# run
# ---------------------------------------------------------------------------

def test_run_savings(demo_path, tmp_path):
    out = tmp_path / "out"
    assert main(["--quiet", "run", str(demo_path("savings")), "--out", str(out)]) == EXIT_OK
    rows = (out / "agent_saver.csv").read_text(encoding="utf-8").splitlines()
    assert rows[0] == "tick,time,stock"
    assert rows[13] == "12,12.000000,990.000000"
    assert json.loads((out / "events.json").read_text(encoding="utf-8")) == []


def test_run_is_byte_identical(demo_path, tmp_path):
    path = demo_path("bankchain")
    for name in ("a", "b"):
        assert main(["--quiet", "run", str(path), "--out", str(tmp_path / name)]) == EXIT_OK
    files = sorted(p.name for p in (tmp_path / "a").iterdir())
    assert files == sorted(p.name for p in (tmp_path / "b").iterdir())
    for name in files:
        assert (tmp_path / "a" / name).read_bytes() == (tmp_path / "b" / name).read_bytes()


def test_run_shale_writes_events(demo_path, tmp_path):
    out = tmp_path / "shale"
    assert main(["--quiet", "run", str(demo_path("shale")), "--out", str(out)]) == EXIT_OK
    events = json.loads((out / "events.json").read_text(encoding="utf-8"))
    assert {e["kind"] for e in events} == {"SubsidyCross", "MaxVG"}
    crossing = next(e for e in events if e["kind"] == "SubsidyCross")
    assert crossing["time"] == pytest.approx(10 / 3, abs=0.01)
    assert {"veg_prime", "vgn_prime", "difference"} <= set(crossing["witness"])


def test_run_detector_override(demo_path, tmp_path):
    out = tmp_path / "shale"
    argv = ["--quiet", "run", str(demo_path("shale")), "--out", str(out), "--detect", "max_vg(credit)"]
    assert main(argv) == EXIT_OK
    events = json.loads((out / "events.json").read_text(encoding="utf-8"))
    assert [e["kind"] for e in events] == ["MaxVG"]


def test_run_rejects_unknown_detector(demo_path, tmp_path, capsys):
    argv = ["run", str(demo_path("shale")), "--out", str(tmp_path), "--detect", "max_value"]
    assert main(argv) == EXIT_FAIL
    assert "unknown detector 'max_value'" in capsys.readouterr().err


def test_run_json_format_and_seed(demo_path, tmp_path):
    out = tmp_path / "json"
    argv = ["--quiet", "run", str(demo_path("savings")), "--out", str(out), "--format", "json", "--seed", "9"]
    assert main(argv) == EXIT_OK
    payload = json.loads((out / "result.json").read_text(encoding="utf-8"))
    assert payload["seed"] == 9
    assert payload["agents"]["saver"][24] == "979.500000"


def test_run_broken_scenario(tmp_path):
    path = tmp_path / "broken.cyc"
    path.write_text(BROKEN, encoding="utf-8")
    assert main(["run", str(path), "--out", str(tmp_path / "out")]) == EXIT_FAIL
    assert not (tmp_path / "out").exists()


def test_parse_detector_override():
    ast = parse_scenario(demo_source("shale"))
    det = parse_detector_override("subsidy_cross(credit, natural)", ast)
    assert (det.name, det.args) == ("subsidy_cross", ("credit", "natural"))
    assert parse_detector_override("subsidy_cross", ast).args == ()
    for bad in ("gov_optimum", "max_vg(ghost)", "subsidy_cross(credit)", "max_vg((x"):
        with pytest.raises(ValueError):
            parse_detector_override(bad, ast)


# ---------------------------------------------------------------------------
# detect
# ---------------------------------------------------------------------------

def write_series_csv(path, dt, columns):
    n = len(next(iter(columns.values())))
    lines = ["tick,time," + ",".join(columns)]
    for k in range(n):
        lines.append(f"{k},{k * float(dt):.6f}," + ",".join(f"{columns[c][k]:.6f}" for c in columns))
    path.write_text("\n".join(lines) + "\n", encoding="utf-8")
    return path


def test_detect_parabola(tmp_path, capsys):
    t = 0.1 * np.arange(101)
    vg = 25 - (t - 5) ** 2
    vl = 2 * t
    path = write_series_csv(tmp_path / "series.csv", "0.1", {"va": vg + vl, "ve": 0 * t, "vl": vl, "vg": vg})
    assert main(["detect", str(path), "--detector", "max_vg"]) == EXIT_OK
    events = json.loads(capsys.readouterr().out)
    assert len(events) == 1
    assert events[0]["kind"] == "MaxVG"
    assert events[0]["tick"] == 50
    assert "consistent" in events[0]["flags"]


def test_detect_monotone_series(tmp_path, capsys):
    t = np.arange(20.0)
    path = write_series_csv(tmp_path / "series.csv", "1", {"va": t, "ve": t, "vl": t, "vg": 2 * t})
    assert main(["detect", str(path), "--detector", "max_vg"]) == EXIT_OK
    assert capsys.readouterr().out == "[]\n"


def test_detect_with_column_map(tmp_path, capsys):
    t = 0.01 * np.arange(701)
    path = write_series_csv(tmp_path / "gov.csv", "0.01", {"taxes": 10 * t - t**2, "trust": 4 * t - t**2})
    argv = ["detect", str(path), "--detector", "gov_optimum", "--col-map", "vgg=taxes,vgc=trust"]
    assert main(argv) == EXIT_OK
    events = json.loads(capsys.readouterr().out)
    assert [e["kind"] for e in events] == ["GovOptimum"]
    assert events[0]["time"] == pytest.approx(3.5, abs=0.01)


def test_detect_engine_flows_with_cumulative(demo_path, tmp_path, capsys):
    out = tmp_path / "shale"
    assert main(["--quiet", "run", str(demo_path("shale")), "--out", str(out)]) == EXIT_OK
    capsys.readouterr()
    assert main(["detect", str(out / "cycle_credit.csv"), "--detector", "max_vg", "--cumulative"]) == EXIT_OK
    events = json.loads(capsys.readouterr().out)
    assert len(events) == 1
    assert events[0]["time"] == pytest.approx(10.0, abs=0.01)


def test_detect_wrong_header(tmp_path, capsys):
    path = tmp_path / "bad.csv"
    path.write_text("t,value\n0,1\n1,2\n", encoding="utf-8")
    assert main(["detect", str(path), "--detector", "max_vg"]) == EXIT_FAIL
    assert "expected columns tick,time,vg,va,vl" in capsys.readouterr().err


def test_detect_unknown_detector(tmp_path):
    path = write_series_csv(tmp_path / "series.csv", "1", {"vg": np.arange(10.0)})
    assert main(["detect", str(path), "--detector", "max_value"]) == EXIT_FAIL


def test_detect_short_series(tmp_path):
    path = write_series_csv(tmp_path / "series.csv", "1", {"va": [1.0, 2.0], "vl": [1.0, 2.0], "vg": [0.0, 0.0]})
    assert main(["detect", str(path), "--detector", "max_vg"]) == EXIT_FAIL


def test_detect_missing_file(tmp_path):
    assert main(["detect", str(tmp_path / "absent.csv"), "--detector", "max_vg"]) == EXIT_IO


def test_parse_col_map():
    assert parse_col_map(["vgg=taxes,vgc=trust", "vl = lost"]) == {"vgg": "taxes", "vgc": "trust", "vl": "lost"}
    assert parse_col_map(None) == {}
    with pytest.raises(ValueError):
        parse_col_map(["vgg"])


def test_bad_col_map_is_usage_error(tmp_path):
    path = write_series_csv(tmp_path / "series.csv", "1", {"vg": np.arange(10.0)})
    assert main(["detect", str(path), "--detector", "max_vg", "--col-map", "vg"]) == EXIT_IO


# ---------------------------------------------------------------------------
# demo
# ---------------------------------------------------------------------------

@pytest.mark.parametrize("name", DEMO_NAMES)
def test_demo_passes(name, tmp_path):
    report = run_demo(name, tmp_path)
    assert report.passed, report.to_dict()
    assert (tmp_path / name / "report.json").exists()
    assert json.loads((tmp_path / name / "report.json").read_text(encoding="utf-8"))["passed"] is True


def test_demo_curves(tmp_path):
    run_demo("savings", tmp_path)
    curve = (tmp_path / "savings" / "savings_curve.csv").read_text(encoding="utf-8").splitlines()
    assert curve[:3] == ["year,balance", "0,1000.000000", "1,990.000000"]
    assert len(curve) == 32
    run_demo("supply_demand", tmp_path)
    gap = (tmp_path / "supply_demand" / "equilibrium_curve.csv").read_text(encoding="utf-8").splitlines()
    assert gap[0] == "q,price_gap"
    assert "15.0,0.0" in gap
    run_demo("lln", tmp_path)
    record = json.loads((tmp_path / "lln" / "lln_experiment.json").read_text(encoding="utf-8"))
    assert record["params"]["n"] == 10_000
    assert abs(record["statistics"]["mean_residual_per_member"]) < 3 * record["statistics"]["expected_sigma"]


def test_demo_command(tmp_path, capsys):
    assert main(["demo", "savings", "--out", str(tmp_path)]) == EXIT_OK
    assert "✅ PASS" in capsys.readouterr().out


def test_unknown_demo():
    assert main(["demo", "nonsense"]) == EXIT_FAIL


def test_refined_scenario():
    ast = parse_scenario(demo_source("savings"))
    fine = refined(ast)
    assert fine.dt == Fraction(1, 2)
    assert fine.horizon == 50
    assert [p.tick for p in fine.policies] == [2, 24, 26]


def test_demo_tolerances():
    ast = parse_scenario(demo_source("shale"))
    assert demo_tolerance("shale", "time", ast) == pytest.approx(0.01)
    assert demo_tolerance("savings", "balance", ast) == 0.0
    assert demo_tolerance("government", "witness", ast, expected=3.0) == pytest.approx(10 * 1e-4 * 3.0)
    assert demo_tolerance("lln", "mean", ast, sigma=0.5) == 1.5


def test_nan_check_never_passes():
    assert not DemoCheck("t*", 3.5, float("nan"), 1.0).passed
    assert DemoCheck("t*", 3.5, 3.6, 0.2).passed
