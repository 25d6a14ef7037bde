"""Command-line interface: scenario validation, artifacts, exit codes."""

import json
import os
import shutil
import subprocess
from pathlib import Path

import pytest

from mas.cli import load_scenario, main, word_from_json
from mas.errors import ParseError, SchemaError, SemanticError

SCENARIOS = Path(__file__).resolve().parent.parent / "scenarios"


def _pair_dict():
    return json.loads((SCENARIOS / "pair_line.json").read_text())


def _dump(tmp_path, obj, name="scenario.json"):
    p = tmp_path / name
    p.write_text(json.dumps(obj))
    return str(p)


# --------------------------------------------------------------------------
# scenario loading
# --------------------------------------------------------------------------

def test_shipped_scenarios_load():
    for name in ("pair_line.json", "pair_line_unsat.json",
                 "path3_plane.json"):
        sc = load_scenario(SCENARIOS / name)
        assert sc.agent_count >= 2
        assert sorted(sc.formulas) == list(range(1, sc.agent_count + 1))


def test_structural_problems_are_collected_with_pointer_paths(tmp_path):
    broken = _pair_dict()
    del broken["agents"]
    broken["edges"][0] = [1]
    broken["formulas"] = ["F[0,1] port"]
    broken["regions"][0]["services"] = {"1": []}
    with pytest.raises(SchemaError) as exc:
        load_scenario(_dump(tmp_path, broken))
    msg = str(exc.value)
    for pointer in ("/agents", "/edges/0", "/formulas",
                    "/regions/0/services/1"):
        assert pointer in msg


def test_missing_or_malformed_file_is_a_schema_error(tmp_path):
    with pytest.raises(SchemaError, match="cannot read"):
        load_scenario(tmp_path / "nope.json")
    bad = tmp_path / "bad.json"
    bad.write_text("{")
    with pytest.raises(SchemaError, match="not valid JSON"):
        load_scenario(bad)


def test_overlapping_service_alphabets_are_rejected(tmp_path):
    sc = _pair_dict()
    sc["regions"][1]["services"] = {"2": ["port", "dock"]}
    with pytest.raises(SemanticError, match="assigned to both agent"):
        load_scenario(_dump(tmp_path, sc))


def test_initial_positions_must_lie_in_the_workspace(tmp_path):
    sc = _pair_dict()
    sc["initial_positions"][0] = [99.0]
    with pytest.raises(SemanticError, match="outside the workspace"):
        load_scenario(_dump(tmp_path, sc))


def test_formulas_may_only_use_own_services(tmp_path):
    sc = _pair_dict()
    sc["formulas"]["1"] = "F[0,1] dock"  # dock belongs to agent 2
    with pytest.raises(SemanticError, match="not assigned to it"):
        load_scenario(_dump(tmp_path, sc))


def test_formula_parse_errors_name_the_agent(tmp_path):
    sc = _pair_dict()
    sc["formulas"]["2"] = "F[2,1] dock"
    with pytest.raises(ParseError, match="formula for agent 2"):
        load_scenario(_dump(tmp_path, sc))


def test_parameter_ranges_are_policed(tmp_path):
    sc = _pair_dict()
    sc["parameters"]["safety"] = 1.0
    with pytest.raises(SemanticError, match="safety must exceed 1"):
        load_scenario(_dump(tmp_path, sc))
    sc = _pair_dict()
    sc["parameters"]["lambda"] = 1.0
    with pytest.raises(SemanticError, match=r"strictly in \(0, 1\)"):
        load_scenario(_dump(tmp_path, sc))
    sc = _pair_dict()
    sc["parameters"]["typo"] = 2.0
    with pytest.raises(SchemaError, match="/parameters/typo"):
        load_scenario(_dump(tmp_path, sc))


# --------------------------------------------------------------------------
# subcommands and exit codes
# --------------------------------------------------------------------------

def _pair_path():
    return str(SCENARIOS / "pair_line.json")


def test_bounds_writes_the_report(tmp_path, capsys):
    assert main(["bounds", "--scenario", _pair_path(),
                 "--out", str(tmp_path)]) == 0
    report = json.loads((tmp_path / "report.json").read_text())
    assert report["bounds"]["k2"] == pytest.approx(1.0)
    assert report["bounds"]["r_bar"] == pytest.approx(105.0)
    assert report["bounds"]["hypothesis_satisfied"] is True
    assert report["discretization"]["dt"] == 0.0103
    assert "K2 = 1" in capsys.readouterr().out


def test_abstract_reports_per_agent_systems(tmp_path, capsys):
    assert main(["abstract", "--scenario", _pair_path(),
                 "--out", str(tmp_path)]) == 0
    report = json.loads((tmp_path / "report.json").read_text())
    assert report["abstraction"]["cells"] == 12
    assert [a["initial_cell"] for a in report["abstraction"]["agents"]] \
        == [6, 7]
    assert "12 cells" in capsys.readouterr().out


def test_oversized_workspace_is_refused(tmp_path, capsys):
    sc = _pair_dict()
    sc["v_max"] = 3.0  # M = 3.15 < workspace diameter 4.032
    del sc["parameters"]["cell_diameter"]
    del sc["parameters"]["dt"]
    assert main(["bounds", "--scenario", _dump(tmp_path, sc),
                 "--out", str(tmp_path)]) == 1
    assert "workspace too large" in capsys.readouterr().err


def test_unsound_override_is_refused(tmp_path, capsys):
    sc = _pair_dict()
    sc["parameters"]["r_bar_override"] = 90.0  # below K2 * v_max = 100
    assert main(["synthesize", "--scenario", _dump(tmp_path, sc),
                 "--out", str(tmp_path)]) == 1
    assert "refusing to synthesize" in capsys.readouterr().err


def test_synthesize_writes_identical_plans_on_reruns(tmp_path, capsys):
    out_a, out_b = tmp_path / "a", tmp_path / "b"
    assert main(["synthesize", "--scenario", _pair_path(),
                 "--out", str(out_a)]) == 0
    assert main(["synthesize", "--scenario", _pair_path(),
                 "--out", str(out_b)]) == 0
    plans_a = (out_a / "plans.json").read_bytes()
    assert plans_a == (out_b / "plans.json").read_bytes()
    payload = json.loads(plans_a)
    assert payload["dt"] == 0.0103
    assert payload["step_used"] == 3
    assert [a["agent"] for a in payload["agents"]] == [1, 2]
    assert "plans found" in capsys.readouterr().out


def test_unsatisfiable_scenario_exits_2(tmp_path, capsys):
    assert main(["synthesize",
                 "--scenario", str(SCENARIOS / "pair_line_unsat.json"),
                 "--out", str(tmp_path)]) == 2
    assert "unsatisfiable" in capsys.readouterr().err


def test_exhausted_state_budget_exits_3(tmp_path, capsys):
    assert main(["synthesize", "--scenario", _pair_path(),
                 "--out", str(tmp_path), "--max-states", "10"]) == 3
    assert "budget exceeded" in capsys.readouterr().err


def test_simulate_reuses_plans_and_rejects_stale_ones(tmp_path, capsys):
    out = tmp_path / "run"
    assert main(["synthesize", "--scenario", _pair_path(),
                 "--out", str(out)]) == 0
    assert main(["simulate", "--scenario", _pair_path(),
                 "--out", str(out)]) == 0
    stdout = capsys.readouterr().out
    assert "reusing" in stdout
    assert "all boundary cells match the plan" in stdout
    services = json.loads((out / "services.json").read_text())
    assert any(v["services"] == ["port"] for v in services["1"])
    assert any(v["services"] == ["dock"] for v in services["2"])
    header = (out / "trajectory.csv").read_text().splitlines()[0]
    assert header == "t,agent1_x1,agent2_x1"
    # a plans.json from different discretization parameters is refused
    stale = json.loads((out / "plans.json").read_text())
    stale["dt"] = 999.0
    (out / "plans.json").write_text(json.dumps(stale))
    assert main(["simulate", "--scenario", _pair_path(),
                 "--out", str(out)]) == 1
    assert "re-run synthesize" in capsys.readouterr().err


def test_check_judges_the_synthesized_plan_words(tmp_path, capsys):
    out = tmp_path / "run"
    assert main(["synthesize", "--scenario", _pair_path(),
                 "--out", str(out)]) == 0
    capsys.readouterr()
    assert main(["check", "--scenario", _pair_path(), "--out", str(out),
                 "--agent", "1"]) == 0
    assert "SATISFIED" in capsys.readouterr().out
    assert main(["check", "--scenario", _pair_path(), "--out", str(out),
                 "--agent", "1", "--formula", "G[0,1] port"]) == 2
    assert "VIOLATED" in capsys.readouterr().out
    assert main(["check", "--scenario", _pair_path(), "--out", str(out),
                 "--agent", "5"]) == 1
    assert "out of range" in capsys.readouterr().err


def test_check_reads_word_files_in_both_forms(tmp_path, capsys):
    compact = tmp_path / "compact.json"
    compact.write_text(json.dumps(
        {"dt": 0.5, "prefix": [["port"]], "cycle": [[]]}))
    assert main(["check", "--scenario", _pair_path(),
                 "--out", str(tmp_path), "--agent", "1",
                 "--word", str(compact), "--formula", "F[0,1] port"]) == 0
    explicit = tmp_path / "explicit.json"
    explicit.write_text(json.dumps({
        "prefix": [{"services": [], "time": 0},
                   {"services": ["port"], "time": "3/2"}],
        "cycle": [{"services": [], "duration": "1/2"}],
    }))
    capsys.readouterr()
    assert main(["check", "--scenario", _pair_path(),
                 "--out", str(tmp_path), "--agent", "1",
                 "--word", str(explicit), "--formula", "F[1,2] port"]) == 0
    assert "witnessed at t = 1.5" in capsys.readouterr().out


def test_malformed_word_files_fail_cleanly(tmp_path, capsys):
    bad = tmp_path / "bad.json"
    bad.write_text(json.dumps({"prefix": [], "cycle": []}))
    assert main(["check", "--scenario", _pair_path(),
                 "--out", str(tmp_path), "--agent", "1",
                 "--word", str(bad), "--formula", "F[0,1] port"]) == 1
    assert "malformed timed word" in capsys.readouterr().err
    with pytest.raises(SchemaError):
        word_from_json([1, 2, 3])


def test_check_without_plans_points_at_synthesize(tmp_path, capsys):
    assert main(["check", "--scenario", _pair_path(),
                 "--out", str(tmp_path / "empty"), "--agent", "1"]) == 1
    assert "run synthesize first" in capsys.readouterr().err


def test_console_script_is_installed(tmp_path):
    exe = shutil.which("mas")
    assert exe, "the 'mas' console script should be on PATH"
    proc = subprocess.run(
        [exe, "bounds", "--scenario", _pair_path(), "--out", str(tmp_path)],
        capture_output=True, text=True,
        env={**os.environ, "MAS_LOG": "INFO"})
    assert proc.returncode == 0
    assert "K2" in proc.stdout
