import csv
import io
import json
import subprocess
import sys

import pytest

from fairsd.cli import main

from conftest import PROBLEMS


def run(capsys, *argv):
    code = main([str(a) for a in argv])
    out, err = capsys.readouterr()
    return code, out, err


def test_solve_five_agents(capsys):
    code, out, _ = run(capsys, "solve", PROBLEMS / "five_agents.yaml")
    report = json.loads(out)
    assert code == 0
    assert report["orders"] == [["2", "1", "3", "4", "5"]]
    assert report["expected_envy"] == {"fraction": "18/5", "decimal": 3.6}
    assert report["scheme"] == "thm1"


@pytest.mark.parametrize("solver", ["exact", "dp", "local"])
def test_solver_choices_agree(capsys, solver):
    code, out, _ = run(capsys, "solve", PROBLEMS / "five_agents.yaml", "--solver", solver)
    assert code == 0
    assert json.loads(out)["orders"][0] == ["2", "1", "3", "4", "5"]


def test_solve_capacities_and_independent(capsys):
    _, out, _ = run(capsys, "solve", PROBLEMS / "schools.yaml")
    report = json.loads(out)
    assert report["scheme"] == "prop3" and report["expected_envy"]["fraction"] == "0/1"
    _, out, _ = run(capsys, "solve", PROBLEMS / "independent.yaml")
    report = json.loads(out)
    assert report["scheme"] == "prop2" and report["envy_scale"]["fraction"] == "1/5"


def test_output_file(capsys, tmp_path):
    target = tmp_path / "out.json"
    code, out, _ = run(capsys, "solve", PROBLEMS / "dominance.yaml", "-o", target)
    assert code == 0 and out == ""
    assert json.loads(target.read_text())["orders"][0][0] == "2"


def test_run_reports_triplets(capsys):
    code, out, _ = run(capsys, "run", PROBLEMS / "dominance.yaml", "--order", "3,1,2", "--ranking", "a,b,c")
    report = json.loads(out)
    assert code == 0
    assert report["matching"] == {"3": "a", "1": "b", "2": "c"}
    # 2 envies both earlier picks with top priority; 1 envies 3 but a ranks 3 above 1
    assert report["envy"]["count"] == 2
    assert {(t["envier"], t["envied"]) for t in report["envy"]["triplets"]} == {("2", "3"), ("2", "1")}
    code, out, _ = run(capsys, "run", PROBLEMS / "dominance.yaml", "--order", "1,2,3",
                       "--profile", PROBLEMS / "profile.yaml")
    assert json.loads(out)["envy"]["count"] == 0


def test_run_needs_a_profile(capsys):
    code, _, err = run(capsys, "run", PROBLEMS / "dominance.yaml", "--order", "1,2,3")
    assert code == 2 and "--profile" in err


def test_evaluate_exact_and_mc(capsys):
    _, out, _ = run(capsys, "evaluate", PROBLEMS / "five_agents.yaml", "--order", "2,1,3,4,5")
    assert json.loads(out)["mean"]["fraction"] == "18/5"
    _, out, _ = run(capsys, "evaluate", PROBLEMS / "five_agents.yaml", "--order", "2,1,3,4,5",
                    "--method", "mc", "--samples", "20000", "--seed", "3")
    report = json.loads(out)
    assert abs(report["mean"]["decimal"] - 3.6) <= 3 * report["standard_error"]
    assert report["samples"] == 20000 and report["seed"] == 3


def test_baselines(capsys):
    code, out, _ = run(capsys, "baselines", PROBLEMS / "five_agents.yaml")
    rows = {r["method"]: r for r in json.loads(out)["baselines"]}
    assert code == 0 and len(rows) == 6
    assert rows["plurality"]["order"] == ["2", "3", "1", "4", "5"]
    best = min(r["expected_envy"]["decimal"] for r in rows.values())
    assert rows["kemeny"]["expected_envy"]["decimal"] == best
    _, out, _ = run(capsys, "baselines", PROBLEMS / "independent.yaml")
    assert all(r["expected_envy"] is None for r in json.loads(out)["baselines"])


def test_weights_csv(capsys):
    code, out, _ = run(capsys, "weights", PROBLEMS / "schools.yaml")
    rows = list(csv.DictReader(io.StringIO(out)))
    assert code == 0 and len(rows) == 12
    first = rows[0]
    assert (first["object"], first["t"], first["t_prime"], first["weight"]) == ("north", "1", "2", "0")
    assert rows[1]["weight"] == "1/2" and float(rows[1]["decimal"]) == 0.5


@pytest.mark.parametrize("argv, code", [
    (["solve", PROBLEMS / "independent.yaml", "--weights", "thm1"], 3),
    (["solve", PROBLEMS / "schools.yaml", "--weights", "prop2"], 3),
    (["solve", PROBLEMS / "independent.yaml", "--solver", "dp"], 3),
    (["solve", "missing.yaml"], 2),
    (["solve"], 2),
    (["verify", "--trials", "0"], 2),
    (["verify", "--max-n", "9"], 2),
    (["evaluate", PROBLEMS / "five_agents.yaml", "--order", "1,2,3"], 2),
    (["evaluate", PROBLEMS / "five_agents.yaml", "--order", "1,2,3,4,5", "--method", "mc"], 2),
    (["evaluate", PROBLEMS / "independent.yaml", "--order", "1,2,3,4,5"], 4),
])
def test_exit_codes(capsys, argv, code):
    got, _, err = run(capsys, *argv)
    assert got == code
    assert err


def test_size_cap_exit_code(capsys, monkeypatch):
    monkeypatch.setenv("FAIRSD_EXACT_CAP", "3")
    code, _, err = run(capsys, "solve", PROBLEMS / "independent.yaml", "--solver", "exact")
    assert code == 4 and "local" in err


def test_verify_is_deterministic_across_workers(capsys):
    _, one, _ = run(capsys, "verify", "--trials", "10", "--seed", "3")
    _, again, _ = run(capsys, "verify", "--trials", "10", "--seed", "3")
    _, four, _ = run(capsys, "verify", "--trials", "10", "--seed", "3", "--workers", "4")
    assert one == again == four
    report = json.loads(one)
    assert report["all_passed"]
    assert [s["suite"] for s in report["suites"]] == [
        "uniform", "marginal", "independent", "capacity", "match_probability", "mc_calibration"]


def test_module_entry_point():
    proc = subprocess.run([sys.executable, "-m", "fairsd", "solve", str(PROBLEMS / "dominance.yaml")],
                          capture_output=True, text=True)
    assert proc.returncode == 0
    assert json.loads(proc.stdout)["orders"][0][0] == "2"


def test_three_agent_examples(capsys, tmp_path):
    dom = PROBLEMS / "dominance.yaml"
    _, out, _ = run(capsys, "solve", dom, "--weights", "thm1", "--solver", "exact")
    assert ["2", "1", "3"] in json.loads(out)["orders"]
    _, out, _ = run(capsys, "run", dom, "--order", "2,1,3", "--ranking", "b,a,c")
    report = json.loads(out)
    assert report["matching"] == {"2": "b", "1": "a", "3": "c"}
    assert report["envy"]["triplets"] == [{"envier": "3", "envied": "1", "object": "a"}]
    _, out, _ = run(capsys, "evaluate", dom, "--order", "2,1,3")
    assert json.loads(out)["mean"]["fraction"] == "1/3"
    _, out, _ = run(capsys, "evaluate", dom, "--order", "2,1,3", "--method", "mc", "--samples", "100000",
                    "--seed", "7")
    report = json.loads(out)
    assert abs(report["mean"]["decimal"] - 1 / 3) <= 3 * report["standard_error"]
    _, out, _ = run(capsys, "baselines", dom)
    kemeny = [r for r in json.loads(out)["baselines"] if r["method"] == "kemeny"][0]
    assert kemeny["order"] == ["2", "1", "3"] and kemeny["expected_envy"]["fraction"] == "1/3"


def test_common_priorities_give_identical_baselines(capsys, tmp_path):
    path = tmp_path / "common.yaml"
    path.write_text(
        "agents: [x, y, z, w]\n"
        "objects: [{name: a}, {name: b}, {name: c}, {name: d}]\n"
        "priorities: {a: [z, x, w, y], b: [z, x, w, y], c: [z, x, w, y], d: [z, x, w, y]}\n"
    )
    _, out, _ = run(capsys, "baselines", path)
    orders = {tuple(r["order"]) for r in json.loads(out)["baselines"]}
    assert orders == {("z", "x", "w", "y")}


def test_known_ranking_run_has_no_envy(capsys):
    # seat, in ranking order, the top remaining agent of each object
    _, out, _ = run(capsys, "run", PROBLEMS / "five_agents.yaml", "--order", "1,5,2,3,4",
                    "--ranking", "a,b,c,d,e")
    assert json.loads(out)["envy"]["count"] == 0
