import csv
import io
import json

import numpy as np
import pytest

from flipguard import cli
from flipguard.errors import ValidationError

from instances import DATA

TWO = str(DATA / "two_node.json")


def run_json(capsys, *argv):
    code = cli.run(list(argv))
    out = capsys.readouterr()
    return code, (json.loads(out.out) if code == 0 and out.out.startswith("{") else out)


def test_validate(capsys):
    code, doc = run_json(capsys, "validate", "--scenario", TWO)
    assert code == 0 and doc["result"]["valid"] and doc["result"]["n"] == 2
    assert doc["scenario"]["B"] == pytest.approx(1 / 3)


def test_validate_rejects_unworthy_node(tmp_path, capsys):
    bad = tmp_path / "bad.json"
    bad.write_text(json.dumps({"nodes": [{"r": 1, "w": 1, "c_attack": 1, "c_defend": 0.5},
                                         {"r": 1, "w": 1, "c_attack": 1, "c_defend": 3}], "B": 1, "M": 1}))
    assert cli.run(["validate", "--scenario", str(bad)]) == 1
    assert "node 1" in capsys.readouterr().err


def test_malformed_inputs(tmp_path, capsys):
    broken = tmp_path / "broken.json"
    broken.write_text('{"nodes": [\n  {"r": 1,, }]}')
    assert cli.run(["validate", "--scenario", str(broken)]) == 1
    assert "line 2" in capsys.readouterr().err
    missing = tmp_path / "missing.json"
    missing.write_text(json.dumps({"nodes": [{"r": 1, "w": 1, "c_attack": 1}], "B": 1, "M": 1}))
    assert cli.run(["validate", "--scenario", str(missing)]) == 1
    assert "scenario.nodes[0]" in capsys.readouterr().err
    typo = tmp_path / "typo.json"
    typo.write_text(json.dumps({"nodes": [{"r": "1/0", "w": 1, "c_attack": 1, "c_defend": 0}], "B": 1, "M": 1}))
    assert cli.run(["validate", "--scenario", str(typo)]) == 1
    assert "scenario.nodes[0].r" in capsys.readouterr().err
    assert cli.run(["validate", "--scenario", TWO, "--bogus"]) == 1
    assert cli.run(["frobnicate"]) == 1
    assert cli.run(["validate", "--scenario", str(tmp_path / "nope.json")]) == 1


def test_parse_scenario_fractions():
    inst = cli.parse_scenario({"nodes": [{"r": "3/2", "w": 2, "c_attack": "1/3", "c_defend": 0.1}],
                               "B": "1/4", "M": 1})
    assert inst.nodes[0].r == 1.5 and inst.B == 0.25
    with pytest.raises(ValidationError, match="unknown field"):
        cli.parse_scenario({"nodes": [{"r": 1, "w": 1, "c_attack": 1, "c_defend": 0, "x": 1}], "B": 1, "M": 1})


def test_nash_output(capsys):
    code, doc = run_json(capsys, "nash", "--scenario", TWO)
    assert code == 0
    recs = doc["result"]["records"]
    t2 = [r for r in recs if r["ne_type"] == 2 and np.allclose(r["p"], [0.15, 0.9])]
    assert t2 and np.allclose(t2[0]["m"], [0.16666667, 0.16666667], atol=1e-8)
    fam = [r for r in recs if r["family"] is not None]
    assert fam and fam[0]["family"]["parameter"] == "mu_star"


def test_best_response(capsys):
    code, doc = run_json(capsys, "best-response", "--scenario", TWO, "--player", "defender", "--p", "1,1")
    assert code == 0 and np.allclose(doc["result"]["m"], [1 / 3, 0])
    code, doc = run_json(capsys, "best-response", "--scenario", TWO, "--player", "attacker",
                         "--m", "1/3,0", "--tie-break", "favor_defender")
    assert code == 0 and np.allclose(doc["result"]["p"], [0, 1])
    assert cli.run(["best-response", "--scenario", TWO, "--player", "attacker"]) == 1
    assert cli.run(["best-response", "--scenario", TWO, "--player", "attacker", "--m", "0.1"]) == 1


def test_sequential_and_resource_exit(capsys):
    code, doc = run_json(capsys, "sequential", "--scenario", TWO)
    assert code == 0 and doc["result"]["u_d"] == pytest.approx(-17 / 30, abs=1e-6)
    assert cli.run(["sequential", "--scenario", TWO, "--epsilon", "1e-4", "--strict"]) == 2
    assert "resource limit" in capsys.readouterr().err


def test_internal_error_exit(monkeypatch, capsys):
    def boom(args, inst, block):
        raise AssertionError("invariant broken")
    monkeypatch.setitem(cli.COMMANDS, "validate", boom)
    assert cli.run(["validate", "--scenario", TWO]) == 3


def test_round_trip(tmp_path, capsys):
    first = tmp_path / "first.json"
    second = tmp_path / "second.json"
    args = ["simulate", "--m", "1/6,1/6", "--p", "0.15,0.9", "--horizon", "2e4", "--replications", "4"]
    assert cli.run([*args, "--scenario", TWO, "--out", str(first)]) == 0
    assert cli.run([*args, "--scenario", str(first), "--out", str(second)]) == 0
    a, b = json.loads(first.read_text()), json.loads(second.read_text())
    assert a == b
    for cmd in ("nash", "sequential"):
        out1, out2 = tmp_path / f"{cmd}1.json", tmp_path / f"{cmd}2.json"
        assert cli.run([cmd, "--scenario", TWO, "--out", str(out1)]) == 0
        assert cli.run([cmd, "--scenario", str(out1), "--out", str(out2)]) == 0
        assert json.loads(out1.read_text()) == json.loads(out2.read_text())


def test_sweep_golden(capsys):
    code = cli.run(["sweep", "--scenario", TWO, "--vary", "M", "--from", "0.1", "--to", "0.5",
                    "--points", "5", "--solver", "nash"])
    assert code == 0
    got = capsys.readouterr().out
    assert got == (DATA / "golden_sweep_two_node_M.csv").read_text()
    rows = list(csv.DictReader(io.StringIO(got)))
    assert list(rows[0]) == ["sweep_var", "value", "u_d", "u_a", "m_0", "m_1", "p_0", "p_1"]
    row = rows[1]
    assert float(row["u_d"]) == pytest.approx(-61 / 60, abs=1e-9) and float(row["u_a"]) == pytest.approx(0.3)


def test_sweep_bad_values(capsys):
    # B = 0 is not a valid equilibrium instance: the row is kept with NaNs
    assert cli.run(["sweep", "--scenario", TWO, "--vary", "B", "--from", "0", "--to", "0.2",
                    "--points", "2", "--solver", "nash"]) == 0
    rows = list(csv.DictReader(io.StringIO(capsys.readouterr().out)))
    assert rows[0]["u_d"] == "nan" and float(rows[1]["u_d"]) < 0
    assert cli.run(["sweep", "--scenario", TWO, "--vary", "r_7", "--from", "0", "--to", "1"]) == 1
    assert cli.run(["sweep", "--scenario", TWO, "--vary", "M", "--from", "0", "--to", "1", "--points", "0"]) == 1
