import csv
import io
import json
import math

import numpy as np
import pytest

from qpuff.cli import run
from qpuff.core import basis_state, matrix_to_dict
from qpuff.mechanism import depolarize


@pytest.fixture
def files(tmp_path):
    def put(name, obj):
        p = tmp_path / name
        p.write_text(json.dumps(obj))
        return str(p)

    e0, e1 = basis_state(2, 0), basis_state(2, 1)
    fw = {"secrets": [{"name": "a", "members": ["0"]}, {"name": "b", "members": ["1"]}],
          "pairs": [["a", "b"]],
          "ensembles": [{"labels": ["0", "1"], "probs": [0.5, 0.5],
                         "states": {"0": "e0.json", "1": "e1.json"}}]}
    return {
        "a": put("a.json", matrix_to_dict(np.diag([0.75, 0.25]))),
        "b": put("b.json", matrix_to_dict(np.diag([0.5, 0.5]))),
        "e0": put("e0.json", matrix_to_dict(e0)),
        "e1": put("e1.json", matrix_to_dict(e1)),
        "dep": put("dep.json", depolarize(2, 0.5).to_dict()),
        "fw": put("fw.json", fw),
        "pairs": put("pairs.json", [[matrix_to_dict(e0), matrix_to_dict(e1)]]),
        "bad": put("bad.json", {"dim": 2}),
        "dir": tmp_path,
    }


def out_json(capsys):
    return json.loads(capsys.readouterr().out)


def test_divergence_verb(files, capsys):
    assert run(["divergence", "--kind", "dl", "--rho", files["a"], "--sigma", files["b"], "--delta", "0.1"]) == 0
    assert out_json(capsys)["value"] == pytest.approx(0.26236, abs=1e-5)


def test_utility_verb(files, capsys):
    assert run(["utility", "--channel", files["dep"]]) == 0
    assert out_json(capsys)["utility"] == pytest.approx(0.625, abs=1e-6)


def test_check_and_calibrate(files, capsys):
    assert run(["check", "--framework", files["fw"], "--channel", files["dep"], "--eps", str(math.log(3) + 1e-9)]) == 0
    rep = out_json(capsys)
    assert rep["holds"] and rep["min_eps"] == pytest.approx(math.log(3))
    out = str(files["dir"] / "cal.json")
    assert run(["calibrate", "--framework", files["fw"], "--eps", str(math.log(3)), "--out", out]) == 0
    rep = out_json(capsys)
    assert rep["plan"]["p"] == pytest.approx(0.5) and rep["check"]["holds"]
    assert run(["utility", "--channel", out]) == 0
    assert out_json(capsys)["utility"] == pytest.approx(0.625, abs=1e-6)


def test_check_reports_infinite_eps(files, capsys):
    ident = str(files["dir"] / "id.json")
    from qpuff.core import QuantumChannel
    (files["dir"] / "id.json").write_text(json.dumps(QuantumChannel.identity(2).to_dict()))
    assert run(["check", "--framework", files["fw"], "--channel", ident, "--eps", "1"]) == 0
    rep = out_json(capsys)
    assert rep["holds"] is False and rep["min_eps"] == "inf"


def test_compose_verb(capsys):
    assert run(["compose", "--rule", "joint", "--budget", "1,0.01", "--budget", "1,0.01"]) == 0
    res = out_json(capsys)["results"]
    assert res[1]["budget"]["delta"] == pytest.approx(0.01 * (1 + math.e))
    assert run(["compose", "--rule", "adaptive", "--budget", "1,0.01", "--budget", "1,0.02", "--y-size", "4"]) == 0
    assert out_json(capsys)["results"][0]["budget"]["delta"] == pytest.approx(0.06)
    assert run(["compose", "--rule", "convex", "--budget", "1,0.1", "--budget", "2,0.1"]) == 1


def test_frontier_csv(files, capsys):
    assert run(["frontier", "--eps-grid", "0.5,1.0986122886681098", "--K", "1"]) == 0
    rows = list(csv.DictReader(io.StringIO(capsys.readouterr().out)))
    assert float(rows[-1]["gamma"]) == pytest.approx(0.625)
    path = files["dir"] / "f.csv"
    assert run(["frontier", "--eps-grid", "0.1:1:4", "--out", str(path)]) == 0
    assert len(path.read_text().splitlines()) == 1 + 4 * 3


def test_audit_verb(files, capsys):
    args = ["audit", "--channel", files["dep"], "--pairs", files["pairs"], "--eps", str(math.log(3)), "--seed", "4"]
    assert run(args) == 0
    first = out_json(capsys)
    assert run(args) == 0
    assert out_json(capsys) == first
    assert run(args[:-2] + ["--exact"]) == 0
    assert out_json(capsys)["decision"] == "accept-H0"


def test_bounds_verb(capsys):
    assert run(["bounds", "--eps", "0.5", "--chain-delta", "0.1", "--eps-prime", "0.3"]) == 0
    out = out_json(capsys)
    assert out["chain"]["eps_star"] == pytest.approx(4.86522, abs=1e-5)
    assert out["renyi"] == pytest.approx(0.25)


def test_selftest(capsys):
    assert run(["selftest", "--instances", "4"]) == 0
    assert out_json(capsys)["passed"]


def test_exit_codes(files, capsys):
    assert run(["bogus"]) == 2
    assert run(["divergence", "--rho", "missing.json", "--sigma", files["b"]]) == 2
    assert run(["divergence", "--rho", files["bad"], "--sigma", files["b"]]) == 2
    assert run(["divergence", "--rho", files["a"], "--sigma", files["b"], "--delta", "1.5"]) == 1
    assert run(["compose", "--budget", "1"]) == 2


def test_tol_flag_restores_environment(files, capsys, monkeypatch):
    monkeypatch.delenv("QPUFF_SOLVER_TOL", raising=False)
    assert run(["utility", "--channel", files["dep"], "--tol", "1e-7"]) == 0
    import os
    assert "QPUFF_SOLVER_TOL" not in os.environ
