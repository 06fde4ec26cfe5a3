import csv
import json

import numpy as np
import pytest

from cellhom.cli import resolve_config, run
from cellhom.errors import ConfigError
from cellhom.grid import load_grid_function

TRACE = {"n": 2, "m": 32, "operator": {"kind": "trace"}, "A": [[1, 0], [0, 2]], "data": {"f": "sin(2*pi*x1)"}}


def write(tmp_path, cfg, name="cfg.json"):
    path = tmp_path / name
    path.write_text(json.dumps(cfg))
    return str(path)


def invoke(capsys, *argv):
    code = run(list(argv))
    return code, json.loads(capsys.readouterr().out)


def test_cell_solve(tmp_path, capsys):
    vpath = tmp_path / "v.txt"
    code, out = invoke(capsys, "cell-solve", "--config", write(tmp_path, TRACE), "--dump-v", str(vpath))
    assert code == 0
    assert out["schema_version"] == 1
    assert out["config"]["solver"]["tol"] == 1e-10
    assert abs(out["result"]["beta"] - 3.0) < 1e-12
    assert load_grid_function(vpath).grid.m == 32


def test_out_flag(tmp_path, capsys):
    dest = tmp_path / "out.json"
    assert run(["cell-solve", "--config", write(tmp_path, TRACE), "--out", str(dest)]) == 0
    assert capsys.readouterr().out == ""
    assert json.loads(dest.read_text())["command"] == "cell-solve"


def test_non_periodic_data_is_a_validation_error(tmp_path, capsys):
    cfg = dict(TRACE, data={"f": "x1"})
    code, out = invoke(capsys, "cell-solve", "--config", write(tmp_path, cfg))
    assert code == 2 and out["error"] == "NotPeriodic"


@pytest.mark.parametrize("patch", [
    {"colour": 1},
    {"operator": {"kind": "trace", "lam": 2}},
    {"data": {"f": "sin(", "g": 1}},
    {"solver": {"tolerance": 1e-3}},
    {"m": 9},
    {"A": [[1, 0, 0]]},
])
def test_bad_configs_exit_2(tmp_path, capsys, patch):
    code, out = invoke(capsys, "cell-solve", "--config", write(tmp_path, dict(TRACE, **patch)))
    assert code == 2 and "detail" in out


def test_missing_file_exit_2(tmp_path, capsys):
    code, out = invoke(capsys, "cell-solve", "--config", str(tmp_path / "nope.json"))
    assert code == 2


def test_solver_failure_exit_3(tmp_path, capsys):
    cfg = dict(TRACE, operator={"kind": "sigma_k", "k": 2}, A=[[1, 0], [0, -1]])
    code, out = invoke(capsys, "cell-solve", "--config", write(tmp_path, cfg))
    assert code == 3 and out["error"] == "ConeViolation"


def test_effective_op(tmp_path, capsys):
    cfg = dict(TRACE, operator={"kind": "pucci_plus", "lam": 1, "Lam": 2}, m=16,
               matrices=[[[1, 0], [0, 1]], [[2, 0], [0, 1]]])
    code, out = invoke(capsys, "effective-op", "--config", write(tmp_path, cfg))
    assert code == 0
    vals = [row["beta"] for row in out["result"]["values"]]
    assert len(vals) == 2 and vals[1] > vals[0]


def test_props_check_requires_seed(tmp_path):
    with pytest.raises(SystemExit) as info:
        run(["props-check", "--config", write(tmp_path, TRACE)])
    assert info.value.code == 2


def test_props_check_kinds(tmp_path, capsys, monkeypatch):
    monkeypatch.setenv("CELLHOM_THREADS", "2")
    cfg = dict(TRACE, m=16, operator={"kind": "bellman_min", "members": [[[1, 0], [0, 1]], [[2, 0], [0, 0.5]]]})
    path = write(tmp_path, cfg)
    code, out = invoke(capsys, "props-check", "--config", path, "--probes", "3", "--seed", "1", "--kind", "concavity")
    assert code == 0 and out["result"]["all_pass"] and len(out["result"]["probes"]) == 3
    code, out = invoke(capsys, "props-check", "--config", path, "--probes", "3", "--seed", "1", "--kind", "convexity")
    assert code == 2 and out["error"] == "ProbeNotApplicable"
    monkeypatch.setenv("CELLHOM_THREADS", "many")
    code, _ = invoke(capsys, "props-check", "--config", path, "--probes", "1", "--seed", "1")
    assert code == 2


def test_invariant_measure(tmp_path, capsys):
    cfg = dict(TRACE, operator={"kind": "linear", "coefficients": [["1 + 0.5*sin(2*pi*x1)", "0"], ["0", "1"]]},
               A=[[1, 0], [0, 1]])
    mpath = tmp_path / "m.txt"
    code, out = invoke(capsys, "invariant-measure", "--config", write(tmp_path, cfg), "--dump-m", str(mpath))
    assert code == 0
    assert abs(out["result"]["linear_effective"] - (3 - np.sqrt(3) / 2)) < 1e-10
    assert np.mean(load_grid_function(mpath).values) == pytest.approx(1.0)
    code, out = invoke(capsys, "invariant-measure", "--config", write(tmp_path, TRACE))
    assert code == 2


def test_non_periodic_coefficient(tmp_path, capsys):
    cfg = dict(TRACE, operator={"kind": "linear", "coefficients": [["2 + sin(x1)", "0"], ["0", "1"]]})
    code, out = invoke(capsys, "invariant-measure", "--config", write(tmp_path, cfg))
    assert code == 2 and out["error"] == "NotPeriodic"


def test_exterior_solve_csv(tmp_path, capsys):
    cfg = {"n": 3, "m": 8, "operator": {"kind": "trace"}, "exterior": {"R": 64}}
    table = tmp_path / "ext.csv"
    code, out = invoke(capsys, "exterior-solve", "--config", write(tmp_path, cfg), "--csv", str(table))
    assert code == 0
    assert abs(out["result"]["decay"]["exponent"] + 1) < 0.05
    assert out["config"]["exterior"]["points"] == 512
    with open(table) as fh:
        rows = list(csv.reader(fh))
    assert rows[0] == ["r", "U", "U-w", "|U-w-c*|"] and len(rows) == 513


def test_exterior_annular_and_errors(tmp_path, capsys):
    cfg = {"n": 2, "m": 8, "operator": {"kind": "pucci_plus", "lam": 1, "Lam": 1.5},
           "exterior": {"mode": "annular", "R": 16, "points": 64, "n_theta": 16}}
    code, out = invoke(capsys, "exterior-solve", "--config", write(tmp_path, cfg))
    assert code == 0 and out["result"]["report"]["decay_claimed"] is False
    cfg["exterior"] = {"R": 2}
    code, out = invoke(capsys, "exterior-solve", "--config", write(tmp_path, cfg))
    assert code == 2 and out["error"] == "TruncationTooSmall"
    cfg["exterior"] = {"radius": 2}
    code, out = invoke(capsys, "exterior-solve", "--config", write(tmp_path, cfg))
    assert code == 2


def test_liouville_check(tmp_path, capsys):
    cfg = {"n": 2, "m": 16, "operator": {"kind": "trace"}, "A": [[1, 0.5], [0.5, 2]],
           "data": {"f": "3 + sin(2*pi*x1)"}, "liouville": {"b": [0.3, -1], "c": 2}}
    vpath = tmp_path / "v.txt"
    code, out = invoke(capsys, "liouville-check", "--config", write(tmp_path, cfg), "--dump-v", str(vpath))
    assert code == 0
    res = out["result"]
    assert res["solvable"] is True
    assert np.allclose(res["A"], [[1, 0.5], [0.5, 2]], atol=1e-12)
    cfg["liouville"]["periodic"] = "0.1*sin(2*pi*x2)"
    cfg["liouville"]["A"] = [[1, 0], [0, 1]]
    code, out = invoke(capsys, "liouville-check", "--config", write(tmp_path, cfg))
    assert code == 0 and out["result"]["solvable"] is False
    del cfg["liouville"]
    code, out = invoke(capsys, "liouville-check", "--config", write(tmp_path, cfg))
    assert code == 2


def test_resolve_config_defaults():
    cfg = resolve_config({"operator": {"kind": "trace"}})
    assert (cfg["n"], cfg["m"]) == (2, 64)
    assert cfg["data"] == {"f": "0"}
    with pytest.raises(ConfigError):
        resolve_config({"operator": {"kind": "trace"}, "n": 2.5})
    with pytest.raises(ConfigError):
        resolve_config({"m": 8})
