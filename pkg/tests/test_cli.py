import csv
import json

import pytest

from sectorcalc import cli


def run(tmp_path, job, *extra):
    p = tmp_path / "job.json"
    p.write_text(json.dumps(job))
    out = tmp_path / "out"
    return cli.main(["--job", str(p), "--out-dir", str(out), *extra]), out


def load(out, name):
    return json.loads((out / f"{name}.json").read_text())


def test_scalar_resolvent_log1p(tmp_path):
    code, out = run(tmp_path, {"command": "scalar-resolvent", "function": "Log1p",
                               "params": {"q": 2, "lambda": [1, 0], "z": [1, 0]}})
    assert code == 0
    res = load(out, "scalar-resolvent")
    assert abs(res["value"][0] - 0.59061) < 1e-5
    with open(out / "scalar-resolvent.csv") as fh:
        rows = list(csv.DictReader(fh))
    assert float(rows[0]["margin"]) > 0


def test_classify_example_g(tmp_path):
    code, out = run(tmp_path, {"command": "classify", "function": {"kind": "ExampleG", "params": {"t": 1.0}}})
    assert code == 0
    res = load(out, "classify")
    assert {"NP+", "CM", "D"} <= set(res["tags"])
    assert len(res["kappa"]) == 3


def test_op_resolvent_matrix_file(tmp_path):
    (tmp_path / "A.json").write_text(json.dumps([[1, 0.3], [0, 4]]))
    code, out = run(tmp_path, {"command": "op-resolvent", "function": "Power(1/2)", "matrix": "A.json",
                               "params": {"n_random": 3}, "output": {"name": "op"}})
    assert code == 0
    res = load(out, "op")
    assert all(r["rel_error_vs_oracle"] < 1e-6 for r in res["results"])


def test_deterministic(tmp_path):
    job = {"command": "op-resolvent", "function": "OneMinusExp", "matrix": [[1, 0.3], [0, 2]],
           "params": {"n_random": 3}}
    outs = []
    for sub in ("a", "b"):
        (tmp_path / sub).mkdir()
        outs.append(run(tmp_path / sub, job)[1])
    a, b = outs
    assert (a / "op-resolvent.json").read_bytes() == (b / "op-resolvent.json").read_bytes()


def test_constants_table(tmp_path):
    code, out = run(tmp_path, {"command": "constants", "function": "Power(1/2)", "matrix": [[1, 0], [0, 4]],
                               "params": {"thetas": [1.5707963267948966], "powers": [{"q": 2, "psi": 0.785}]}})
    assert code == 0
    with open(out / "constants.csv") as fh:
        rows = list(csv.DictReader(fh))
    assert [r["quantity"] for r in rows] == ["sectoriality_of_f(A)", "sectoriality_of_A^q"]
    assert all(float(r["margin"]) >= 0 for r in rows)


@pytest.mark.parametrize("job", [
    {"command": "subordinate", "function": "OneMinusExp", "matrix": [[1, 0.5], [0, 3]]},
    {"command": "semigroup", "function": "OneMinusExp", "matrix": [[1, 0.5], [0, 3]], "params": {"s": [1.0]}},
    {"command": "barycentre", "matrix": [[1, 0], [0, 2]],
     "params": {"measure": {"density": {"kind": "power_exp", "params": {"coef": 1.0, "rate": 1.0}}}}},
    {"command": "ritt", "matrix": [[1, 0], [0, 2]], "params": {"measure": {"atoms": [{"s": 1.0, "w": 1.0}]}}},
])
def test_semigroup_commands(tmp_path, job):
    code, _ = run(tmp_path, job)
    assert code == 0


def test_mismatch_exits_one(tmp_path):
    # a zero tolerance cannot be met by a quadrature value
    code, _ = run(tmp_path, {"command": "scalar-resolvent", "function": "Power(1/2)",
                             "params": {"q": 3, "lambda": [2, 1], "z": [1, 0.5]}}, "--tol", "0")
    assert code == 1


@pytest.mark.parametrize("job,field", [
    ({"command": "nope"}, "job.command"),
    ({"command": "scalar-resolvent", "function": "Log1p", "params": {"q": 2, "lambda": "x", "z": 1}},
     "job.params.lambda"),
    ({"command": "classify", "function": "NotAFunction"}, "job.function"),
    ({"command": "op-resolvent", "function": "Log1p", "matrix": "missing.json"}, "job.matrix"),
    ({"command": "subordinate", "function": "ExampleG(1)", "matrix": [[1]]}, "job.function"),
])
def test_input_errors_exit_two(tmp_path, capsys, job, field):
    code, _ = run(tmp_path, job)
    assert code == 2
    assert field in capsys.readouterr().err


def test_missing_job_file(capsys):
    assert cli.main(["--job", "/nonexistent/job.json"]) == 2


def test_env_overrides_out_dir(tmp_path, monkeypatch):
    target = tmp_path / "env_out"
    monkeypatch.setenv(cli.OUT_DIR_ENV, str(target))
    code, out = run(tmp_path, {"command": "scalar-resolvent", "function": "Log1p",
                               "params": {"q": 2, "lambda": 1, "z": 1}})
    assert code == 0
    assert (target / "scalar-resolvent.json").exists()
    assert not out.exists()


def test_verify_subset(tmp_path, capsys):
    p = tmp_path / "job.json"
    p.write_text(json.dumps({"command": "verify", "params": {"criteria": [2, 4, 7]}}))
    code = cli.main(["--job", str(p), "--out-dir", str(tmp_path)])
    assert code == 0
    res = json.loads((tmp_path / "verify.json").read_text())
    assert [c["number"] for c in res["criteria"]] == [2, 4, 7]
    assert "runtime" not in res["criteria"][0]
