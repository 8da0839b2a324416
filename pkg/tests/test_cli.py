import csv
import json
from importlib import resources
from pathlib import Path

import jsonschema
import numpy as np
import pytest
import yaml

from mqsprep import cli
from mqsprep.config import ConfigError, load_config, parse_config

CONFIGS = Path(__file__).resolve().parents[1] / "configs"


def schema(name):
    return json.loads(resources.files("mqsprep").joinpath("schemas", f"{name}.json").read_text())


def validate(path, name):
    data = json.loads(Path(path).read_text())
    jsonschema.validate(data, schema(name))
    return data


def write_cfg(tmp_path, data):
    p = tmp_path / "run.yaml"
    p.write_text(yaml.safe_dump(data))
    return str(p)


def run(argv, capsys):
    code = cli.main(argv)
    cap = capsys.readouterr()
    return code, cap.out, cap.err


def coeff_file(tmp_path, p, q, d1, d2):
    from mqsprep.approx import FourierSeries2D
    path = tmp_path / "coeffs.json"
    data = {"P": FourierSeries2D(p).to_dict(), "d1": d1, "d2": d2}
    if q is not None:
        data["Q"] = FourierSeries2D(q).to_dict()
    path.write_text(json.dumps(data))
    return str(path)


def cos_sum_pq():
    p = np.zeros((3, 3), complex)
    q = np.zeros((3, 3), complex)
    p[2, 2] = p[0, 0] = 0.5
    q[2, 2], q[0, 0] = 0.5, -0.5
    return p, q


def test_all_schemas_are_valid_documents():
    names = [f.name[:-5] for f in resources.files("mqsprep").joinpath("schemas").iterdir() if f.name.endswith(".json")]
    assert len(names) == 8
    for n in names:
        jsonschema.Draft202012Validator.check_schema(schema(n))


def test_config_validation():
    base = {"problem": {"qubits": [2, 2]}}
    cfg = parse_config(base)
    assert cfg.D == 2 and cfg.target.name == "uniform" and cfg.convention == "one-is-x1"
    bad = [
        {"problem": {"qubits": []}},
        {"problem": {"qubits": [2], "variables": 2}},
        {"problem": {"qubits": [2, 2], "target": {"name": "nope"}}},
        {"problem": {"qubits": [2]}, "estimation": {"epsilon": 2}},
        {"problem": {"qubits": [2]}, "synthesis": {"convention": "other"}},
        {"problem": {"qubits": [2]}, "estimation": {"theta": {"kind": "step"}}},
        {"problem": {"qubits": [15, 15]}},
    ]
    for b in bad:
        with pytest.raises(ConfigError):
            parse_config(b)


def test_out_dir_env_override(tmp_path, monkeypatch):
    cfg = load_config(CONFIGS / "constant.yaml")
    monkeypatch.setenv("MQSPREP_OUT_DIR", str(tmp_path / "env"))
    assert cfg.out_dir() == tmp_path / "env"
    assert cfg.out_dir(str(tmp_path / "flag")) == tmp_path / "flag"


def test_solve_phases_single_variable(tmp_path, capsys):
    code, out, _ = run(["solve-phases", "--config", str(CONFIGS / "gaussian.yaml"), "--out", str(tmp_path)], capsys)
    assert code == 0
    validate(tmp_path / "phases.json", "split_phases")
    rep = validate(tmp_path / "fit_report.json", "fit_report")
    assert rep["reverification"] < 1e-9


def test_solve_phases_bivariate(tmp_path, capsys):
    code, _, _ = run(["solve-phases", "--config", str(CONFIGS / "cos_sum.yaml"), "--out", str(tmp_path)], capsys)
    assert code == 0
    seq = validate(tmp_path / "phases.json", "interleaved_phase_sequence")
    assert seq["degree"] == 2 and sorted(seq["s"]) == [0, 1]
    validate(tmp_path / "fit_report.json", "fit_report")


def test_prepare_bivariate_outputs(tmp_path, capsys):
    code, out, _ = run(["prepare", "--config", str(CONFIGS / "cos_sum.yaml"), "--out", str(tmp_path)], capsys)
    assert code == 0
    plan = validate(tmp_path / "plan.json", "prep_plan")
    assert plan["ancilla_leakage"] < 1e-9
    with (tmp_path / "amplitudes.csv").open() as fh:
        rows = list(csv.DictReader(fh))
    assert len(rows) == 64 and rows[9]["basis"] == "001001"
    amps = np.array([float(r["re"]) + 1j * float(r["im"]) for r in rows])
    i, j = np.divmod(np.arange(64), 8)
    g = np.cos(i / 8 + j / 8)
    assert abs(abs(np.vdot(g / np.linalg.norm(g), amps)) - 1) < 1e-9


def test_prepare_uniform(tmp_path, capsys):
    code, _, _ = run(["prepare", "--config", str(CONFIGS / "constant.yaml"), "--out", str(tmp_path)], capsys)
    assert code == 0
    with (tmp_path / "amplitudes.csv").open() as fh:
        vals = [float(r["re"]) for r in csv.DictReader(fh)]
    assert np.allclose(vals, 0.25)


def test_estimate_var_tvar(tmp_path, capsys):
    cfg = str(CONFIGS / "uniform_risk.yaml")
    code, out, _ = run(["estimate", "--config", cfg, "--out", str(tmp_path)], capsys)
    assert code == 0
    est = validate(tmp_path / "estimate.json", "estimation_result")
    assert abs(est["classical"] - 0.625) < 1e-12 and abs(est["estimate"] - 0.625) <= 0.022
    code, _, _ = run(["var", "--config", cfg, "--out", str(tmp_path)], capsys)
    assert code == 0
    assert validate(tmp_path / "risk_report.json", "risk_report")["var"] == 0.375
    code, out, _ = run(["tvar", "--config", cfg, "--out", str(tmp_path)], capsys)
    assert code == 0
    rep = validate(tmp_path / "risk_report.json", "risk_report")
    assert abs(rep["tvar"] - 7 / 6) <= rep["tvar_components"]["budget"]
    assert json.loads(out)["var"] == 0.375


def test_seed_flag_changes_shots_only(tmp_path, capsys):
    cfg = str(CONFIGS / "uniform_risk.yaml")
    run(["estimate", "--config", cfg, "--out", str(tmp_path / "a"), "--seed", "5"], capsys)
    run(["estimate", "--config", cfg, "--out", str(tmp_path / "b"), "--seed", "5"], capsys)
    a = json.loads((tmp_path / "a" / "estimate.json").read_text())
    b = json.loads((tmp_path / "b" / "estimate.json").read_text())
    assert a == b and a["seed"] == 5


def test_check_mqsp_pass_and_fail(tmp_path, capsys):
    p, q = cos_sum_pq()
    code, out, _ = run(["check-mqsp", coeff_file(tmp_path, p, q, 1, 1), "--out", str(tmp_path)], capsys)
    assert code == 0 and json.loads(out)["pass"]
    validate(tmp_path / "condition_report.json", "condition_report")
    code, _, _ = run(["check-mqsp", coeff_file(tmp_path, 0.9 * p, q, 1, 1), "--out", str(tmp_path)], capsys)
    assert code == 3
    rep = validate(tmp_path / "condition_report.json", "condition_report")
    assert not rep["pass"]


def test_precheck_failure_names_condition(tmp_path, capsys):
    p, _ = cos_sum_pq()
    q = np.zeros((3, 3), complex)
    q[2, 2], q[0, 0], q[2, 0], q[0, 2] = 0.5, -0.5, 0.5, -0.5
    cf = coeff_file(tmp_path, p, q, 1, 1)
    cfg = write_cfg(tmp_path, {"problem": {"qubits": [2, 2], "target": {"name": "coefficients", "file": cf}}})
    code, _, err = run(["solve-phases", "--config", cfg, "--out", str(tmp_path)], capsys)
    assert code == 3 and "precheck-failed:v" in err


def test_synthesis_failure_code(tmp_path, capsys):
    cf = coeff_file(tmp_path, np.array([[0.5]]), None, 0, 0)
    cfg = write_cfg(tmp_path, {"problem": {"qubits": [2, 2], "target": {"name": "coefficients", "file": cf}},
                               "synthesis": {"attempts": 2}})
    code, _, err = run(["solve-phases", "--config", cfg, "--out", str(tmp_path)], capsys)
    assert code == 3 and err.startswith("synthesis-failed")


def test_invalid_input_and_numerical_codes(tmp_path, capsys):
    bad = write_cfg(tmp_path, {"problem": {"qubits": "x"}})
    assert run(["var", "--config", bad], capsys)[0] == 2
    assert run(["var", "--config", str(tmp_path / "missing.yaml")], capsys)[0] == 2
    empty_tail = write_cfg(tmp_path, {"problem": {"qubits": [2, 2]}, "estimation": {"alpha": 0.99},
                                      "output": {"dir": str(tmp_path / "o")}})
    code, _, err = run(["tvar", "--config", empty_tail], capsys)
    assert code == 4 and "numerical breakdown" in err
