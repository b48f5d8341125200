import csv
import io
import json
import subprocess
import sys
from pathlib import Path

import jsonschema
import pytest

from blenderlab.cli import SWEEP_COLUMNS, main

SCHEMAS = Path(__file__).resolve().parents[1] / "docs" / "schemas"


def schema(name):
    return json.loads((SCHEMAS / f"{name}.schema.json").read_text())


def run(capsys, *argv):
    code = main(list(argv))
    out, err = capsys.readouterr()
    return code, out, err


def test_certify_default(capsys):
    code, out, _ = run(capsys, "certify", "--default")
    assert code == 0
    doc = json.loads(out)
    jsonschema.validate(doc, schema("certificate"))
    assert doc["status"] == "certified"
    assert out == json.dumps(doc, sort_keys=True, indent=2, ensure_ascii=False) + "\n"


def test_certify_is_deterministic(capsys):
    outs = [run(capsys, "certify", "--default", "--seed", "7")[1] for _ in range(2)]
    assert outs[0] == outs[1]


@pytest.mark.parametrize("argv, code", [
    (["--mu", "0"], 1),
    (["--mu", "0.05"], 2),
    (["--lambda", "2.0"], 2),
    (["--delta", "-1"], 1),
])
def test_certify_exit_codes(capsys, argv, code):
    assert run(capsys, "certify", *argv)[0] == code


def test_tangency_default(capsys):
    code, out, _ = run(capsys, "tangency", "--default")
    assert code == 0
    doc = json.loads(out)
    jsonschema.validate(doc, schema("tangency"))
    assert doc["residual_angle"] < 1e-8 and doc["converged"]


def test_tangency_bad_apex(capsys):
    code, _, err = run(capsys, "tangency", "--default", "--apex", "0.15")
    assert code == 1 and "outside superposition interval" in err


def test_tangency_unconverged(capsys):
    code, out, err = run(capsys, "tangency", "--default", "--n-iter", "3", "--tol", "1e-10")
    assert code == 5 and "unconverged" in err
    assert json.loads(out)["converged"] is False


def test_tangency_requires_certificate(capsys):
    assert run(capsys, "tangency", "--lambda", "2.5")[0] == 4
    assert run(capsys, "tangency", "--lambda", "2.5", "--force")[0] != 4


def test_sweep_outputs(capsys, tmp_path):
    out = tmp_path / "grid.json"
    code, _, _ = run(capsys, "sweep", "--lambdas", "1.2 1.5", "--mu-fractions", "0.5 1.0",
                     "--samples", "20", "--out", str(out))
    assert code == 0
    doc = json.loads(out.read_text())
    jsonschema.validate(doc, schema("sweep"))
    rows = list(csv.DictReader(io.StringIO(out.with_suffix(".csv").read_text())))
    assert list(rows[0]) == SWEEP_COLUMNS
    status = {(float(r["lambda"]), round(float(r["mu"]) / ((float(r["lambda"]) - 1) * 0.125), 6)):
              r["status"] for r in rows}
    assert status[1.2, 0.5] == status[1.5, 0.5] == "certified"
    assert status[1.2, 1.0] == status[1.5, 1.0] == "refuted"


def test_sweep_parallel_matches_serial(capsys):
    args = ["sweep", "--lambdas", "1.3 1.6", "--mu-fractions", "0.4", "--samples", "20"]
    assert run(capsys, *args)[1] == run(capsys, *args, "--jobs", "2")[1]


def test_sweep_empty_grid(capsys):
    assert run(capsys, "sweep", "--lambdas", "")[0] == 1


def test_config_precedence(capsys, tmp_path):
    cfg = tmp_path / "lab.ini"
    cfg.write_text("[model]\nlambda = 1.3\nmu = 0.01\n\n[certify]\nseed = 3\n")
    doc = json.loads(run(capsys, "certify", "--config", str(cfg))[1])
    assert doc["model"]["lambda"] == 1.3 and doc["model"]["mu"] == 0.01
    doc = json.loads(run(capsys, "certify", "--config", str(cfg), "--lambda", "1.4")[1])
    assert doc["model"]["lambda"] == 1.4 and doc["model"]["mu"] == 0.01


def test_full_model_config(capsys, tmp_path):
    from blenderlab.model import default_instance, model_to_text
    cfg = tmp_path / "model.ini"
    cfg.write_text(model_to_text(default_instance().replace(mu=0.015)))
    doc = json.loads(run(capsys, "certify", "--config", str(cfg))[1])
    assert doc["model"]["mu"] == 0.015 and doc["status"] == "certified"


def test_bad_config(capsys, tmp_path):
    cfg = tmp_path / "bad.ini"
    cfg.write_text("this is not an ini file\n")
    assert run(capsys, "certify", "--config", str(cfg))[0] == 1
    assert run(capsys, "certify", "--config", str(tmp_path / "missing.ini"))[0] == 1
    cfg.write_text("[certify]\nseed = many\n")
    assert run(capsys, "certify", "--config", str(cfg))[0] == 1


def test_export_disks(capsys, tmp_path):
    code, out, _ = run(capsys, "export-disks", "--default", "--n", "20")
    assert code == 0
    doc = json.loads(out)
    jsonschema.validate(doc, schema("disks"))
    kinds = {d["kind"] for d in doc["disks"]}
    assert kinds == {"fold", "random"}
    path = tmp_path / "disks.csv"
    assert run(capsys, "export-disks", "--default", "--out", str(path))[0] == 0
    assert path.read_text().startswith("kind,t,position")


def test_robustness_from_file(capsys, tmp_path):
    perts = tmp_path / "p.json"
    perts.write_text(json.dumps([{"kind": "ParamJitter", "dlambda": 1e-5, "dmu": 0.0}]))
    code, out, _ = run(capsys, "robustness", "--default", "--perturbations", str(perts),
                       "--n-iter", "6", "--samples", "30")
    assert code == 0
    doc = json.loads(out)
    jsonschema.validate(doc, schema("robustness"))
    assert doc["summary"]["passed"] == 1


def test_module_entry_point():
    r = subprocess.run([sys.executable, "-m", "blenderlab", "certify", "--default", "--samples", "20"],
                       capture_output=True, text=True)
    assert r.returncode == 0 and json.loads(r.stdout)["status"] == "certified"
