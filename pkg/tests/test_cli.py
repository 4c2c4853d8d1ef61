import hashlib
import json
import subprocess
import sys
from pathlib import Path

import pytest

from hjequiv import corpus
from hjequiv.cli import main

MODELS = Path(__file__).resolve().parent.parent / "models"


def write(tmp_path, doc, name="model.json"):
    p = tmp_path / name
    p.write_text(json.dumps(doc))
    return p


def run(cmd, model, out, *extra):
    return main([cmd, "--model", str(model), "--out", str(out), *extra])


def report(out):
    return json.loads((out / "report.json").read_text())


def test_shipped_model_files_match_corpus():
    for key, doc in corpus.documents().items():
        assert json.loads((MODELS / f"{key}.json").read_text()) == doc


def test_verify_oscillator(tmp_path):
    assert run("verify", MODELS / "oscillator.json", tmp_path) == 0
    r = report(tmp_path)
    assert r["verdict"] == "equivalent"
    assert r["max_dev"] <= 1e-6
    assert r["integrability"] == {"status": "closed", "closed_at": 0}
    rows = (tmp_path / "trajectory.csv").read_text().splitlines()
    assert rows[0] == "s,tau,t,q,p_q,p_tau,p_t,z"


def test_analyze_reparametrized_free_particle(tmp_path):
    assert run("analyze", MODELS / "reparametrized_free.json", tmp_path) == 0
    a = report(tmp_path)["analysis"]
    assert (a["rank"], a["deficiency"], a["degenerate"]) == (1, 1, ["t"])


def test_constraints_non_affine_exit_2(tmp_path, capsys):
    assert run("constraints", MODELS / "non_affine.json", tmp_path) == 2
    assert "4*v_q^3" in capsys.readouterr().err
    assert not (tmp_path / "report.json").exists()


def test_constraints_secondary(tmp_path):
    assert run("constraints", MODELS / "secondary.json", tmp_path) == 0
    r = report(tmp_path)
    assert r["integrability"]["status"] == "reduced-configuration"
    assert [c["expression"] for c in r["integrability"]["constraints"]] == ["q1"]
    assert "constraint_variations" in r


def test_reparametrize_emits_model_file(tmp_path):
    assert run("reparametrize", MODELS / "oscillator.json", tmp_path) == 0
    ext = json.loads((tmp_path / "model.json").read_text())
    assert ext["coordinates"] == ["q", "t"] and ext["time"] == "tau"
    out2 = tmp_path / "again"
    assert run("analyze", tmp_path / "model.json", out2) == 0
    assert report(out2)["analysis"]["deficiency"] == 1


def test_validation_errors_exit_1(tmp_path, capsys):
    assert run("verify", tmp_path / "missing.json", tmp_path / "o") == 1
    bad = write(tmp_path, {"name": "bad", "coordinates": ["q"], "lagrangian": "0.5*v_q^2 + w"})
    assert run("analyze", bad, tmp_path / "o") == 1
    assert "'w'" in capsys.readouterr().err
    syntax = write(tmp_path, {"name": "bad", "coordinates": ["q"], "lagrangian": "(q"}, "s.json")
    assert run("analyze", syntax, tmp_path / "o") == 1
    assert run("verify", MODELS / "oscillator.json", tmp_path / "o", "--step", "0") == 1
    assert run("field-demo", MODELS / "oscillator.json", tmp_path / "o") == 1


def test_singular_model_verify_exit_2(tmp_path):
    assert run("verify", MODELS / "secondary.json", tmp_path) == 2


def test_numerical_failure_exit_3(tmp_path, capsys):
    doc = {"name": "collapse", "coordinates": ["q"], "lagrangian": "0.5*v_q^2 - ln(q)",
           "initial": {"q": 0.5, "v_q": 0.0}}
    assert run("verify", write(tmp_path, doc), tmp_path / "o", "--horizon", "5") == 3
    assert "integration failed" in capsys.readouterr().err


def test_manifest_hashes(tmp_path):
    assert run("verify", MODELS / "free.json", tmp_path, "--horizon", "1") == 0
    manifest = json.loads((tmp_path / "manifest.json").read_text())
    assert set(manifest["files"]) == {"report.json", "trajectory.csv"}
    for name, digest in manifest["files"].items():
        assert hashlib.sha256((tmp_path / name).read_bytes()).hexdigest() == digest


def test_reports_are_byte_identical(tmp_path):
    for sub in ("a", "b"):
        assert run("verify", MODELS / "coupled.json", tmp_path / sub, "--seed", "3") == 0
    for name in ("report.json", "trajectory.csv", "manifest.json"):
        assert (tmp_path / "a" / name).read_bytes() == (tmp_path / "b" / name).read_bytes()


def test_field_demo(tmp_path):
    assert run("field-demo", MODELS / "phi4_field.json", tmp_path, "--horizon", "0.5") == 0
    r = report(tmp_path)
    assert r["equivalence"]["verdict"] == "equivalent"
    assert r["H0_drift"] <= 1e-7
    assert (tmp_path / "trajectory.csv").read_text().startswith("time,phi_0,")


def test_module_entry_point(tmp_path):
    proc = subprocess.run([sys.executable, "-m", "hjequiv", "analyze", "--model", str(MODELS / "free.json"),
                           "--out", str(tmp_path)], capture_output=True, text=True)
    assert proc.returncode == 0, proc.stderr
    assert (tmp_path / "manifest.json").exists()
