import json
from pathlib import Path

import numpy as np
import pytest

from nesscorr.cli import main


def run(args):
    return main(args)


def test_density_csv(tmp_path):
    rc = run(["density", "--model", "sep", "--alpha", "1", "--N", "8",
              "--rho-", "0.2", "--rho+", "0.8", "--t", "1.0",
              "--out-dir", str(tmp_path)])
    assert rc == 0
    lines = (tmp_path / "density.csv").read_text().strip().splitlines()
    assert lines[0] == "x,value"
    assert len(lines) == 10  # header + sites 0..8
    assert float(lines[1].split(",")[1]) == pytest.approx(0.2)
    assert float(lines[-1].split(",")[1]) == pytest.approx(0.8)


def test_density_stationary_closed_form(tmp_path):
    rc = run(["density", "--model", "sep", "--alpha", "1", "--N", "4",
              "--rho-", "1e-9", "--rho+", "0.9999999", "--stationary",
              "--out-dir", str(tmp_path)])
    assert rc == 0
    vals = [float(l.split(",")[1]) for l in
            (tmp_path / "density.csv").read_text().strip().splitlines()[1:]]
    assert np.allclose(vals, [0, 0.25, 0.5, 0.75, 1.0], atol=1e-6)


def test_malformed_config_exits_2(tmp_path, capsys):
    bad = tmp_path / "bad.json"
    bad.write_text("{not json")
    rc = run(["density", "--config", str(bad), "--out-dir", str(tmp_path)])
    assert rc == 2
    assert "config" in capsys.readouterr().err


def test_unknown_config_key_exits_2(tmp_path, capsys):
    bad = tmp_path / "bad.json"
    bad.write_text(json.dumps({"spec": {"model": "sep", "N": 5, "alpha": 1,
                                        "rho_minus": 0.2, "rho_plus": 0.7},
                               "bogus": 1}))
    rc = run(["density", "--config", str(bad), "--out-dir", str(tmp_path)])
    assert rc == 2
    assert "bogus" in capsys.readouterr().err


def test_occupation_closed_form_report(tmp_path, capsys):
    rc = run(["occupation", "--N", "4", "--c", "1", "--d", "0",
              "--closed-form", "--out-dir", str(tmp_path)])
    assert rc == 0
    out = capsys.readouterr().out
    maxdiff = float(out.splitlines()[0].split("=")[1])
    assert maxdiff <= 1e-12
    header = (tmp_path / "occupation.csv").read_text().splitlines()[0]
    assert header == "x,y,value,closed_form"


def test_occupation_closed_form_outside_validity(tmp_path, capsys):
    rc = run(["occupation", "--model", "sep", "--alpha", "1", "--N", "6",
              "--rho-", "0.2", "--rho+", "0.8", "--lambda-", "0.5",
              "--closed-form", "--out-dir", str(tmp_path)])
    assert rc == 2
    assert "lambda" in capsys.readouterr().err


def test_stationary_gl_unit_diagonal(tmp_path):
    rc = run(["stationary", "--model", "gl", "--N", "16", "--phi-", "0.0",
              "--phi+", "1.0", "--out-dir", str(tmp_path)])
    assert rc == 0
    rows = (tmp_path / "stationary.csv").read_text().strip().splitlines()[1:]
    for row in rows:
        x, y, v = row.split(",")
        if x == y:
            assert float(v) == pytest.approx(1.0, abs=1e-9)
        else:
            assert abs(float(v)) < 1e-9
    meta = json.loads((tmp_path / "stationary.csv.meta.json").read_text())
    assert meta["spec"]["model"] == "gl"
    assert meta["schema_version"] == 1


def test_correlation_triangle_csv(tmp_path):
    rc = run(["correlation", "--model", "sip", "--alpha", "2", "--N", "8",
              "--rho-", "0.2", "--rho+", "0.9", "--t", "0.5",
              "--out-dir", str(tmp_path)])
    assert rc == 0
    lines = (tmp_path / "correlation.csv").read_text().strip().splitlines()
    assert lines[0] == "x,y,value"
    assert len(lines) == 1 + 7 * 8 // 2


def test_verify_duality_report(tmp_path):
    rc = run(["verify", "--suite", "duality", "--model", "sip", "--alpha",
              "1", "--N", "3", "--rho-", "0.2", "--rho+", "0.7", "--cap",
              "5", "--out-dir", str(tmp_path)])
    assert rc == 0
    rep = json.loads((tmp_path / "verify.json").read_text())
    assert rep["passed"] is True
    names = {c["name"] for c in rep["checks"]}
    assert any(n.startswith("duality:") for n in names)
    assert any(n.startswith("operator-duality:") for n in names)
    dual = [c for c in rep["checks"] if c["name"].startswith("duality:")][0]
    assert dual["max_residual"] <= 1e-10


def test_verify_failure_exit_code(tmp_path, monkeypatch):
    import nesscorr.verification as vf

    def fail_check(*a, **k):
        return {"name": "duality:forced", "metric": 1.0, "tolerance": 1e-10,
                "passed": False, "max_residual": 1.0, "tail_bound": 0.0}

    monkeypatch.setattr(vf, "check_duality", fail_check)
    rc = run(["verify", "--suite", "duality", "--model", "sip", "--alpha",
              "1", "--N", "3", "--rho-", "0.2", "--rho+", "0.7",
              "--out-dir", str(tmp_path)])
    assert rc == 1


def test_simulate_equilibrium(tmp_path):
    rc = run(["simulate", "--model", "bep", "--alpha", "1", "--T-", "1",
              "--T+", "1", "--N", "5", "--t", "0.05", "--M", "2000",
              "--dt", "2e-3", "--initial", "2.0", "--no-plot",
              "--out-dir", str(tmp_path)])
    assert rc == 0
    lines = (tmp_path / "simulate.csv").read_text().strip().splitlines()
    assert lines[0] == "kind,x,y,mean,stderr"
    rows = [l.split(",") for l in lines[1:] if l.startswith("x,")]
    for row in rows:
        mean, se = float(row[3]), float(row[4])
        assert abs(mean - 2.0) <= 4 * se


def test_determinism_byte_identical(tmp_path):
    args = ["simulate", "--model", "sep", "--alpha", "1", "--N", "6",
            "--rho-", "0.2", "--rho+", "0.8", "--t", "0.3", "--M", "3000",
            "--seed", "7", "--no-plot"]
    run(args + ["--out-dir", str(tmp_path / "a")])
    run(args + ["--out-dir", str(tmp_path / "b")])
    assert ((tmp_path / "a" / "simulate.csv").read_bytes()
            == (tmp_path / "b" / "simulate.csv").read_bytes())

    vargs = ["verify", "--suite", "duality", "--model", "sip", "--alpha", "1",
             "--N", "3", "--rho-", "0.2", "--rho+", "0.7", "--cap", "4"]
    run(vargs + ["--out-dir", str(tmp_path / "a")])
    run(vargs + ["--out-dir", str(tmp_path / "b")])
    assert ((tmp_path / "a" / "verify.json").read_bytes()
            == (tmp_path / "b" / "verify.json").read_bytes())


def test_decay_study_outputs(tmp_path):
    rc = run(["decay-study", "--model", "sep", "--alpha", "1",
              "--rho-", "0.1", "--rho+", "0.9", "--sizes", "8,16,32",
              "--stationary", "--no-plot", "--out-dir", str(tmp_path)])
    assert rc == 0
    rep = json.loads((tmp_path / "decay.json").read_text())
    assert rep["sizes"] == [8, 16, 32]
    assert -1.2 < rep["slope"] < -0.8
    lines = (tmp_path / "decay.csv").read_text().strip().splitlines()
    assert lines[0] == "N,max_abs"


def test_decay_study_writes_figure(tmp_path):
    rc = run(["decay-study", "--model", "sep", "--alpha", "1",
              "--rho-", "0.1", "--rho+", "0.9", "--sizes", "8,16",
              "--stationary", "--out-dir", str(tmp_path)])
    assert rc == 0
    assert (tmp_path / "decay.csv.png").exists()


def test_usage_error_exit_2(tmp_path, capsys):
    rc = run(["density", "--model", "sep", "--N", "8",
              "--out-dir", str(tmp_path)])
    assert rc == 2
    assert "alpha" in capsys.readouterr().err


def test_simulate_with_config_file(tmp_path):
    cfg = tmp_path / "exp.json"
    cfg.write_text(json.dumps({
        "spec": {"model": "sip", "N": 5, "alpha": 1, "rho_minus": 0.3,
                 "rho_plus": 0.8},
        "initial": {"family": "negative-binomial", "profile": "stationary"},
        "t": 0.2, "M": 2000, "seed": 3,
    }))
    rc = run(["simulate", "--config", str(cfg), "--no-plot",
              "--out-dir", str(tmp_path)])
    assert rc == 0
    assert (tmp_path / "simulate.csv").exists()


def test_verify_closure_suite(tmp_path):
    rc = run(["verify", "--suite", "closure", "--model", "sep", "--alpha",
              "1", "--N", "4", "--rho-", "0.2", "--rho+", "0.7",
              "--out-dir", str(tmp_path)])
    assert rc == 0
    rep = json.loads((tmp_path / "verify.json").read_text())
    assert rep["checks"][0]["metric"] <= 1e-8
