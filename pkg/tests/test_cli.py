import subprocess
import sys

import numpy as np
import pytest

from mracref.cli import EXIT_ASSUMPTION, EXIT_DIVERGED, EXIT_OK, EXIT_PARSE, main
from mracref.design import parse_keyvalue
from mracref.sim import CSV_COLUMNS

from .conftest import SCENARIOS

AIR = str(SCENARIOS / "aircraft_const.scn")


def test_design_prints_certificate(capsys):
    assert main(["design", str(SCENARIOS / "aircraft_tf.scn")]) == EXIT_OK
    out = capsys.readouterr().out
    kv = parse_keyvalue(out)
    assert kv["theta_star"].size == 15
    assert kv["theta_star"][-1] == pytest.approx(0.998522, abs=5e-7)
    assert "# theta* = [" in out
    assert "output matching residual" in out


def test_design_scalar(capsys):
    assert main(["design", str(SCENARIOS / "scalar.scn")]) == EXIT_OK
    kv = parse_keyvalue(capsys.readouterr().out)
    assert kv["k1"].tolist() == [-1.0]
    assert kv["k2"].tolist() == [1.0]


def test_design_non_minimum_phase(capsys):
    assert main(["design", str(SCENARIOS / "nonminphase.scn")]) == EXIT_ASSUMPTION
    assert "(A1)" in capsys.readouterr().err


def test_design_writes_out(tmp_path, capsys):
    out = tmp_path / "cert.txt"
    assert main(["design", AIR, "--out", str(out)]) == EXIT_OK
    assert out.read_text() == capsys.readouterr().out


def test_run_writes_csv(tmp_path, capsys):
    out = tmp_path / "trace.csv"
    assert main(["run", AIR, "--horizon", "5", "--out", str(out)]) == EXIT_OK
    line = capsys.readouterr().out
    assert "tail_rms_e=" in line and "V_violation_max=" in line and "status=ok" in line
    data = np.loadtxt(out, delimiter=",", skiprows=1)
    assert out.read_text().splitlines()[0] == ",".join(CSV_COLUMNS)
    assert data.shape == (501, len(CSV_COLUMNS))          # stride 10 default
    assert data[-1, 0] == pytest.approx(5.0)


def test_run_stride_and_dt(tmp_path, capsys):
    out = tmp_path / "trace.csv"
    assert main(["run", AIR, "--horizon", "1", "--dt", "0.002", "--stride", "1",
                 "--out", str(out)]) == EXIT_OK
    data = np.loadtxt(out, delimiter=",", skiprows=1)
    assert data.shape[0] == 501
    assert np.allclose(np.diff(data[:, 0]), 0.002)


def test_run_scheme_override(tmp_path, capsys):
    out = tmp_path / "trace.csv"
    assert main(["run", AIR, "--scheme", "SFB_XM", "--horizon", "30", "--out", str(out)]) == 0
    assert "status=ok" in capsys.readouterr().out


def test_run_many_with_jobs(tmp_path, capsys):
    files = [str(SCENARIOS / n) for n in ("aircraft_sine1.scn", "scalar.scn")]
    assert main(["run", *files, "--horizon", "2", "--out", str(tmp_path), "--jobs", "2"]) == 0
    assert (tmp_path / "aircraft_sine1.csv").exists()
    assert (tmp_path / "scalar.csv").exists()
    assert capsys.readouterr().out.count("status=ok") == 2


def test_run_parse_error(tmp_path, capsys):
    bad = tmp_path / "bad.scn"
    bad.write_text(open(AIR).read().replace("horizon = 200", "horizn = 200"))
    assert main(["run", str(bad), "--out", str(tmp_path / "x.csv")]) == EXIT_PARSE
    err = capsys.readouterr().err
    assert "horizn" in err and f"{bad}:" in err


def test_run_divergence_flags_partial_csv(tmp_path, capsys):
    text = open(AIR).read().replace("theta0 = scale 1.1", "theta0 = scale -50")
    text = text.replace("gamma = 5\n", "gamma = 5\n").replace("Gamma = 5", "Gamma = 1e-12")
    path = tmp_path / "div.scn"
    path.write_text(text)
    out = tmp_path / "div.csv"
    assert main(["run", str(path), "--scheme", "SFB_XM", "--out", str(out)]) == EXIT_DIVERGED
    assert "status=diverged" in capsys.readouterr().out
    assert out.read_text().splitlines()[-1].startswith("# DIVERGED")


def test_verify_passes(capsys):
    assert main(["verify", AIR, str(SCENARIOS / "scalar.scn")]) == EXIT_OK
    out = capsys.readouterr().out
    assert "FAIL" not in out
    assert "closed-loop tracking" in out and "observer char-poly" in out


def test_verify_flags_tampered_theta(tmp_path, capsys):
    assert main(["design", AIR, "--out", str(tmp_path / "d.kv")]) == EXIT_OK
    lines = (tmp_path / "d.kv").read_text().splitlines()
    for i, l in enumerate(lines):
        if l.startswith("theta_star ="):
            vals = [float(v) for v in l.split("=")[1].split(",")]
            vals[3] *= 1.01
            lines[i] = "theta_star = " + ", ".join(format(float(v), ".17g") for v in vals)
    (tmp_path / "bad.kv").write_text("\n".join(lines))
    capsys.readouterr()
    assert main(["verify", AIR, "--design", str(tmp_path / "bad.kv")]) == EXIT_ASSUMPTION
    out = capsys.readouterr().out
    assert "FAIL  closed-loop tracking" in out


def test_verify_flags_tampered_matching(tmp_path, capsys):
    main(["design", AIR, "--out", str(tmp_path / "d.kv")])
    text = (tmp_path / "d.kv").read_text()
    kv = parse_keyvalue(text)
    t1 = kv["theta1"].copy()
    t1[0] *= 1.01
    text = "\n".join(("theta1 = " + ", ".join(format(float(v), ".17g") for v in t1)) if l.startswith("theta1 =")
                     else l for l in text.splitlines())
    (tmp_path / "bad.kv").write_text(text)
    capsys.readouterr()
    assert main(["verify", AIR, "--design", str(tmp_path / "bad.kv")]) == EXIT_ASSUMPTION
    assert "FAIL  output matching" in capsys.readouterr().out


def test_verify_names_a2(capsys):
    assert main(["verify", str(SCENARIOS / "short_reference.scn")]) == EXIT_ASSUMPTION
    assert "FAIL  (A2) n_m* >= n*" in capsys.readouterr().out


def test_design_round_trip_as_theta0(tmp_path, capsys):
    # the certificate re-ingested as an explicit theta(0) gives the same run
    assert main(["design", AIR, "--out", str(tmp_path / "d.kv")]) == 0
    kv = parse_keyvalue((tmp_path / "d.kv").read_text())
    base = open(AIR).read()
    nominal = base.replace("theta0 = scale 1.1", "theta0 = scale 1").replace(
        "rho0 = scale 1.1", "rho0 = scale 1")
    explicit = base.replace(
        "theta0 = scale 1.1", "theta0 = " + ", ".join(format(float(v), ".17g") for v in kv["theta_star"])).replace(
        "rho0 = scale 1.1", f"rho0 = {float(kv['rho_star'][0]):.17g}")
    (tmp_path / "a.scn").write_text(nominal)
    (tmp_path / "b.scn").write_text(explicit)
    for n in "ab":
        assert main(["run", str(tmp_path / f"{n}.scn"), "--horizon", "10", "--stride", "1",
                     "--out", str(tmp_path / f"{n}.csv")]) == 0
    assert (tmp_path / "a.csv").read_text() == (tmp_path / "b.csv").read_text()


def test_module_entry_point():
    out = subprocess.run([sys.executable, "-m", "mracref", "design", str(SCENARIOS / "scalar.scn")],
                         capture_output=True, text=True)
    assert out.returncode == 0
    assert "k1 = -1" in out.stdout
