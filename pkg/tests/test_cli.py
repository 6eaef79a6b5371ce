"""CLI: subcommands, exit codes, JSON schema, determinism."""

import json
import io
import contextlib
import os

import pytest

from varcalc.cli import main


def run_cli(*argv):
    buf = io.StringIO()
    with contextlib.redirect_stdout(buf):
        code = main(list(argv))
    return code, buf.getvalue()


def test_el_subcommand():
    code, out = run_cli("el", "maxwell_sourced")
    assert code == 0
    assert "delta(A" in out and "jext" not in out  # source expanded to its value


def test_project_point_particle():
    code, out = run_cli("project", "point_particle")
    assert code == 0
    assert "V(0, 0, 0)" in out and "q0_,00" in out


def test_unknown_flag_rejected():
    code, _ = run_cli("el", "maxwell", "--bogus")
    assert code == 2


def test_missing_theory_file():
    code, _ = run_cli("el", "no_such_theory")
    assert code == 2


def test_malformed_theory_exit_code(tmp_path=None):
    import tempfile, os
    fd, path = tempfile.mkstemp(suffix=".thy")
    os.write(fd, b"")
    os.close(fd)
    code, _ = run_cli("el", path)
    os.unlink(path)
    assert code == 2


def test_verify_all_maxwell():
    code, out = run_cli("verify", "--all", "maxwell")
    assert code == 0
    assert "PASS" in out and "FAIL" not in out


def test_verify_suites_json_deterministic():
    code1, out1 = run_cli("--json", "verify", "--suites", "--cases", "5")
    code2, out2 = run_cli("--json", "verify", "--suites", "--cases", "5")
    assert code1 == code2 == 0
    assert out1 == out2
    doc = json.loads(out1)
    assert doc["schema"] == "varcalc.report.v1"
    assert doc["results"][0]["seed"] == 0


def test_noether_json():
    code, out = run_cli("--json", "noether", "maxwell_sourced")
    assert code == 0
    doc = json.loads(out)
    assert doc["schema"] == "varcalc.report.v1"
    assert doc["results"][0]["noether1"] is True


def test_canonical_and_corner():
    code, out = run_cli("canonical", "scalar_field", "--slice", "t=0")
    assert code == 0 and "Pi_phi" in out
    code2, out2 = run_cli("corner", "yang_mills_su2", "--slice", "t=0",
                          "--corner", "x=0")
    assert code2 == 0 and "PASS" in out2


def test_cme_and_bvbfv():
    code, out = run_cli("cme", "maxwell")
    assert code == 0 and "PASS" in out
    code2, out2 = run_cli("bvbfv", "bf_abelian_4d", "--symmetry", "gaugeA",
                          "--slice", "t=0")
    assert code2 == 0 and out2.count("PASS") == 3


def test_mech_flow_csv(tmp_path):
    dest = tmp_path / "traj.csv"
    code, out = run_cli("mech", "flow", "--system", "kepler",
                        "--t", "0.1", "--dt", "0.01", "--csv", str(dest))
    assert code == 0
    lines = dest.read_text().splitlines()
    assert lines[0].startswith("t,q0")
    assert len(lines) == 12


def test_mech_conserve_json():
    code, out = run_cli("--json", "mech", "conserve", "--system", "kepler",
                        "--t", "1.0", "--dt", "0.001")
    assert code == 0
    doc = json.loads(out)
    assert doc["results"][0]["passed"] is True


def test_mech_reduce():
    code, out = run_cli("mech", "reduce", "--q", "1,0,0", "--p", "0,1,0")
    assert code == 0 and "'r': 1.0" in out


def test_jet_cutoff_env(monkeypatch):
    monkeypatch.setenv("VARCALC_JET_CUTOFF", "3")
    from varcalc.cli import _load_theory
    T = _load_theory("scalar_field")
    assert T.chart.jet_cutoff == 3
