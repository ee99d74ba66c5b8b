import json

import numpy as np
import pytest

from chnsdbc import io as cio
from chnsdbc.cli import build_parser, main

SMALL = """
[domain]
Lx = 4.0
Ly = 2.0
Nx = 16
Ny = 8

[params]
nu = 0.7
beta = 1.5
h = cellular:0.5:1:1

[scheme]
dt = 0.01

[run]
T = 0.2
snapshot_cadence = 5
seed = 3
init_amp_u = 0.3
init_amp_phi = 0.3

[diagnostics]
perturbation = 1e-6
gronwall_C = 1.0
"""


@pytest.fixture
def cfg_path(tmp_path):
    p = tmp_path / "small.ini"
    p.write_text(SMALL)
    return p


def test_run_writes_outputs(tmp_path, cfg_path):
    out = tmp_path / "out"
    assert main(["run", "-c", str(cfg_path), "-o", str(out)]) == 0
    data, cfg = cio.read_manifest(out / "manifest.json")
    assert data["complete"] and data["steps"] == 20
    assert cio.snapshot_indices(out) == [0, 5, 10, 15, 20]
    ledger = cio.read_energy_csv(out / "energy.csv")
    assert len(ledger) == 20 and ledger[-1].t == pytest.approx(0.2)


def test_resume_is_bitwise(tmp_path, cfg_path):
    full, part = tmp_path / "full", tmp_path / "part"
    assert main(["run", "-c", str(cfg_path), "-o", str(full)]) == 0
    assert main(["run", "-c", str(cfg_path), "-o", str(part)]) == 0
    # simulate an interruption after snapshot 10
    for p in (part / "snapshots").glob("*"):
        if int(p.name.split("_")[0]) > 10:
            p.unlink()
    assert main(["run", "--resume", str(part / "manifest.json")]) == 0
    grid = cio.read_manifest(full / "manifest.json")[1].grid()
    assert cio.read_snapshot(part, 20, grid).bitwise_equal(cio.read_snapshot(full, 20, grid))
    assert (part / "energy.csv").read_bytes() == (full / "energy.csv").read_bytes()


def test_check_hypotheses(capsys):
    assert main(["check-hypotheses"]) == 0
    assert capsys.readouterr().out.splitlines()[0] == "satisfied"


def test_strict_config_error_is_json(tmp_path, capsys):
    bad = tmp_path / "bad.ini"
    bad.write_text("[params]\nnu = -1\n")
    assert main(["run", "-c", str(bad), "-o", str(tmp_path), "--strict"]) == 2
    err = json.loads(capsys.readouterr().err)
    assert err["error"] == "ConfigError" and err["command"] == "run"
    assert "params.nu must be > 0" in err["message"] and "bad.ini:2" in err["message"]


def test_failed_check_exit_codes(tmp_path, capsys):
    cfg = tmp_path / "weak.ini"
    cfg.write_text("[nonlinearity]\nC1 = 0.5\n")
    args = ["check-hypotheses", "-c", str(cfg), "-o", str(tmp_path)]
    assert main(args + ["--strict"]) == 1
    err = json.loads(capsys.readouterr().err)
    assert err["error"] == "check_failed" and err["command"] == "check-hypotheses"
    assert main(args) == 0
    out = capsys.readouterr()
    assert out.out.startswith("violated") and "witness f_lipschitz" in out.out
    assert not cio.read_json(tmp_path / "hypotheses.json")["satisfied"]


def test_gronwall_report(tmp_path, cfg_path):
    assert main(["gronwall", "-c", str(cfg_path), "-o", str(tmp_path), "--strict"]) == 0
    rep = cio.read_json(tmp_path / "gronwall.json")
    assert rep["C"] == 1.0 and rep["max_ratio"] <= 1.0


def test_energy_report(tmp_path, cfg_path):
    assert main(["energy-report", "-c", str(cfg_path), "-o", str(tmp_path)]) == 0
    assert len(cio.read_energy_csv(tmp_path / "energy.csv")) == 20
    assert "max_increase" in cio.read_json(tmp_path / "energy_report.json")


def test_verify_operators_csv(tmp_path):
    assert main(["verify-operators", "-o", str(tmp_path), "--strict"]) == 0
    lines = (tmp_path / "convergence.csv").read_text().splitlines()
    assert lines[0] == "operator,direction,N,h,error,order"
    rep = cio.read_json(tmp_path / "verify_operators.json")
    assert rep["ok"] and min(rep["orders"].values()) >= 1.9


def test_parser_lists_all_commands():
    help_text = build_parser().format_help()
    for name in ("run", "verify-operators", "energy-report", "absorption", "gronwall", "trajectory-dim", "check-hypotheses"):
        assert name in help_text
    with pytest.raises(SystemExit):
        build_parser().parse_args(["nonsense"])


def test_missing_config_is_an_error(tmp_path):
    assert main(["absorption", "-o", str(tmp_path)]) == 2
