"""CLI surface: subcommands, exit codes, files written."""

import subprocess
import sys

import numpy as np
import pytest

from mswave.cli import main

HOMOG_CFG = """
problem.dim = 1
problem.eps = 0.1
problem.coeff = periodic_1d
problem.coeff_params = 2, 1
homog.n_cell = 512
"""

SOLVE_CFG = """
problem.dim = 1
problem.eps = 0.1
problem.coeff = constant
problem.coeff_params = 0.7
problem.bc = periodic
problem.g1 = sin:1
time.T = 0.2
time.dt = 2e-3
time.scheme = newmark
time.n_checkpoints = 4
method.name = fine
mesh.N = 32
reference.kind = fine
reference.N = 32
"""


def _write(tmp_path, text, name="run.cfg"):
    p = tmp_path / name
    p.write_text(text)
    return str(p)


def test_homogenize_writes_csv(tmp_path):
    out = tmp_path / "h.csv"
    cfg = _write(tmp_path, HOMOG_CFG + "output.csv = %s\n" % out)
    assert main(["homogenize", "--config", cfg]) == 0
    lines = out.read_text().strip().splitlines()
    assert lines[0] == "x,a0_11,a0_12,a0_22,b0"
    parts = lines[1].split(",")
    assert float(parts[1]) == pytest.approx(0.5, abs=1e-5)
    assert float(parts[4]) == pytest.approx(1.0 / (32 * np.pi ** 2), abs=1e-5)


def test_homogenize_stdout(tmp_path, capsys):
    cfg = _write(tmp_path, HOMOG_CFG)
    assert main(["homogenize", "--config", cfg]) == 0
    out = capsys.readouterr().out
    assert out.startswith("x,a0_11,a0_12,a0_22,b0")


def test_solve_snapshot_and_figure(tmp_path, monkeypatch, capsys):
    monkeypatch.setenv("MSWAVE_CACHE_DIR", str(tmp_path / "cache"))
    snap = tmp_path / "u.traj"
    csv = tmp_path / "run.csv"
    cfg = _write(tmp_path, SOLVE_CFG
                 + "output.snapshot = %s\noutput.csv = %s\n" % (snap, csv))
    assert main(["solve", "--config", cfg]) == 0
    out = capsys.readouterr().out
    assert "linf_l2=" in out
    assert snap.exists() and snap.stat().st_size > 0
    fig = tmp_path / "run_solution.png"
    assert fig.exists() and fig.stat().st_size > 0


def test_convergence_prints_rates(tmp_path, monkeypatch, capsys):
    monkeypatch.setenv("MSWAVE_CACHE_DIR", str(tmp_path / "cache"))
    csv = tmp_path / "conv.csv"
    cfg = _write(tmp_path, SOLVE_CFG.replace("reference.N = 32",
                                             "reference.N = 128")
                 + "sweep.H = 1/8, 1/16\noutput.csv = %s\n"
                 "output.figures = false\n" % csv)
    assert main(["convergence", "--config", cfg]) == 0
    out = capsys.readouterr().out
    assert "rate_l2 pairwise:" in out
    assert len(csv.read_text().strip().splitlines()) == 3


def test_verify_passes(capsys):
    assert main(["verify"]) == 0
    out = capsys.readouterr().out
    assert "all 8 checks passed" in out


def test_unknown_key_exits_2(tmp_path, capsys):
    cfg = _write(tmp_path, HOMOG_CFG + "problem.dt = 1e-3\n")
    assert main(["homogenize", "--config", cfg]) == 2
    assert "config error:" in capsys.readouterr().err


def test_solver_error_exits_3(tmp_path, capsys):
    # non-nested coarse/fine pair trips the mesh check, not the config layer
    cfg = _write(tmp_path, SOLVE_CFG.replace("method.name = fine",
                                             "method.name = lod")
                 + "mesh.N_fine = 12\n")
    assert main(["solve", "--config", cfg]) == 3
    assert "solver error: MeshError" in capsys.readouterr().err


def test_missing_subcommand_is_usage_error():
    with pytest.raises(SystemExit) as exc:
        main([])
    assert exc.value.code == 2


def test_console_entry_subprocess(tmp_path):
    out = tmp_path / "h.csv"
    cfg = _write(tmp_path, HOMOG_CFG + "output.csv = %s\n" % out)
    proc = subprocess.run([sys.executable, "-m", "mswave.cli",
                           "homogenize", "--config", cfg],
                          capture_output=True, text=True)
    assert proc.returncode == 0
    assert "wrote" in proc.stdout
    assert out.exists()
