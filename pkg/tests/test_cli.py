"""CLI surface: config validation, artifacts, exit codes, reproducibility."""

import json
import os

import numpy as np
import pytest

from stifflab.cli import main


def write(path, text):
    path.write_text(text)
    return str(path)


SOLVE_OK = """
[scenario]
L = 4.0
grid_h = 0.02
seed = 3
phase = { kind = "snapping", kappa = 2.0 }

[solve]
mode = "resolvent"
alpha = 1.0
f = "gauss"
dump_matrix = true
"""

HEAT_OK = """
[scenario]
L = 4.0
grid_h = 0.05
seed = 3
phase = { kind = "snapping", kappa = 2.0 }

[solve]
mode = "heat"
u0 = "box:1:2"
dt = 0.01
t_end = 0.2
snapshots = [0.1, 0.2]
"""

MC_OK = """
[scenario]
L = 5.0
grid_h = 0.02
seed = 12
phase = { kind = "snapping", kappa = 2.0 }

[mc]
kind = "snob"
x0 = "0+"
h = 5e-3
T = 0.25
n_paths = 4000
seed = 12

[mc.cross_check]
f = "minus-side"
pde_grid_h = 0.02
pde_dt = 2.5e-3
"""


def manifest_of(out_dir):
    files = [f for f in os.listdir(out_dir) if f.startswith("manifest_")]
    assert len(files) == 1
    with open(out_dir / files[0]) as fh:
        return json.load(fh)


def test_solve_resolvent_smoke(tmp_path):
    cfg = write(tmp_path / "c.toml", SOLVE_OK)
    out = tmp_path / "out"
    assert main(["solve", "--config", cfg, "--out-dir", str(out)]) == 0
    data = np.loadtxt(out / "solution.csv", delimiter=",", skiprows=1)
    assert data.shape[1] == 4 and data.shape[0] > 100
    man = manifest_of(out)
    assert man["command"] == "solve" and man["config_hash"]
    for artifact in man["outputs"]:
        assert os.path.exists(artifact)
    assert (out / "stiffness.csv").exists() and (out / "mass.csv").exists()


def test_solve_heat_smoke_and_conservation(tmp_path):
    cfg = write(tmp_path / "c.toml", HEAT_OK)
    out = tmp_path / "out"
    assert main(["solve", "--config", cfg, "--out-dir", str(out)]) == 0
    rep = np.loadtxt(out / "heat_report.csv", delimiter=",", skiprows=1)
    # snapping is conservative: (u_t, 1)_m constant across snapshot rows
    assert rep.shape[0] == 2
    assert rep[0, 2] == pytest.approx(rep[1, 2], rel=1e-10)
    snaps = np.loadtxt(out / "heat_snapshots.csv", delimiter=",", skiprows=1)
    assert set(np.round(np.unique(snaps[:, 0]), 12)) == {0.1, 0.2}


def test_invalid_barrier_exits_2_and_names_key(tmp_path, capsys):
    bad = """
[scenario]
L = 1.0
grid_h = 0.05
phase = { kind = "eps-barrier", eps = 2.0 }

[solve]
mode = "resolvent"
"""
    cfg = write(tmp_path / "c.toml", bad)
    assert main(["solve", "--config", cfg, "--out-dir", str(tmp_path / "o")]) == 2
    err = capsys.readouterr().err
    assert "L" in err and "eps" in err


def test_missing_config_table_exits_2(tmp_path):
    cfg = write(tmp_path / "c.toml", "[scenario]\nL = 2.0\nphase = { kind = 'continuous' }\n")
    assert main(["solve", "--config", cfg, "--out-dir", str(tmp_path / "o")]) == 2


def test_zero_resistance_cell_exits_3(tmp_path):
    table = tmp_path / "flat.csv"
    table.write_text("x,cdf\n-1.0,0.0\n-0.5,0.5\n0.5,0.5\n1.0,1.0\n")
    bad = f"""
[scenario]
L = 1.0
grid_h = 0.25
phase = {{ kind = "continuous" }}

[scenario.resistance]
kind = "table"
path = "flat.csv"

[solve]
mode = "resolvent"
"""
    cfg = write(tmp_path / "c.toml", bad)
    assert main(["solve", "--config", cfg, "--out-dir", str(tmp_path / "o")]) == 3


def test_unknown_preset_exits_2(tmp_path, capsys):
    cfg = write(tmp_path / "c.toml", "[sweep]\npreset = 'no-such-preset'\n")
    assert main(["sweep", "--config", cfg, "--out-dir", str(tmp_path / "o")]) == 2
    assert "lejay-semi" in capsys.readouterr().err


def test_sweep_preset_smoke(tmp_path, capsys):
    cfg = write(tmp_path / "c.toml", """
[scenario]
grid_h = 0.05

[sweep]
preset = "lejay-semi"
n_max = 3
barrier_cells = 8
""")
    out = tmp_path / "out"
    assert main(["sweep", "--config", cfg, "--out-dir", str(out), "--svg"]) == 0
    stdout = capsys.readouterr().out
    assert "verdict PASS" in stdout
    report = (out / "sweep_report.csv").read_text().splitlines()
    assert len(report) == 1 + 4
    assert (out / "sweep_errors.svg").exists()
    svg = (out / "sweep_errors.svg").read_text()
    assert svg.startswith("<svg") and "polyline" in svg


@pytest.mark.parametrize("preset", ["lejay-impermeable", "lejay-permeable"])
def test_sweep_other_lejay_presets(tmp_path, capsys, preset):
    cfg = write(tmp_path / "c.toml", f"""
[scenario]
grid_h = 0.05

[sweep]
preset = "{preset}"
n_max = 3
barrier_cells = 8
""")
    assert main(["sweep", "--config", cfg, "--out-dir", str(tmp_path / "o")]) == 0
    stdout = capsys.readouterr().out
    assert "verdict PASS" in stdout and "verdict FAIL" not in stdout


def test_sweep_cantor_preset_runs_and_reports(tmp_path, capsys):
    cfg = write(tmp_path / "c.toml", """
[scenario]
grid_h = 0.02

[sweep]
preset = "cantor-permeable"
n_max = 3
barrier_cells = 8
""")
    out = tmp_path / "o"
    assert main(["sweep", "--config", cfg, "--out-dir", str(out)]) == 0
    stdout = capsys.readouterr().out
    assert "verdict" in stdout
    assert "flag: hypothesis quantity non-monotone" not in stdout
    report = (out / "sweep_report.csv").read_text().splitlines()
    assert len(report) == 1 + 4  # header + one row per n for the preset's probe


def test_mc_cross_check_and_determinism(tmp_path):
    cfg = write(tmp_path / "c.toml", MC_OK)
    out1, out2 = tmp_path / "o1", tmp_path / "o2"
    assert main(["mc", "--config", cfg, "--out-dir", str(out1)]) == 0
    assert main(["mc", "--config", cfg, "--out-dir", str(out2)]) == 0
    for name in ("mc_events.csv", "mc_snapshots.csv"):
        assert (out1 / name).read_bytes() == (out2 / name).read_bytes()
    row = (out1 / "mc_cross_check.csv").read_text().splitlines()
    assert row[0] == "mc_mean,std_err,pde_value,z_score"
    z = float(row[1].split(",")[3])
    assert abs(z) < 4.0


def test_mc_seed_flag_changes_output(tmp_path):
    cfg = write(tmp_path / "c.toml", MC_OK)
    out1, out2 = tmp_path / "o1", tmp_path / "o2"
    assert main(["mc", "--config", cfg, "--out-dir", str(out1), "--seed", "1"]) == 0
    assert main(["mc", "--config", cfg, "--out-dir", str(out2), "--seed", "2"]) == 0
    assert (out1 / "mc_snapshots.csv").read_bytes() != (out2 / "mc_snapshots.csv").read_bytes()


def test_separate_phase_ctmc_zero_crossings(tmp_path):
    cfg = write(tmp_path / "c.toml", """
[scenario]
L = 1.0
grid_h = 0.25
seed = 4
phase = { kind = "separate" }

[mc]
kind = "ctmc"
x0 = "0+"
T = 2.0
n_paths = 500
seed = 4
""")
    out = tmp_path / "out"
    assert main(["mc", "--config", cfg, "--out-dir", str(out)]) == 0
    events = (out / "mc_events.csv").read_text().splitlines()[1:]
    assert not any(",cross," in line for line in events)


def test_cantor_level_recorded_in_manifest(tmp_path):
    cfg = write(tmp_path / "c.toml", """
[scenario]
L = 2.0
grid_h = 0.1
phase = { kind = "continuous" }

[scenario.resistance]
kind = "lebesgue-plus-cantor"
level = 12

[solve]
mode = "resolvent"
alpha = 1.0
f = "gauss"
""")
    out = tmp_path / "out"
    assert main(["solve", "--config", cfg, "--out-dir", str(out)]) == 0
    man = manifest_of(out)
    assert man["info"]["resistance_cantor_level"] == 12
    assert man["info"]["resistance_cantor_cdf_error_bound"] == 2.0 ** -12


def test_check_battery_passes(tmp_path, capsys):
    cfg = write(tmp_path / "c.toml", SOLVE_OK)
    out = tmp_path / "out"
    assert main(["check", "--config", cfg, "--out-dir", str(out)]) == 0
    stdout = capsys.readouterr().out
    assert stdout.count("check PASS") == 5
    assert "FAIL" not in stdout


def test_snapping_needs_exactly_one_of_kappa_gamma(tmp_path, capsys):
    both = """
[scenario]
L = 2.0
grid_h = 0.1
phase = { kind = "snapping", kappa = 2.0, gamma_bar = 1.0 }

[solve]
mode = "resolvent"
"""
    cfg = write(tmp_path / "c.toml", both)
    assert main(["solve", "--config", cfg, "--out-dir", str(tmp_path / "o")]) == 2
    assert "kappa" in capsys.readouterr().err


def test_gamma_bar_derives_kappa(tmp_path):
    cfg = write(tmp_path / "c.toml", """
[scenario]
L = 2.0
grid_h = 0.1
phase = { kind = "snapping", gamma_bar = 1.0 }

[solve]
mode = "resolvent"
alpha = 1.0
f = "gauss"
""")
    out = tmp_path / "out"
    assert main(["solve", "--config", cfg, "--out-dir", str(out)]) == 0
    # gamma_bar = 1 means kappa = 2: interface conductance 0.5 in the dump
    cfg2 = write(tmp_path / "c2.toml", SOLVE_OK)
    out2 = tmp_path / "out2"
    assert main(["solve", "--config", cfg2, "--out-dir", str(out2)]) == 0


def test_threads_env_fallback(tmp_path, monkeypatch, capsys):
    monkeypatch.setenv("STIFFLAB_THREADS", "2")
    cfg = write(tmp_path / "c.toml", """
[scenario]
grid_h = 0.05

[sweep]
preset = "lejay-semi"
n_max = 2
barrier_cells = 8
""")
    assert main(["sweep", "--config", cfg, "--out-dir", str(tmp_path / "o")]) == 0
    assert "verdict" in capsys.readouterr().out
