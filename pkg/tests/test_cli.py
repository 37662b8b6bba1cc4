import subprocess
import sys

import pytest

from symquant.cli import main
from symquant.model_io import load_controller, load_ts


PENDULUM_INI = """\
[system]
n = 2
m = 1
f =
    x2
    -1.96*sin(x1) - 1.5*x2 + u1
state_lo = -1 -1
state_hi = 1 1
input_lo = -2.5
input_hi = 2.5

[abstraction]
tau = 0.2
variant = EQ20
eta = 0.2
d = 0.4
mu = 0.2
lipschitz = 6

[synthesis]
kind = sequence
mode = hold
targets =
    0 0
    -0.48 0
    0 0
    -0.48 0
    0 0.48
    0.48 0
    0 -0.48
    -0.48 0
    0 0
    -0.48 0
    0 0
    -0.48 0

[run]
x0 = -0.48 0
max_steps = 200
seed = 1
samples = 300
"""

DELAY_INI = """\
[system]
n = 2
m = 1
f =
    x2
    -1.96*sin(x1) - 1.5*x2 + 0.1*delay(x2, 0.2) + u1
state_lo = -1 -1
state_hi = 1 1
input_lo = -2.5
input_hi = 2.5
theta = 0.2
r = 0.2
xi0 =
    -0.72 -0.72

[abstraction]
tau = 0.2
eta = 0.2
d = 0.4
mu = 0.2
lipschitz = 6
budget = 1000

[synthesis]
kind = reach
mode = robust
targets =
    -0.72 -0.72

[run]
max_steps = 5
seed = 1
samples = 100
"""


@pytest.fixture(scope="module")
def ws(tmp_path_factory):
    """Config files plus a prebuilt coarse model."""
    root = tmp_path_factory.mktemp("cli")
    (root / "pendulum.ini").write_text(PENDULUM_INI)
    (root / "sabotage.ini").write_text(
        PENDULUM_INI.replace("lipschitz = 6", "lipschitz = 6\ngrowth_scale = 0"))
    (root / "zoomed.ini").write_text(
        PENDULUM_INI
        .replace("lipschitz = 6", "lipschitz = 6\nzoom =\n    12 1 1.0 0.3")
        .replace("kind = sequence", "kind = reach"))
    (root / "delay.ini").write_text(DELAY_INI)
    assert main(["abstract", "--config", str(root / "pendulum.ini"),
                 "--out", str(root / "model.sts")]) == 0
    return root


def test_abstract_reports_model_size(ws, capsys):
    rc = main(["abstract", "--config", str(ws / "pendulum.ini"),
               "--out", str(ws / "again.sts")])
    assert rc == 0
    out = capsys.readouterr().out
    assert "delay-free model with 25 states, 25 inputs, 6631 transitions" in out
    assert len(load_ts(str(ws / "again.sts")).states) == 25


def test_synthesize_writes_sequence_controller(ws, capsys):
    rc = main(["synthesize", "--config", str(ws / "pendulum.ini"),
               "--model", str(ws / "model.sts"),
               "--out", str(ws / "law.ctrl")])
    assert rc == 0
    assert "sequence controller with 12 phase(s)" in capsys.readouterr().out
    assert load_controller(str(ws / "law.ctrl")).n_phases == 12


def test_simulate_completes_the_alternation(ws, capsys):
    rc = main(["simulate", "--config", str(ws / "pendulum.ini"),
               "--controller", str(ws / "law.ctrl"),
               "--out", str(ws / "run.csv")])
    assert rc == 0
    out = capsys.readouterr().out
    assert "run completed: phases 12/12" in out
    lines = (ws / "run.csv").read_text().splitlines()
    assert lines[0] == "t,x1,x2,u1,phase,cell_id"
    assert len(lines) > 40


def test_verify_frr_clean_model(ws, capsys):
    rc = main(["verify-frr", "--config", str(ws / "pendulum.ini"),
               "--model", str(ws / "model.sts")])
    assert rc == 0
    out = capsys.readouterr().out
    assert "frr-report seed=1 samples=300" in out
    assert "violations=0" in out


def test_verify_frr_flag_overrides(ws, capsys):
    rc = main(["verify-frr", "--config", str(ws / "pendulum.ini"),
               "--model", str(ws / "model.sts"),
               "--samples", "50", "--seed", "3"])
    assert rc == 0
    assert "frr-report seed=3 samples=50" in capsys.readouterr().out


def test_verify_frr_catches_sabotaged_radii(ws, capsys):
    rc = main(["abstract", "--config", str(ws / "sabotage.ini"),
               "--out", str(ws / "flat.sts")])
    assert rc == 0
    rc = main(["verify-frr", "--config", str(ws / "sabotage.ini"),
               "--model", str(ws / "flat.sts")])
    assert rc == 1
    captured = capsys.readouterr()
    assert "violation(s)" in captured.err


def test_refine_then_synthesize_on_subcells(ws, capsys):
    rc = main(["refine", "--config", str(ws / "zoomed.ini"),
               "--model", str(ws / "model.sts"),
               "--out", str(ws / "fine.sts")])
    assert rc == 0
    assert "refined model with 33 states" in capsys.readouterr().out
    rc = main(["synthesize", "--config", str(ws / "zoomed.ini"),
               "--model", str(ws / "fine.sts"),
               "--out", str(ws / "fine.ctrl")])
    assert rc == 0


def test_refine_requires_zoom_rows(ws, capsys):
    rc = main(["refine", "--config", str(ws / "pendulum.ini"),
               "--model", str(ws / "model.sts"),
               "--out", str(ws / "x.sts")])
    assert rc == 1
    assert "no abstraction.zoom assignments" in capsys.readouterr().err


def test_model_config_cross_check(ws, tmp_path, capsys):
    coarse = tmp_path / "widemu.ini"
    coarse.write_text(PENDULUM_INI.replace("mu = 0.2", "mu = 0.5"))
    rc = main(["verify-frr", "--config", str(coarse),
               "--model", str(ws / "model.sts")])
    assert rc == 1
    assert "does not match the config rebuild" in capsys.readouterr().err


def test_simulate_incomplete_run_fails(ws, tmp_path, capsys):
    # robust mode wins nothing beyond the single target cell here, so the
    # loop stalls immediately and the command reports the abort
    cfg = tmp_path / "robust.ini"
    cfg.write_text(PENDULUM_INI
                   .replace("kind = sequence", "kind = reach")
                   .replace("mode = hold", "mode = robust"))
    rc = main(["synthesize", "--config", str(cfg),
               "--model", str(ws / "model.sts"),
               "--out", str(tmp_path / "stall.ctrl")])
    assert rc == 0
    rc = main(["simulate", "--config", str(cfg),
               "--controller", str(tmp_path / "stall.ctrl"),
               "--out", str(tmp_path / "stall.csv")])
    assert rc == 1
    captured = capsys.readouterr()
    assert "run incomplete" in captured.out
    assert "simulation did not complete" in captured.err
    assert (tmp_path / "stall.csv").exists()


def test_simulate_needs_x0(ws, tmp_path, capsys):
    cfg = tmp_path / "nox0.ini"
    cfg.write_text(PENDULUM_INI.replace("x0 = -0.48 0\n", ""))
    rc = main(["simulate", "--config", str(cfg),
               "--controller", str(ws / "law.ctrl"),
               "--out", str(tmp_path / "no.csv")])
    assert rc == 1
    assert "run.x0: required" in capsys.readouterr().err


def test_bad_config_is_exit_1(ws, tmp_path, capsys):
    cfg = tmp_path / "bad.ini"
    cfg.write_text(PENDULUM_INI.replace("eta = 0.2", "eta = 1.5"))
    rc = main(["abstract", "--config", str(cfg), "--out", str(tmp_path / "x.sts")])
    assert rc == 1
    assert "abstraction.eta" in capsys.readouterr().err


def test_missing_config_is_exit_1(tmp_path, capsys):
    rc = main(["abstract", "--config", str(tmp_path / "ghost.ini"),
               "--out", str(tmp_path / "x.sts")])
    assert rc == 1
    assert "config file not found" in capsys.readouterr().err


def test_missing_model_file_is_exit_2(ws, capsys):
    rc = main(["export-dot", "--model", str(ws / "ghost.sts")])
    assert rc == 2
    assert "io error" in capsys.readouterr().err


def test_corrupt_model_file_is_exit_1(ws, tmp_path, capsys):
    bad = tmp_path / "bad.sts"
    bad.write_text("not a model\n")
    rc = main(["export-dot", "--model", str(bad)])
    assert rc == 1
    assert "missing STS 1 header" in capsys.readouterr().err


def test_export_dot_stdout_and_file(ws, tmp_path, capsys):
    rc = main(["export-dot", "--model", str(ws / "model.sts")])
    assert rc == 0
    assert capsys.readouterr().out.startswith("digraph sts {")
    out = tmp_path / "m.dot"
    rc = main(["export-dot", "--model", str(ws / "model.sts"),
               "--out", str(out)])
    assert rc == 0
    assert out.read_text().startswith("digraph sts {")


def test_timedelay_pipeline(ws, capsys):
    rc = main(["abstract", "--config", str(ws / "delay.ini"),
               "--out", str(ws / "tube.sts")])
    assert rc == 0
    assert "time-delay model with 40 states" in capsys.readouterr().out
    rc = main(["synthesize", "--config", str(ws / "delay.ini"),
               "--model", str(ws / "tube.sts"),
               "--out", str(ws / "tube.ctrl")])
    assert rc == 0
    rc = main(["simulate", "--config", str(ws / "delay.ini"),
               "--controller", str(ws / "tube.ctrl"),
               "--out", str(ws / "tube.csv")])
    assert rc == 0
    assert "run completed" in capsys.readouterr().out
    rc = main(["verify-frr", "--config", str(ws / "delay.ini"),
               "--model", str(ws / "tube.sts")])
    assert rc == 0
    out = capsys.readouterr().out
    assert "samples=100" in out and "violations=0" in out


def test_module_entry_point(ws, tmp_path):
    proc = subprocess.run(
        [sys.executable, "-m", "symquant", "abstract",
         "--config", str(ws / "pendulum.ini"),
         "--out", str(tmp_path / "m.sts")],
        capture_output=True, text=True)
    assert proc.returncode == 0
    assert "25 states" in proc.stdout
