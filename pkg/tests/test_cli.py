"""Config loading and the command-line surface."""

import numpy as np
import pytest

import switchgame as sg
from switchgame.cli import run
from switchgame.config import load_config, parse_config_text
from switchgame.errors import ConfigurationError


def test_parse_config_text_types():
    cfg = parse_config_text(
        "family = regime_chase\n"
        "# comment line\n"
        "horizon = 1.5\n"
        "regimes = 2\n"
        "controls = 1, 2\n"
        "allow_zero_cost_loops = true\n"
    )
    assert cfg["family"] == "regime_chase"
    assert cfg["horizon"] == 1.5
    assert cfg["regimes"] == 2
    assert cfg["controls"] == [1, 2]
    assert cfg["allow_zero_cost_loops"] is True


def test_config_round_trip_matches_the_builtin(tmp_path):
    path = tmp_path / "chase.cfg"
    path.write_text(
        "family = regime_chase\nhorizon = 1.0\nregimes = 2\n"
        "controls = 1, 2\nbounds = -2, 2\nnx = 81\nnt = 80\n"
        "cost = 0\nallow_zero_cost_loops = true\n"
    )
    spec, grid_kwargs = load_config(path)
    grid = sg.build_grid(spec, **grid_kwargs)
    field, _ = sg.solve(spec, grid)
    x = grid.axes[0]
    w = np.abs(x) <= 1.5
    assert np.max(np.abs(field.values[0, 0][w] - (x[w] - 1.0))) <= 2e-2


def test_config_cost_matrix_and_errors(tmp_path):
    path = tmp_path / "bad.cfg"
    path.write_text("family = wat\n")
    with pytest.raises(ConfigurationError):
        load_config(path)
    path.write_text(
        "family = regime_reward\nregimes = 2\nreward_rates = 0, 1\n"
        "cost = 0, 0.1, 0.1, 0\n"
    )
    spec, _ = load_config(path)
    mat = spec.cost_matrix(np.array([0.0]))
    assert mat[0, 1] == mat[1, 0] == 0.1
    path.write_text("family = regime_reward\nregimes = 2\ncost = 0, 1, 2\n")
    with pytest.raises(ConfigurationError):
        load_config(path)


def test_verify_benchmarks_exit_zero():
    for name in ("no_dynamics", "timed_switch"):
        assert run(["verify", name]) == 0


def test_check_assumptions_expected_violation_exits_zero(capsys):
    assert run(["check-assumptions", "ek_example"]) == 0
    out = capsys.readouterr().out
    assert "no_free_loop" in out and "FAIL" in out
    assert "[1, 2, 1]" in out


def test_check_assumptions_unexpected_violation_exits_one(tmp_path, capsys):
    path = tmp_path / "loop.cfg"
    # zero costs without the allow flag: the violation is unexpected
    path.write_text("family = regime_chase\nregimes = 2\ncontrols = 1, 2\ncost = 0\n")
    assert run(["check-assumptions", str(path)]) == 1


def test_simulate_frozen_benchmark_prints_the_estimate(capsys):
    assert run([
        "simulate", "no_dynamics", "--paths", "10", "--seed", "7",
        "--strategy", "never", "--adversary", "constant:0.0",
    ]) == 0
    out = capsys.readouterr().out
    assert "mean=0 stderr=0 n=10 seed=7" in out


def test_simulate_with_step_file_and_trajectory(tmp_path, capsys):
    step = tmp_path / "steps.txt"
    step.write_text("0.0 2\n0.5 1\n")
    traj = tmp_path / "traj.csv"
    code = run([
        "simulate", "ek_example", "--strategy", "never",
        "--adversary", f"step:{step}", "--paths", "1",
        "--trajectory-out", str(traj),
    ])
    assert code == 0
    lines = traj.read_text().splitlines()
    assert lines[0] == "t,x_1,regime,control,cum_running_cost,cum_switch_cost"
    assert len(lines) == 258  # header + 257 time rows at dt = 1/256


def test_solve_writes_deterministic_csv(tmp_path):
    args = ["solve", "ek_example", "--nx", "41", "--nt", "40",
            "--out", str(tmp_path)]
    assert run(args) == 0
    first = (tmp_path / "ek_example_values.csv").read_bytes()
    assert run(args) == 0
    second = (tmp_path / "ek_example_values.csv").read_bytes()
    assert first == second
    header = first.decode().splitlines()[0]
    assert header == "t,x_1,regime,value,action,switch_target,adversary_control"


def test_isaacs_subcommand_writes_the_report(tmp_path, capsys):
    assert run(["isaacs", "ek_example", "--out", str(tmp_path)]) == 0
    content = (tmp_path / "ek_example_isaacs.csv").read_text().splitlines()
    assert content[0] == "p,lower,upper,gap"
    assert content[1] == "-2,0,2,2"


def test_parse_errors_exit_two():
    assert run(["frobnicate"]) == 2
    assert run([]) == 2


def test_unknown_benchmark_exits_one(capsys):
    assert run(["solve", "missing_bench"]) == 1
    err = capsys.readouterr().err
    assert "ek_example" in err


def test_zeno_simulation_fails_cleanly(capsys):
    code = run([
        "simulate", "zeno_pathology", "--strategy", "scripted:zeno",
        "--adversary", "constant:1", "--paths", "2", "--dt", "0.0009765625",
    ])
    assert code == 1
    assert "switch cap" in capsys.readouterr().err


def test_list_subcommand(capsys):
    assert run(["list"]) == 0
    out = capsys.readouterr().out
    for name in sg.benchmark_names():
        assert name in out
