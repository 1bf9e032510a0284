import numpy as np
import pytest

from pidtune import artifacts
from pidtune.cli import run_command
from pidtune.config import (
    SHIPPED,
    ConfigNotFound,
    ConfigParseError,
    ConfigValidationError,
    load_config,
)
from pidtune.controller import SaturationLimits
from pidtune.lti import TransferFunction, discretize_tf
from pidtune.simloop import RolloutResult

SMALL = """
[plant]
num = 1
den = 20, 10, 1
dt = 0.1

[limits]
u_low = -7
u_high = 7

[reference]
kind = step
limit = 4
count = 4
n_train = 2
seed = 3
horizon = 60

[gains]
k_p = 10
k_i = 1.5
k_d = 8
b = 0.4

[tuning]
epochs = 3

[dynamic]
epochs = 2
"""


@pytest.fixture
def small_cfg(tmp_path):
    p = tmp_path / "small.ini"
    p.write_text(SMALL)
    return p


def test_system1_values():
    cfg = load_config("system1")
    assert cfg.tf.num == (2.0,) and cfg.tf.den == (1.0, -0.995) and cfg.tf.delay == 0.02
    assert cfg.limits == SaturationLimits(-3.3, 3.3)
    assert cfg.reference.limit == 4.0
    g = cfg.gains
    assert (g.k_p, g.k_i, g.b) == (4.0, 10.0, 0.5)
    assert cfg.active == ("k_p", "k_i", "b")


@pytest.mark.parametrize("name", SHIPPED)
def test_shipped_configs_validate(name):
    cfg = load_config(name)
    assert cfg.name == name
    assert cfg.plant().delay_steps * cfg.dt == pytest.approx(cfg.tf.delay)


def test_inverted_limits_named(tmp_path):
    p = tmp_path / "bad.ini"
    p.write_text(SMALL.replace("u_low = -7", "u_low = 8"))
    with pytest.raises(ConfigValidationError, match="u_low"):
        load_config(p)


def test_all_problems_reported(tmp_path):
    p = tmp_path / "bad.ini"
    p.write_text(SMALL.replace("seed = 3", "seed = 3\ncolour = red").replace("k_p = 10", "k_p = ten"))
    with pytest.raises(ConfigValidationError) as info:
        load_config(p)
    assert len(info.value.problems) == 2


def test_empty_and_missing_files(tmp_path, capsys):
    p = tmp_path / "empty.ini"
    p.write_text("")
    with pytest.raises(ConfigParseError):
        load_config(p)
    with pytest.raises(ConfigNotFound):
        load_config(tmp_path / "nope.ini")
    assert run_command(["simulate", "--config", str(p)]) != 0
    assert "error" in capsys.readouterr().err


def test_fractional_delay_rejected_at_load(tmp_path):
    p = tmp_path / "bad.ini"
    p.write_text(SMALL.replace("dt = 0.1", "dt = 0.1\ndelay = 0.15"))
    with pytest.raises(ConfigValidationError, match="integer multiple"):
        load_config(p)


def test_unknown_subcommand_exit_2(capsys):
    assert run_command(["frobnicate"]) == 2
    assert run_command([]) == 2
    assert "usage" in capsys.readouterr().err


def test_simulate_writes_trajectory(tmp_path):
    out = tmp_path / "out"
    assert run_command(["simulate", "--config", "system1", "--gains", "default", "--out", str(out)]) == 0
    lines = (out / "trajectory_backcalc.csv").read_bytes().split(b"\n")
    assert lines[0] == b"t,r,y,v,u_sat,saturated"
    assert len(lines) == 500 + 2  # header, rows, trailing newline
    assert b"\r" not in b"".join(lines)
    res = artifacts.read_csv(out / "trajectory_backcalc.csv")
    assert res.saturated.any()


def test_csv_examples_and_roundtrip(tmp_path):
    empty = RolloutResult.empty()
    artifacts.write_csv(empty, tmp_path / "e.csv")
    assert (tmp_path / "e.csv").read_text() == "t,r,y,v,u_sat,saturated\n"
    rng = np.random.default_rng(0)
    r, y, v = rng.normal(size=(3, 3))
    u = np.clip(v, -0.5, 0.5)
    res = RolloutResult(r, y, u, v, u != v)
    artifacts.write_csv(res, tmp_path / "a.csv")
    assert len((tmp_path / "a.csv").read_text().splitlines()) == 4
    back = artifacts.read_csv(tmp_path / "a.csv")
    for field in ("r", "y", "u_sat", "v", "saturated"):
        np.testing.assert_allclose(getattr(back, field), getattr(res, field), rtol=1e-9)


def test_params_roundtrip(tmp_path):
    params = {"k_p": 1 / 3, "k_i": 2.5e-7, "b": -0.1}
    artifacts.write_params(params, tmp_path / "p.txt", "header\nsecond line")
    assert artifacts.read_params(tmp_path / "p.txt") == params
    (tmp_path / "bad.txt").write_text("k_p 3\n")
    with pytest.raises(ValueError):
        artifacts.read_params(tmp_path / "bad.txt")


def test_verify_exit_0(capsys):
    assert run_command(["verify", "--config", "system2", "--horizon", "100"]) == 0
    out = capsys.readouterr().out
    assert "FAIL" not in out and out.count("PASS") == 4


def test_tune_and_simulate_optimized(small_cfg, tmp_path, capsys):
    out = tmp_path / "run"
    assert run_command(["tune", "--config", str(small_cfg), "--out", str(out), "--controller", "dynamic"]) == 0
    params = artifacts.read_params(out / "params.txt")
    assert set(params) == {"k_p", "k_i", "k_d", "b"}
    curve = (out / "learning_curve.csv").read_text().splitlines()
    assert curve[0] == "epoch,mean_train_cost" and len(curve) == 4
    assert (out / "dynamic_params.txt").exists() and (out / "dynamic_learning_curve.csv").exists()
    for ctrl, f in (("optimized", "params.txt"), ("dynamic", "dynamic_params.txt")):
        assert run_command(["simulate", "--config", str(small_cfg), "--controller", ctrl, "--gains", str(out / f), "--out", str(out)]) == 0
        assert (out / f"trajectory_{ctrl}.csv").exists()


def test_evaluate_prints_four_rows(small_cfg, tmp_path, capsys):
    out = tmp_path / "ev"
    assert run_command(["evaluate", "--config", str(small_cfg), "--out", str(out)]) == 0
    text = capsys.readouterr().out
    for label in ("Initial PID ", "Initial PID with backcalculation", "PID+backcalculation optimized", "Dynamic PID+backcalculation optimized"):
        assert label in text
    assert text.count("±") == 8
    assert len((out / "evaluation.csv").read_text().splitlines()) == 5


def test_tune_artifacts_byte_identical(small_cfg, tmp_path):
    a, b = tmp_path / "a", tmp_path / "b"
    for d in (a, b):
        assert run_command(["tune", "--config", str(small_cfg), "--seed", "7", "--out", str(d)]) == 0
    for name in ("params.txt", "learning_curve.csv"):
        assert (a / name).read_bytes() == (b / name).read_bytes()


def test_seed_override_changes_references(small_cfg):
    a = load_config(small_cfg).references()[0][0].samples
    b = load_config(small_cfg).with_overrides(seed=99).references()[0][0].samples
    assert not np.array_equal(a, b)
