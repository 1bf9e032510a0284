"""Integrator windup on system 1: one saturating step, with and without back-calculation.

Writes two trajectory CSVs and prints overshoot and time spent saturated.
"""
import sys
from pathlib import Path

import numpy as np

from pidtune import artifacts
from pidtune.config import load_config
from pidtune.simloop import ReferenceSignal, RolloutConfig, rollout

out = Path(sys.argv[1] if len(sys.argv) > 1 else "runs/windup")
cfg = load_config("system1")
T = cfg.reference.horizon
ref = ReferenceSignal(np.full(T, cfg.reference.limit))
for label, ctrl in (("no_backcalc", cfg.initial_controller()), ("backcalc", cfg.backcalc_controller())):
    res = rollout(cfg.plant(), ctrl, ref, RolloutConfig(T), cfg.limits)
    path = artifacts.write_csv(res, out / f"{label}.csv")
    over = res.y.max() - ref.samples[0]
    print(f"{label:12s} cost {res.cost_value:9.3f}  overshoot {over:7.3f}  saturated {int(res.saturated.sum()):4d} steps -> {path}")
