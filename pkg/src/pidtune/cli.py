"""Command line entry point.

    pidtune simulate --config system1 [--controller backcalc] [--gains default|PARAMS] [--ref-index 0]
    pidtune tune     --config system1 [--seed 7] [--epochs 200] [--controller optimized|dynamic]
    pidtune evaluate --config system1 [--seed 7]
    pidtune verify   [--config system1 ...]

Artifacts go to ``--out`` (default: the config's ``[output] dir``).
"""
from __future__ import annotations

import argparse
import logging
import sys
from pathlib import Path

import numpy as np

from . import artifacts
from .config import SHIPPED, ConfigError, ExperimentConfig, load_config
from .controller import DynamicPidController, PidController, PidGains, SaturationLimits
from .dfc_theory import (
    verify_backcalc_equivalence,
    verify_controller_state_form,
    verify_pid_equivalence,
    verify_z_cost_independence,
)
from .experiment import CONTROLLERS, compare, dynamic_template, format_table, tune_dynamic, tune_static
from .simloop import RolloutConfig, generate_references, rollout

log = logging.getLogger("pidtune")

VERIFY_TOL = 1e-9


def _parser() -> argparse.ArgumentParser:
    p = argparse.ArgumentParser(prog="pidtune", description="Tune back-calculation PID controllers by differentiating through closed-loop rollouts.")
    p.add_argument("-v", "--verbose", action="store_true")
    sub = p.add_subparsers(dest="command", metavar="{simulate,tune,evaluate,verify}")

    def common(sp, config_required=True):
        if config_required:
            sp.add_argument("--config", required=True, help="config file or shipped name (system1..system4)")
        sp.add_argument("--seed", type=int, default=None, help="reference-generation seed")
        sp.add_argument("--out", default=None, help="output directory")
        sp.add_argument("--epochs", type=int, default=None, help="tuning epochs")

    s = sub.add_parser("simulate", help="one rollout -> trajectory CSV")
    common(s)
    s.add_argument("--controller", choices=CONTROLLERS, default="backcalc")
    s.add_argument("--gains", default="default", help="'default' or a parameter file written by 'tune'")
    s.add_argument("--ref-index", type=int, default=0, help="index into the test references")

    t = sub.add_parser("tune", help="tune gains, write parameters and learning curve")
    common(t)
    t.add_argument("--controller", choices=("optimized", "dynamic"), default="optimized")

    e = sub.add_parser("evaluate", help="four-controller comparison table")
    common(e)

    v = sub.add_parser("verify", help="run the augmented-state / disturbance-feedback checks")
    v.add_argument("--config", action="append", default=None, help="repeatable; default: all shipped configs")
    v.add_argument("--horizon", type=int, default=300)
    return p


def _out_dir(cfg: ExperimentConfig, args) -> Path:
    return Path(args.out) if args.out else Path(cfg.out_dir)


def _load(args) -> ExperimentConfig:
    return load_config(args.config).with_overrides(seed=args.seed, epochs=args.epochs)


def _static_from_params(cfg: ExperimentConfig, params: dict) -> PidController:
    ctrl = cfg.backcalc_controller()
    return ctrl.bind([params.get(n, float(ctrl.gains.get(n))) for n in ctrl.active])


def cmd_simulate(args) -> int:
    cfg = _load(args)
    train, test = cfg.references()
    refs = test if test else train
    if not 0 <= args.ref_index < len(refs):
        raise ValueError(f"--ref-index must lie in [0, {len(refs)})")
    ref = refs[args.ref_index]
    if args.controller == "initial":
        ctrl = cfg.initial_controller()
    elif args.controller == "backcalc":
        ctrl = cfg.backcalc_controller()
    elif args.gains != "default":
        params = artifacts.read_params(args.gains)
        if args.controller == "optimized":
            ctrl = _static_from_params(cfg, params)
        else:
            static = _static_from_params(cfg, params)
            tmpl = dynamic_template(cfg, static)
            ctrl = tmpl.bind([params[n] for n in tmpl.parameter_names()])
    else:
        _, ctrl = tune_static(cfg, train)
        if args.controller == "dynamic":
            _, ctrl = tune_dynamic(cfg, ctrl, train)
    res = rollout(cfg.plant(), ctrl, ref, RolloutConfig(cfg.reference.horizon, weights=cfg.weights), cfg.limits)
    path = artifacts.write_csv(res, _out_dir(cfg, args) / f"trajectory_{args.controller}.csv")
    print(f"{cfg.name} {args.controller}: cost {res.cost_value:.6g}, saturated {int(res.saturated.sum())}/{len(res)} steps -> {path}")
    return 0


def _static_params(ctrl: PidController) -> dict:
    g = ctrl.gains.floats()
    return {n: g.get(n) for n in ctrl.active}


def cmd_tune(args) -> int:
    cfg = _load(args)
    out = _out_dir(cfg, args)
    train, test = cfg.references()
    rep, ctrl = tune_static(cfg, train)
    header = f"{cfg.name}: tuned static gains (best epoch {rep.best_epoch}, train cost {rep.train_mean!r})"
    artifacts.write_params(_static_params(ctrl), out / "params.txt", header)
    artifacts.write_learning_curve(rep.epoch_costs, out / "learning_curve.csv")
    print(f"{cfg.name}: train cost {rep.epoch_costs[0] if rep.epoch_costs else float('nan'):.6g} -> {rep.train_mean:.6g}")
    for k, v in _static_params(ctrl).items():
        print(f"  {k} = {v:.6g}")
    if args.controller == "dynamic":
        drep, dctrl = tune_dynamic(cfg, ctrl, train)
        params = _static_params(ctrl)
        params.update(zip(dctrl.parameter_names(), dctrl.parameters()))
        artifacts.write_params(params, out / "dynamic_params.txt", f"{cfg.name}: base gains and gain-network weights")
        artifacts.write_learning_curve(drep.epoch_costs, out / "dynamic_learning_curve.csv")
        print(f"{cfg.name}: dynamic train cost -> {drep.train_mean:.6g}")
    return 0


def cmd_evaluate(args) -> int:
    cfg = _load(args)
    out = _out_dir(cfg, args)
    rows, s_rep, s_ctrl, d_rep, _ = compare(cfg)
    print(f"{cfg.name} (seed {cfg.reference.seed}, {cfg.reference.n_train} train / "
          f"{cfg.reference.count - cfg.reference.n_train} test references)")
    print(format_table(rows))
    lines = [("controller", "train_mean", "train_std", "test_mean", "test_std")]
    lines += [(r.controller, repr(r.train_mean), repr(r.train_std), repr(r.test_mean), repr(r.test_std)) for r in rows]
    artifacts.atomic_write(out / "evaluation.csv", "\n".join(",".join(map(str, l)) for l in lines) + "\n")
    artifacts.write_params(_static_params(s_ctrl), out / "params.txt", f"{cfg.name}: tuned static gains")
    artifacts.write_learning_curve(s_rep.epoch_costs, out / "learning_curve.csv")
    artifacts.write_learning_curve(d_rep.epoch_costs, out / "dynamic_learning_curve.csv")
    return 0


def verify_suite(configs, horizon: int = 300, n_refs: int = 5):
    """(check, system, deviation) rows for the equivalence checks."""
    rows = []
    for name in configs:
        cfg = load_config(name)
        plant = cfg.plant()
        g = cfg.gains
        rows.append(("pid = -K Y (regulation)", cfg.name, verify_pid_equivalence(g, plant, 200)))
        refs = generate_references("step", cfg.reference.limit, n_refs, horizon, cfg.reference.seed)
        dev = max(verify_backcalc_equivalence(g, plant, r, cfg.limits, horizon) for r in refs)
        rows.append(("backcalc = const-gain DFC", cfg.name, dev))
        # PI plants get a small derivative gain so the filtered term is exercised
        filt = PidGains(g.k_p, g.k_i, g.k_d if g.k_d else 0.02, g.b, alpha=0.5)
        rows.append(("controller-state form (alpha=0.5)", cfg.name, verify_controller_state_form(filt, plant, 200)))
        N = 3 * plant.order
        Ms = [[np.zeros((N, N))], [np.eye(N)], [0.5 * np.eye(N), 0.5 * np.eye(N)]]
        rows.append(("Z cost independent of predictor", cfg.name, verify_z_cost_independence(g, plant, 200, Ms)))
    return rows


def cmd_verify(args) -> int:
    configs = args.config or list(SHIPPED)
    rows = verify_suite(configs, args.horizon)
    ok = True
    print(f"{'check':<36} {'system':<10} {'max deviation':>14}  result")
    for check, system, dev in rows:
        passed = dev < VERIFY_TOL
        ok &= passed
        print(f"{check:<36} {system:<10} {dev:>14.3e}  {'PASS' if passed else 'FAIL'}")
    return 0 if ok else 1


COMMANDS = {"simulate": cmd_simulate, "tune": cmd_tune, "evaluate": cmd_evaluate, "verify": cmd_verify}


def run_command(argv=None) -> int:
    parser = _parser()
    try:
        args = parser.parse_args(argv)
    except SystemExit as exc:
        return int(exc.code or 0)
    if args.command not in COMMANDS:
        parser.print_usage(sys.stderr)
        return 2
    logging.basicConfig(level=logging.DEBUG if args.verbose else logging.WARNING, format="%(levelname)s %(name)s: %(message)s")
    try:
        return COMMANDS[args.command](args)
    except (ConfigError, OSError, ValueError, ArithmeticError, RuntimeError) as exc:
        print(f"pidtune {args.command}: error: {exc}", file=sys.stderr)
        return 1


def main():
    sys.exit(run_command())
