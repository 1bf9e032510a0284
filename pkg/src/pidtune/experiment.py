"""The four-controller comparison.

1. ``initial``: configured gains, no back-calculation (b = 0).
2. ``backcalc``: configured gains including b.
3. ``optimized``: (2) tuned with Adam on the training references.
4. ``dynamic``: gain network around the gains of (3), output layer zeroed,
   then tuned the same way.
"""
from __future__ import annotations

from dataclasses import dataclass, replace

from .config import ExperimentConfig
from .controller import DynamicPidController, GainNetwork, PidController
from .tuner import TuneConfig, TuneReport, evaluate, tune

CONTROLLERS = ("initial", "backcalc", "optimized", "dynamic")
ROW_LABELS = {
    "initial": "Initial PID",
    "backcalc": "Initial PID with backcalculation",
    "optimized": "PID+backcalculation optimized",
    "dynamic": "Dynamic PID+backcalculation optimized",
}


@dataclass
class ComparisonRow:
    controller: str
    train_mean: float
    train_std: float
    test_mean: float
    test_std: float

    @property
    def label(self) -> str:
        return ROW_LABELS[self.controller]


def tune_static(cfg: ExperimentConfig, train=None) -> tuple[TuneReport, PidController]:
    if train is None:
        train, _ = cfg.references()
    return tune(cfg.plant(), cfg.backcalc_controller(), train, cfg.tuning, cfg.limits)


def dynamic_template(cfg: ExperimentConfig, static: PidController) -> DynamicPidController:
    base = static.gains.floats()
    names = tuple(g for g in static.active)
    d = cfg.dynamic
    return DynamicPidController(GainNetwork.init(base, names, d.hidden, d.seed, d.init_scale))


def tune_dynamic(cfg: ExperimentConfig, static: PidController, train=None):
    if train is None:
        train, _ = cfg.references()
    hyper = replace(cfg.tuning, lr=cfg.dynamic.lr, epochs=cfg.dynamic.epochs)
    return tune(cfg.plant(), dynamic_template(cfg, static), train, hyper, cfg.limits)


def compare(cfg: ExperimentConfig):
    """Tune and score all four controllers.

    Returns ``(rows, static_report, static_controller, dynamic_report, dynamic_controller)``.
    """
    train, test = cfg.references()
    plant = cfg.plant()
    T = cfg.reference.horizon
    w = cfg.weights

    def row(name, ctrl):
        tr = evaluate(plant, ctrl, train, cfg.limits, T, w)
        te = evaluate(plant, ctrl, test, cfg.limits, T, w) if test else (float("nan"), float("nan"))
        return ComparisonRow(name, *tr, *te)

    rows = [row("initial", cfg.initial_controller()), row("backcalc", cfg.backcalc_controller())]
    s_rep, s_ctrl = tune_static(cfg, train)
    rows.append(row("optimized", s_ctrl))
    d_rep, d_ctrl = tune_dynamic(cfg, s_ctrl, train)
    rows.append(row("dynamic", d_ctrl))
    return rows, s_rep, s_ctrl, d_rep, d_ctrl


def format_table(rows) -> str:
    width = max(len(r.label) for r in rows)
    lines = [f"{'Method':<{width}}  {'Training cost':>20}  {'Test cost':>20}"]
    for r in rows:
        tr = f"{r.train_mean:.1f}±{r.train_std:.1f}"
        te = f"{r.test_mean:.1f}±{r.test_std:.1f}"
        lines.append(f"{r.label:<{width}}  {tr:>20}  {te:>20}")
    return "\n".join(lines)
