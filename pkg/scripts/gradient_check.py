"""Taped gradient vs central finite differences for every shipped system."""
from pidtune.autodiff import check_gradient
from pidtune.config import SHIPPED, load_config
from pidtune.simloop import RolloutConfig, generate_references, rollout

T = 100
for name in SHIPPED:
    cfg = load_config(name)
    ref = generate_references(cfg.reference.kind, cfg.reference.limit, 1, T, cfg.reference.seed)[0]
    plant, ctrl = cfg.plant(), cfg.backcalc_controller()
    err = check_gradient(lambda p: rollout(plant, ctrl.bind(p), ref, RolloutConfig(T), cfg.limits).cost, ctrl.parameters())
    print(f"{name}: params {', '.join(ctrl.parameter_names())}  max rel err {err:.2e}")
