"""Episodic gradient-descent tuning with Adam."""
from __future__ import annotations

import logging
import math
from dataclasses import dataclass, field, replace
from typing import Sequence

import numpy as np

from .autodiff import NumericError
from .controller import SaturationLimits
from .lti import DiscreteModel
from .simloop import CostWeights, ReferenceSignal, RolloutConfig, RolloutDiverged, rollout

__all__ = [
    "DIVERGED_PENALTY",
    "AdamState",
    "adam_step",
    "TuneConfig",
    "TuneReport",
    "TuningFailed",
    "episode_cost",
    "evaluate",
    "tune",
]

log = logging.getLogger(__name__)

DIVERGED_PENALTY = 1e6


@dataclass
class AdamState:
    m: np.ndarray
    v: np.ndarray
    t: int = 0
    lr: float = 0.02
    beta1: float = 0.9
    beta2: float = 0.999
    eps: float = 1e-8

    @classmethod
    def fresh(cls, n: int, lr=0.02, beta1=0.9, beta2=0.999, eps=1e-8) -> AdamState:
        if not (0 <= beta1 < 1 and 0 <= beta2 < 1):
            raise ValueError("beta1 and beta2 must lie in [0, 1)")
        return cls(np.zeros(n), np.zeros(n), 0, lr, beta1, beta2, eps)


def adam_step(st: AdamState, params, grads):
    """Bias-corrected Adam update; returns ``(new_params, new_state)``."""
    params = np.asarray(params, dtype=float)
    g = np.asarray(grads, dtype=float)
    if params.shape != g.shape or g.shape != st.m.shape:
        raise ValueError("params, grads and optimizer state must have equal lengths")
    if not np.all(np.isfinite(g)):
        raise NumericError("adam_step", float(g[~np.isfinite(g)][0]))
    t = st.t + 1
    m = st.beta1 * st.m + (1.0 - st.beta1) * g
    v = st.beta2 * st.v + (1.0 - st.beta2) * (g * g)
    m_hat = m / (1.0 - st.beta1**t)
    v_hat = v / (1.0 - st.beta2**t)
    new = params - st.lr * m_hat / (np.sqrt(v_hat) + st.eps)
    return new, replace(st, m=m, v=v, t=t)


@dataclass(frozen=True)
class TuneConfig:
    lr: float = 0.02
    epochs: int = 200
    beta1: float = 0.9
    beta2: float = 0.999
    eps: float = 1e-8
    weights: CostWeights = field(default_factory=CostWeights)
    horizon: int | None = None


@dataclass
class TuneReport:
    names: tuple[str, ...]
    initial_params: np.ndarray
    epoch_costs: list[float]
    final_params: np.ndarray
    best_epoch: int
    train_mean: float = math.nan
    train_std: float = math.nan
    diverged_episodes: int = 0

    @property
    def params(self) -> dict[str, float]:
        return dict(zip(self.names, map(float, self.final_params)))


class TuningFailed(RuntimeError):
    def __init__(self, epoch: int, last_good: np.ndarray):
        super().__init__(f"every training rollout diverged at epoch {epoch}")
        self.epoch = epoch
        self.last_good = last_good


def _horizon(refs, horizon):
    return horizon if horizon is not None else min(len(r) for r in refs)


def episode_cost(plant, controller, ref, lim, horizon, weights=CostWeights()) -> float:
    """Untaped cost of one rollout; diverged rollouts cost ``DIVERGED_PENALTY``."""
    try:
        res = rollout(plant, controller, ref, RolloutConfig(horizon, False, weights), lim)
    except (RolloutDiverged, NumericError):
        return DIVERGED_PENALTY
    return res.cost_value


def evaluate(
    plant: DiscreteModel,
    controller,
    refs: Sequence[ReferenceSignal],
    lim: SaturationLimits,
    horizon: int | None = None,
    weights: CostWeights = CostWeights(),
) -> tuple[float, float]:
    """Mean and population standard deviation of per-reference cost."""
    if not refs:
        raise ValueError("need at least one reference")
    T = _horizon(refs, horizon)
    costs = np.array([episode_cost(plant, controller, r, lim, T, weights) for r in refs])
    return float(costs.mean()), float(costs.std())


def _cost_and_grad(plant, controller, refs, lim, T, weights):
    n = len(controller.parameters())
    total = 0.0
    grad = np.zeros(n)
    bad = 0
    cfg = RolloutConfig(T, True, weights)
    for ref in refs:
        try:
            res = rollout(plant, controller, ref, cfg, lim)
            g = res.gradient()
            if not np.all(np.isfinite(g)):
                raise NumericError("gradient", float("nan"))
        except (RolloutDiverged, NumericError):
            total += DIVERGED_PENALTY
            bad += 1
            continue
        total += res.cost_value
        grad += g
    return total / len(refs), grad / len(refs), bad


def tune(
    plant: DiscreteModel,
    controller,
    train_refs: Sequence[ReferenceSignal],
    hyper: TuneConfig,
    lim: SaturationLimits,
) -> tuple[TuneReport, object]:
    """Full-batch Adam on the mean training cost.

    Each epoch evaluates cost and gradient at the current parameters over all
    training references, records the mean cost, then takes one Adam step.
    The returned controller carries the parameters with the lowest recorded
    mean training cost (the iterate after the last step is evaluated too).
    """
    if not train_refs:
        raise ValueError("need at least one training reference")
    T = _horizon(train_refs, hyper.horizon)
    names = tuple(controller.parameter_names())
    p0 = controller.parameters()
    p = p0.copy()
    st = AdamState.fresh(len(p), hyper.lr, hyper.beta1, hyper.beta2, hyper.eps)
    costs: list[float] = []
    best = (math.inf, p0.copy(), 0)
    last_good = p0.copy()
    diverged = 0
    n = len(train_refs)
    for epoch in range(hyper.epochs + 1):
        ctrl = controller.bind(p)
        if epoch == hyper.epochs:
            # score the last iterate without stepping again
            c = float(np.mean([episode_cost(plant, ctrl, r, lim, T, hyper.weights) for r in train_refs]))
            if c < best[0]:
                best = (c, p.copy(), epoch)
            break
        c, g, bad = _cost_and_grad(plant, ctrl, train_refs, lim, T, hyper.weights)
        diverged += bad
        if bad == n:
            raise TuningFailed(epoch, last_good)
        last_good = p.copy()
        costs.append(c)
        if c < best[0]:
            best = (c, p.copy(), epoch)
        log.debug("epoch %d mean cost %.6g", epoch, c)
        p, st = adam_step(st, p, g)
    final = controller.bind(best[1])
    report = TuneReport(names, p0, costs, best[1], best[2], diverged_episodes=diverged)
    report.train_mean, report.train_std = evaluate(plant, final, train_refs, lim, T, hyper.weights)
    return report, final
