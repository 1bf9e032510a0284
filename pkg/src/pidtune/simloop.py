"""Closed-loop episodic rollouts, costs and reference signals."""
from __future__ import annotations

from collections import deque
from dataclasses import dataclass, field
from typing import Sequence

import numpy as np

from .autodiff import DiffScalar, Tape, backward, lincomb, square, value_of
from .controller import SaturationLimits
from .lti import DiscreteModel

__all__ = [
    "DIVERGENCE_LIMIT",
    "RolloutDiverged",
    "ReferenceSignal",
    "RolloutConfig",
    "CostWeights",
    "RolloutResult",
    "rollout",
    "cost",
    "generate_references",
    "split_references",
]

DIVERGENCE_LIMIT = 1e9
REFERENCE_KINDS = ("step", "switching", "ramp")


class RolloutDiverged(ArithmeticError):
    def __init__(self, step: int, value: float):
        super().__init__(f"rollout diverged at step {step} (|y| = {abs(value):.3g})")
        self.step = step
        self.value = value


@dataclass(frozen=True)
class ReferenceSignal:
    samples: np.ndarray
    kind: str = "step"

    def __post_init__(self):
        object.__setattr__(self, "samples", np.asarray(self.samples, dtype=float))

    def __len__(self):
        return len(self.samples)

    def scaled(self, c: float) -> ReferenceSignal:
        return ReferenceSignal(self.samples * c, self.kind)


@dataclass(frozen=True)
class CostWeights:
    Q: float = 1.0
    R: float = 0.0

    def __post_init__(self):
        if self.Q < 0 or self.R < 0 or self.Q + self.R <= 0:
            raise ValueError(f"need Q >= 0, R >= 0, Q + R > 0; got Q={self.Q}, R={self.R}")


@dataclass(frozen=True)
class RolloutConfig:
    horizon: int
    record_tape: bool = False
    weights: CostWeights = field(default_factory=CostWeights)

    def __post_init__(self):
        if self.horizon < 1:
            raise ValueError("horizon must be >= 1")


@dataclass
class RolloutResult:
    r: np.ndarray
    y: np.ndarray
    u_sat: np.ndarray
    v: np.ndarray
    saturated: np.ndarray
    cost: object = None
    # taped signals and parameter leaves; None for plain float rollouts
    tape: Tape | None = None
    params: list | None = None
    y_trace: list | None = field(default=None, repr=False)
    u_trace: list | None = field(default=None, repr=False)

    def __len__(self):
        return len(self.y)

    @property
    def cost_value(self) -> float:
        return float(value_of(self.cost))

    def gradient(self) -> np.ndarray:
        """d(cost)/d(parameters), in the controller's parameter order."""
        if self.tape is None:
            raise ValueError("rollout was not taped")
        if not isinstance(self.cost, DiffScalar) or self.cost.node is None:
            return np.zeros(len(self.params))
        g = backward(self.tape, self.cost)
        return np.array([g[p.node] for p in self.params])

    @classmethod
    def empty(cls) -> RolloutResult:
        z = np.zeros(0)
        return cls(z, z, z, z, np.zeros(0, dtype=bool), 0.0)


def rollout(
    plant: DiscreteModel,
    controller,
    reference: ReferenceSignal,
    cfg: RolloutConfig,
    lim: SaturationLimits,
    x0: Sequence[float] | None = None,
) -> RolloutResult:
    """Simulate plant + controller for ``cfg.horizon`` steps.

    Per step: ``y_t = C x_t``; the controller maps ``(r_t, y_t)`` to
    ``(u_t, v_t)``; ``u_t`` enters the input delay line and the plant is
    advanced with the delayed input.  With ``cfg.record_tape`` the
    controller's parameters become leaves of a fresh tape and the returned
    cost is differentiable with respect to them (see
    :meth:`RolloutResult.gradient`).
    """
    T = cfg.horizon
    r = reference.samples
    if len(r) < T:
        raise ValueError(f"reference has {len(r)} samples, horizon is {T}")
    tape = None
    params = None
    if cfg.record_tape:
        tape = Tape()
        params = [tape.var(p) for p in controller.parameters()]
        controller = controller.bind(params)
    n = plant.order
    x = [0.0] * n if x0 is None else [float(v) for v in x0]
    if len(x) != n:
        raise ValueError(f"x0 has dimension {len(x)}, plant order is {n}")
    c_row = plant._c
    rows = plant._rows
    lo, hi = lim.u_low, lim.u_high
    fifo = deque([0.0] * plant.delay_steps)
    dt = plant.dt
    state = controller.initial_state()
    ys, us, vs = [], [], []
    for t in range(T):
        y = lincomb(c_row, x)
        yv = value_of(y)
        if not -DIVERGENCE_LIMIT <= yv <= DIVERGENCE_LIMIT:
            raise RolloutDiverged(t, yv)
        state, u, v = controller.step(state, float(r[t]), y, lim, dt)
        ys.append(y)
        us.append(u)
        vs.append(v)
        if fifo:
            fifo.append(u)
            u = fifo.popleft()
        x.append(u)
        x = [lincomb(row, x) for row in rows]
    y_arr = np.array([value_of(a) for a in ys])
    u_arr = np.array([value_of(a) for a in us])
    v_arr = np.array([value_of(a) for a in vs])
    sat = ~((v_arr > lo) & (v_arr < hi))
    res = RolloutResult(r[:T].copy(), y_arr, u_arr, v_arr, sat, None, tape, params, ys, us)
    res.cost = cost(res, reference, cfg.weights)
    return res


def cost(res: RolloutResult, reference, w: CostWeights = CostWeights()):
    """``sum_t Q (y_t - r_t)^2 + R u_t^2``; taped when the rollout was."""
    ys = res.y_trace if res.y_trace is not None else res.y
    us = res.u_trace if res.u_trace is not None else res.u_sat
    r = reference.samples if isinstance(reference, ReferenceSignal) else np.asarray(reference, dtype=float)
    if len(r) < len(ys):
        raise ValueError("reference shorter than rollout")
    terms = [square(y - float(rt)) for y, rt in zip(ys, r)]
    coeffs = [w.Q] * len(terms)
    if w.R != 0.0:
        terms += [square(u) for u in us]
        coeffs += [w.R] * len(us)
    return lincomb(coeffs, terms)


def generate_references(kind: str, limit: float, count: int, T: int, seed: int) -> list[ReferenceSignal]:
    """Random reference signals with amplitudes uniform in ``[-limit, limit]``.

    * ``step``: one amplitude held from t = 0.
    * ``switching``: a fresh amplitude every ``T // 5`` steps.
    * ``ramp``: linear from 0 to the amplitude at the last sample.
    """
    if kind not in REFERENCE_KINDS:
        raise ValueError(f"unknown reference kind {kind!r}; expected one of {REFERENCE_KINDS}")
    if count < 1 or not limit > 0 or T < 1:
        raise ValueError("need count >= 1, limit > 0, T >= 1")
    rng = np.random.default_rng(seed)
    refs = []
    for _ in range(count):
        if kind == "step":
            s = np.full(T, rng.uniform(-limit, limit))
        elif kind == "switching":
            period = max(1, T // 5)
            n_seg = -(-T // period)
            amps = rng.uniform(-limit, limit, size=n_seg)
            s = np.repeat(amps, period)[:T]
        else:
            a = rng.uniform(-limit, limit)
            s = a * np.arange(1, T + 1) / T
        refs.append(ReferenceSignal(s, kind))
    return refs


def split_references(refs: Sequence[ReferenceSignal], n_train: int = 20):
    """First ``n_train`` signals for training, the rest for testing."""
    return list(refs[:n_train]), list(refs[n_train:])
