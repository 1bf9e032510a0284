"""Back-calculation PID controller with static or network-scheduled gains.

Gains are continuous-time gains; the controller is sampled with period
``dt`` using forward Euler for the integrator and a backward difference for
the derivative::

    P_t     = k_p (r_t - y_t)
    D_t     = alpha D_{t-1} - k_d (y_t - y_{t-1}) / dt
    v_t     = P_t + I_t + D_t
    u_t     = clamp(v_t, u_low, u_high)
    I_{t+1} = I_t + dt (k_i (r_t - y_t) + b (u_t - v_t))

The derivative acts on the measurement with the classical negative sign.
With ``dt = 1`` these are the plain per-sample recursions.
"""
from __future__ import annotations

import math
from dataclasses import dataclass, field, replace
from typing import Sequence

import numpy as np

from .autodiff import DiffScalar, NumericError, clamp, dot, tanh, value_of

__all__ = [
    "GAIN_NAMES",
    "PidGains",
    "SaturationLimits",
    "ControllerState",
    "pid_step",
    "PidController",
    "GainNetwork",
    "dynamic_gains",
    "DynamicPidController",
]

GAIN_NAMES = ("k_p", "k_i", "k_d", "b")


@dataclass(frozen=True)
class PidGains:
    k_p: object = 0.0
    k_i: object = 0.0
    k_d: object = 0.0
    b: object = 0.0
    alpha: float = 0.0

    def __post_init__(self):
        if not 0.0 <= self.alpha < 1.0:
            raise ValueError(f"alpha must lie in [0, 1), got {self.alpha}")

    def get(self, name: str):
        return getattr(self, name)

    def floats(self) -> PidGains:
        return PidGains(*(float(value_of(self.get(n))) for n in GAIN_NAMES), alpha=self.alpha)


@dataclass(frozen=True)
class SaturationLimits:
    u_low: float
    u_high: float

    def __post_init__(self):
        if not self.u_low < self.u_high:
            raise ValueError(f"u_low must be < u_high, got {self.u_low} >= {self.u_high}")

    @classmethod
    def unbounded(cls, big: float = 1e12) -> SaturationLimits:
        return cls(-big, big)

    def saturated(self, v: float) -> bool:
        return not (self.u_low < v < self.u_high)


@dataclass(frozen=True)
class ControllerState:
    I: object = 0.0
    D_prev: object = 0.0
    y_prev: object = 0.0
    # u_t - v_t from the previous step, fed to the gain network
    sat_err: object = 0.0


def _check(name, x):
    val = value_of(x)
    if not math.isfinite(val):
        raise NumericError(f"pid_step:{name}", val)


def pid_step(g: PidGains, s: ControllerState, r, y, lim: SaturationLimits, dt: float = 1.0):
    """One controller update; returns ``(next_state, u_sat, v)``.

    Works on floats and on DiffScalars alike.
    """
    e = r - y
    P = g.k_p * e
    k_d = g.k_d
    if g.alpha == 0.0 and not isinstance(k_d, DiffScalar) and k_d == 0.0:
        D = None
    else:
        D = -(k_d * (y - s.y_prev)) / dt
        if g.alpha != 0.0:
            D = g.alpha * s.D_prev + D
    v = P + s.I
    if D is not None:
        v = v + D
    _check("v", v)
    u = clamp(v, lim.u_low, lim.u_high)
    sat_err = u - v
    I_next = s.I + dt * (g.k_i * e + g.b * sat_err)
    _check("I", I_next)
    return ControllerState(I_next, 0.0 if D is None else D, y, sat_err), u, v


class PidController:
    """Static-gain back-calculation PID.

    ``active`` names the gains exposed as tunable parameters; the others stay
    fixed (a PI controller leaves ``k_d`` out).
    """

    def __init__(self, gains: PidGains, active: Sequence[str] = GAIN_NAMES):
        for a in active:
            if a not in GAIN_NAMES:
                raise ValueError(f"unknown gain {a!r}")
        self.gains = gains
        self.active = tuple(active)

    def __repr__(self):
        return f"PidController({self.gains}, active={self.active})"

    def parameter_names(self) -> tuple[str, ...]:
        return self.active

    def parameters(self) -> np.ndarray:
        return np.array([float(value_of(self.gains.get(n))) for n in self.active])

    def bind(self, values: Sequence) -> PidController:
        """Copy with the active gains replaced by ``values`` (floats or DiffScalars)."""
        return PidController(replace(self.gains, **dict(zip(self.active, values))), self.active)

    def initial_state(self) -> ControllerState:
        return ControllerState()

    def step(self, state, r, y, lim, dt):
        return pid_step(self.gains, state, r, y, lim, dt)


@dataclass(frozen=True)
class GainNetwork:
    """2 -> H tanh -> G linear MLP scaling a set of base gains.

    Input is ``(r_t - y_t, u_{t-1} - v_{t-1})``; the gains applied at step t
    are ``base * (1 + out)``.  ``W1[i][j]`` connects input i to hidden j,
    ``W2[j][k]`` hidden j to output k.
    """

    W1: tuple
    b1: tuple
    W2: tuple
    b2: tuple
    base: PidGains
    gain_names: tuple[str, ...] = ("k_p", "k_i", "k_d", "b")
    _cols: tuple = field(init=False, repr=False, compare=False)

    def __post_init__(self):
        W1 = tuple(tuple(row) for row in self.W1)
        W2 = tuple(tuple(row) for row in self.W2)
        H, G = len(self.b1), len(self.b2)
        if len(W1) != 2 or any(len(row) != H for row in W1):
            raise ValueError("W1 must be 2 x H")
        if len(W2) != H or any(len(row) != G for row in W2):
            raise ValueError("W2 must be H x G")
        if G != len(self.gain_names):
            raise ValueError("one network output per scheduled gain")
        object.__setattr__(self, "W1", W1)
        object.__setattr__(self, "W2", W2)
        object.__setattr__(self, "b1", tuple(self.b1))
        object.__setattr__(self, "b2", tuple(self.b2))
        # weights feeding hidden unit j (bias last), and output k (bias last)
        hid = tuple((W1[0][j], W1[1][j], self.b1[j]) for j in range(H))
        out = tuple(tuple(W2[j][k] for j in range(H)) + (self.b2[k],) for k in range(G))
        object.__setattr__(self, "_cols", (hid, out))

    @property
    def hidden(self) -> int:
        return len(self.b1)

    @classmethod
    def init(cls, base: PidGains, gain_names=GAIN_NAMES, hidden: int = 8, seed: int = 0, scale: float = 0.1):
        """Random hidden layer, zero output layer: the network starts as the identity on ``base``."""
        rng = np.random.default_rng(seed)
        G = len(gain_names)
        W1 = rng.normal(0.0, scale, size=(2, hidden))
        b1 = rng.normal(0.0, scale, size=hidden)
        return cls(W1.tolist(), b1.tolist(), np.zeros((hidden, G)).tolist(), [0.0] * G, base, tuple(gain_names))

    def flat(self) -> list:
        p = [w for row in self.W1 for w in row]
        p += list(self.b1)
        p += [w for row in self.W2 for w in row]
        p += list(self.b2)
        return p

    def with_flat(self, p: Sequence) -> GainNetwork:
        H, G = self.hidden, len(self.b2)
        p = list(p)
        i = 0
        W1 = [p[i : i + H], p[i + H : i + 2 * H]]
        i += 2 * H
        b1 = p[i : i + H]
        i += H
        W2 = [p[i + j * G : i + (j + 1) * G] for j in range(H)]
        i += H * G
        b2 = p[i : i + G]
        return GainNetwork(W1, b1, W2, b2, self.base, self.gain_names)


def dynamic_gains(net: GainNetwork, e_track, e_act) -> PidGains:
    hid, out = net._cols
    x = (e_track, e_act, 1.0)
    h = [tanh(dot(w, x)) for w in hid]
    h.append(1.0)
    scaled = {}
    for name, w in zip(net.gain_names, out):
        o = dot(w, h)
        if not math.isfinite(value_of(o)):
            raise NumericError("dynamic_gains", value_of(o))
        scaled[name] = net.base.get(name) * (1.0 + o)
    return replace(net.base, **scaled)


class DynamicPidController:
    """PID whose gains are recomputed every step by a :class:`GainNetwork`."""

    def __init__(self, net: GainNetwork):
        self.net = net

    def parameter_names(self) -> tuple[str, ...]:
        H, G = self.net.hidden, len(self.net.b2)
        names = [f"W1[{i}][{j}]" for i in range(2) for j in range(H)]
        names += [f"b1[{j}]" for j in range(H)]
        names += [f"W2[{j}][{k}]" for j in range(H) for k in range(G)]
        names += [f"b2[{k}]" for k in range(G)]
        return tuple(names)

    def parameters(self) -> np.ndarray:
        return np.array([float(value_of(w)) for w in self.net.flat()])

    def bind(self, values: Sequence) -> DynamicPidController:
        return DynamicPidController(self.net.with_flat(values))

    def initial_state(self) -> ControllerState:
        return ControllerState()

    def step(self, state, r, y, lim, dt):
        g = dynamic_gains(self.net, r - y, state.sat_err)
        return pid_step(g, state, r, y, lim, dt)
