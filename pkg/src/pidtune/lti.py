"""SISO plant models: transfer function, state space, ZOH discretization."""
from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import Sequence

import numpy as np

from .autodiff import lincomb

__all__ = [
    "TransferFunction",
    "StateSpaceModel",
    "DiscreteModel",
    "tf_to_ss",
    "expm",
    "zoh_discretize",
    "step_plant",
    "discretize_tf",
]


@dataclass(frozen=True)
class TransferFunction:
    """``num(s)/den(s) * exp(-delay*s)``; coefficients in descending powers of s."""

    num: tuple[float, ...]
    den: tuple[float, ...]
    delay: float = 0.0

    def __post_init__(self):
        num = tuple(float(c) for c in np.atleast_1d(self.num))
        den = tuple(float(c) for c in np.atleast_1d(self.den))
        # strip leading zeros of the numerator so the degree check is meaningful
        while len(num) > 1 and num[0] == 0.0:
            num = num[1:]
        if not den or den[0] == 0.0:
            raise ValueError("denominator leading coefficient must be nonzero")
        if len(num) > len(den):
            raise ValueError(
                f"improper transfer function: deg(num)={len(num) - 1} > deg(den)={len(den) - 1}"
            )
        if not self.delay >= 0.0:
            raise ValueError(f"delay must be >= 0, got {self.delay}")
        object.__setattr__(self, "num", num)
        object.__setattr__(self, "den", den)
        object.__setattr__(self, "delay", float(self.delay))

    def __call__(self, s: complex) -> complex:
        """Rational part evaluated at ``s`` (delay excluded)."""
        return np.polyval(self.num, s) / np.polyval(self.den, s)

    @property
    def dc_gain(self) -> float:
        return self.num[-1] / self.den[-1]


@dataclass(frozen=True)
class StateSpaceModel:
    A: np.ndarray
    B: np.ndarray
    C: np.ndarray
    D: float = 0.0
    delay: float = 0.0
    continuous: bool = True

    def __post_init__(self):
        A = np.atleast_2d(np.asarray(self.A, dtype=float))
        n = A.shape[0]
        B = np.asarray(self.B, dtype=float).reshape(-1, 1)
        C = np.asarray(self.C, dtype=float).reshape(1, -1)
        if A.shape != (n, n) or B.shape[0] != n or C.shape[1] != n:
            raise ValueError(f"inconsistent dimensions A{A.shape} B{B.shape} C{C.shape}")
        object.__setattr__(self, "A", A)
        object.__setattr__(self, "B", B)
        object.__setattr__(self, "C", C)

    @property
    def order(self) -> int:
        return self.A.shape[0]

    def transfer(self, s: complex) -> complex:
        n = self.order
        return complex((self.C @ np.linalg.solve(s * np.eye(n) - self.A, self.B))[0, 0] + self.D)


@dataclass(frozen=True)
class DiscreteModel:
    """ZOH-sampled plant with an integer input delay.

    ``x[t+1] = A_d x[t] + B_d u[t - delay_steps]`` and ``y[t] = C x[t]``.
    """

    A_d: np.ndarray
    B_d: np.ndarray
    C: np.ndarray
    dt: float
    delay_steps: int = 0
    _rows: tuple = field(init=False, repr=False, compare=False)
    _c: tuple = field(init=False, repr=False, compare=False)

    def __post_init__(self):
        if not self.dt > 0:
            raise ValueError(f"dt must be positive, got {self.dt}")
        if self.delay_steps < 0:
            raise ValueError("delay_steps must be >= 0")
        A = np.atleast_2d(np.asarray(self.A_d, dtype=float))
        B = np.asarray(self.B_d, dtype=float).reshape(-1, 1)
        C = np.asarray(self.C, dtype=float).reshape(1, -1)
        n = A.shape[0]
        if A.shape != (n, n) or B.shape[0] != n or C.shape[1] != n:
            raise ValueError(f"inconsistent dimensions A{A.shape} B{B.shape} C{C.shape}")
        object.__setattr__(self, "A_d", A)
        object.__setattr__(self, "B_d", B)
        object.__setattr__(self, "C", C)
        # plain-float rows for the scalar (taped) simulation path
        rows = tuple(tuple(float(a) for a in A[i]) + (float(B[i, 0]),) for i in range(n))
        object.__setattr__(self, "_rows", rows)
        object.__setattr__(self, "_c", tuple(float(c) for c in C[0]))

    @property
    def order(self) -> int:
        return self.A_d.shape[0]


def tf_to_ss(tf: TransferFunction) -> StateSpaceModel:
    """Controllable canonical realization.

    With the denominator normalized to ``s^n + a_{n-1} s^{n-1} + ... + a_0``,
    ``A`` is the companion matrix whose last row is ``-a_0 ... -a_{n-1}``,
    ``B = e_n`` and ``C`` holds the numerator coefficients in ascending
    powers.  A biproper transfer function gets a feedthrough ``D``.
    """
    den = np.asarray(tf.den) / tf.den[0]
    num = np.asarray(tf.num) / tf.den[0]
    n = len(den) - 1
    if n == 0:
        raise ValueError("static gain has no state-space realization with states")
    num = np.concatenate([np.zeros(n + 1 - len(num)), num])
    d = num[0]
    # strictly proper remainder: num - d*den
    rem = num - d * den
    A = np.zeros((n, n))
    A[:-1, 1:] = np.eye(n - 1)
    A[-1, :] = -den[1:][::-1]
    B = np.zeros((n, 1))
    B[-1, 0] = 1.0
    C = rem[1:][::-1].reshape(1, n)
    return StateSpaceModel(A, B, C, D=float(d), delay=tf.delay)


def expm(M: np.ndarray, order: int = 18) -> np.ndarray:
    """Matrix exponential by scaling and squaring with a truncated Taylor series.

    ``M`` is scaled by ``2**-s`` so its 1-norm is below 0.5, the series is
    summed to ``order`` terms and the result squared ``s`` times.
    """
    M = np.asarray(M, dtype=float)
    norm = np.linalg.norm(M, 1)
    s = 0
    if norm > 0.5:
        s = int(math.ceil(math.log2(norm / 0.5)))
    X = M / (2.0**s)
    n = M.shape[0]
    E = np.eye(n)
    term = np.eye(n)
    for k in range(1, order + 1):
        term = term @ X / k
        E = E + term
    for _ in range(s):
        E = E @ E
    return E


def zoh_discretize(ss: StateSpaceModel, dt: float) -> DiscreteModel:
    """Exact zero-order-hold sampling via the block exponential of ``[[A, B], [0, 0]]``."""
    if not dt > 0:
        raise ValueError(f"dt must be positive, got {dt}")
    ratio = ss.delay / dt
    delay_steps = int(round(ratio))
    if abs(ratio - delay_steps) > 1e-9:
        raise ValueError(
            f"delay {ss.delay} s is not an integer multiple of dt={dt}; "
            f"choose dt = {ss.delay}/k for a positive integer k"
        )
    if ss.D != 0.0:
        raise ValueError("feedthrough D != 0 would create an algebraic loop with the controller")
    n = ss.order
    blk = np.zeros((n + 1, n + 1))
    blk[:n, :n] = ss.A
    blk[:n, n:] = ss.B
    E = expm(blk * dt)
    return DiscreteModel(E[:n, :n], E[:n, n:], ss.C, dt, delay_steps)


def discretize_tf(tf: TransferFunction, dt: float) -> DiscreteModel:
    return zoh_discretize(tf_to_ss(tf), dt)


def step_plant(m: DiscreteModel, x: Sequence, u):
    """One sample of the plant: returns ``(x_next, y)`` with ``y = C x`` taken before the update.

    ``u`` is the already saturated and already delayed input.  Elements of
    ``x`` and ``u`` may be floats or DiffScalars.
    """
    if len(x) != len(m._rows):
        raise ValueError(f"state has dimension {len(x)}, plant order is {len(m._rows)}")
    y = lincomb(m._c, x)
    xu = list(x)
    xu.append(u)
    x_next = [lincomb(row, xu) for row in m._rows]
    return x_next, y
