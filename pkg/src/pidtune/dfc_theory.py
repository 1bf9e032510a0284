"""Augmented-state form of PID tuning and its link to disturbance feedback.

The plant state is stacked with its previous value and its running sum,
``X_t = [x_t; x_{t-1}; i_t]`` with ``i_{t+1} = i_t + x_t``, and the outputs
``Y_t = [C x_t; C i_t; C (x_t - x_{t-1})]``.  A sampled PID with ``alpha = 0``
acting on ``-y`` is then the static output feedback ``u_t = -K Y_t`` with
``K = [k_p, k_i dt, k_d / dt]``.

Treating the saturation error ``w^a_t = B' (sat(u_t) - u_t)`` as a
disturbance, back-calculation is a disturbance-feedback policy whose gain is
the same for every lag.  The functions here build these objects and check
the equivalences by simulating both forms side by side.
"""
from __future__ import annotations

from collections import deque
from dataclasses import dataclass, replace
from typing import Sequence

import numpy as np

from .controller import ControllerState, PidGains, SaturationLimits, pid_step
from .lti import DiscreteModel
from .simloop import ReferenceSignal

__all__ = [
    "AugmentedModel",
    "DisturbancePolicy",
    "ZSystem",
    "InstabilityError",
    "build_augmented",
    "pid_output_gain",
    "saturation_disturbance",
    "disturbance_feedback_control",
    "build_z_dynamics",
    "verify_pid_equivalence",
    "verify_backcalc_equivalence",
    "verify_controller_state_form",
    "verify_z_cost_independence",
    "pbh_stabilizable",
    "pbh_detectable",
]


class InstabilityError(ValueError):
    """Disturbance predictor has spectral radius above 1."""


@dataclass(frozen=True)
class AugmentedModel:
    A: np.ndarray  # 3n x 3n
    B: np.ndarray  # 3n x m
    C: np.ndarray  # 3p x 3n
    n: int
    p: int


def build_augmented(A, B, C) -> AugmentedModel:
    A = np.atleast_2d(np.asarray(A, dtype=float))
    B = np.asarray(B, dtype=float)
    B = B.reshape(-1, 1) if B.ndim < 2 else B
    C = np.atleast_2d(np.asarray(C, dtype=float))
    n = A.shape[0]
    p = C.shape[0]
    if A.shape != (n, n) or B.shape[0] != n or C.shape[1] != n:
        raise ValueError(f"inconsistent dimensions A{A.shape} B{B.shape} C{C.shape}")
    I = np.eye(n)
    Z = np.zeros((n, n))
    A_aug = np.block([[A, Z, Z], [I, Z, Z], [I, Z, I]])
    B_aug = np.vstack([B, np.zeros((2 * n, B.shape[1]))])
    Zp = np.zeros((p, n))
    C_aug = np.block([[C, Zp, Zp], [Zp, Zp, C], [C, -C, Zp]])
    return AugmentedModel(A_aug, B_aug, C_aug, n, p)


def pid_output_gain(g: PidGains, dt: float) -> np.ndarray:
    """Row gain K over ``Y_t = [y; C i; delta y]`` so that ``u = -K Y`` is the sampled PID on ``-y``."""
    return np.array([[float(g.k_p), float(g.k_i) * dt, float(g.k_d) / dt]])


def saturation_disturbance(aug: AugmentedModel, u: float, lim: SaturationLimits) -> np.ndarray:
    """``w^a = B' (sat(u) - u)``; zero whenever ``u`` is inside the limits."""
    sat = min(max(u, lim.u_low), lim.u_high)
    return aug.B[:, 0] * (sat - u)


@dataclass(frozen=True)
class DisturbancePolicy:
    """``u_t = -K_c Y_t - sum_l K_d[l-1] w_{t-l}``.

    ``K_d`` holds one gain per lag (scalars act on scalar disturbance
    records).  ``M`` optionally holds the predictor matrices
    ``M^[1..h]`` used by :func:`build_z_dynamics`.
    """

    K_c: np.ndarray
    K_d: tuple
    M: tuple | None = None

    def __post_init__(self):
        if len(self.K_d) < 1:
            raise ValueError("need at least one lag (h >= 1)")
        if self.M is not None and len(self.M) != len(self.K_d):
            raise ValueError("one predictor matrix per lag")

    @property
    def h(self) -> int:
        return len(self.K_d)


def disturbance_feedback_control(policy: DisturbancePolicy, Y, w_history: Sequence) -> float:
    """Policy output; ``w_history[0]`` is ``w_{t-1}``, ``w_history[1]`` is ``w_{t-2}``, ..."""
    if len(w_history) < policy.h:
        raise ValueError(f"need {policy.h} past disturbances, got {len(w_history)}")
    u = -np.dot(np.atleast_1d(policy.K_c).ravel(), np.atleast_1d(Y).ravel())
    K_d = np.asarray(policy.K_d, dtype=float)
    W = np.asarray(w_history[: policy.h], dtype=float)
    if K_d.ndim == 1 and W.ndim == 1:
        return float(u - np.dot(K_d, W))
    for k, w in zip(policy.K_d, W):
        u = u - np.dot(np.atleast_1d(k).ravel(), np.atleast_1d(w).ravel())
    return float(u)


@dataclass(frozen=True)
class ZSystem:
    A: np.ndarray
    B: np.ndarray
    C: np.ndarray
    # rows/cols of the disturbance-history block inside A
    dist: slice


def build_z_dynamics(aug: AugmentedModel, M: Sequence, h: int, tol: float = 1e-9) -> ZSystem:
    """State matrices for ``Z_t = [X_t; w_t; w_{t-1}; ...; w_{t-h}]``.

    ``X`` receives ``w_t`` through an identity block; the newest disturbance
    is predicted as ``w_{t+1} = sum_i M^[i] w_{t+1-i}`` and the older ones
    are shifted down.  Outputs are ``[C' X; all disturbance blocks]``.
    """
    N = aug.A.shape[0]
    if h < 1 or len(M) != h:
        raise ValueError(f"need h >= 1 and exactly h predictor matrices, got h={h}, {len(M)}")
    M = [np.asarray(m, dtype=float) for m in M]
    for m in M:
        if m.shape != (N, N):
            raise ValueError(f"predictor matrices must be {N}x{N}, got {m.shape}")
    nd = (h + 1) * N
    D = np.zeros((nd, nd))
    for i, m in enumerate(M):
        D[:N, i * N : (i + 1) * N] = m
    for j in range(1, h + 1):
        D[j * N : (j + 1) * N, (j - 1) * N : j * N] = np.eye(N)
    rho = max(abs(np.linalg.eigvals(D))) if nd else 0.0
    if rho > 1.0 + tol:
        raise InstabilityError(f"disturbance predictor spectral radius {rho:.6g} > 1")
    A = np.zeros((N + nd, N + nd))
    A[:N, :N] = aug.A
    A[:N, N : 2 * N] = np.eye(N)
    A[N:, N:] = D
    B = np.vstack([aug.B, np.zeros((nd, aug.B.shape[1]))])
    q = aug.C.shape[0]
    C = np.zeros((q + nd, N + nd))
    C[:q, :N] = aug.C
    C[q:, N:] = np.eye(nd)
    return ZSystem(A, B, C, slice(N, N + nd))


def _plant_mats(plant: DiscreteModel):
    return plant.A_d, plant.B_d[:, 0], plant.C[0]


def _default_x0(n: int) -> np.ndarray:
    return np.ones(n)


def verify_pid_equivalence(gains: PidGains, plant: DiscreteModel, T: int, x0=None) -> float:
    """Max output deviation between the PID loop and ``u = -K Y`` on the augmented model.

    Regulation (r = 0) from a nonzero plant state, no saturation.
    """
    if gains.alpha != 0.0:
        raise ValueError("output-feedback form requires alpha = 0")
    A, B, C = _plant_mats(plant)
    n = A.shape[0]
    x0 = _default_x0(n) if x0 is None else np.asarray(x0, dtype=float)
    aug = build_augmented(plant.A_d, plant.B_d, plant.C)
    K = pid_output_gain(gains, plant.dt)[0]
    lim = SaturationLimits.unbounded()
    dt = plant.dt

    x = x0.copy()
    s = ControllerState()
    fifo = deque([0.0] * plant.delay_steps)
    y_direct = np.empty(T)
    for t in range(T):
        y = float(C @ x)
        y_direct[t] = y
        s, u, _ = pid_step(gains, s, 0.0, y, lim, dt)
        if fifo:
            fifo.append(u)
            u = fifo.popleft()
        x = A @ x + B * u

    X = np.concatenate([x0, np.zeros(2 * n)])
    fifo = deque([0.0] * plant.delay_steps)
    y_aug = np.empty(T)
    for t in range(T):
        Y = aug.C @ X
        y_aug[t] = Y[0]
        u = -float(K @ Y)
        if fifo:
            fifo.append(u)
            u = fifo.popleft()
        X = aug.A @ X + aug.B[:, 0] * u
    return float(np.max(np.abs(y_direct - y_aug)))


def verify_controller_state_form(gains: PidGains, plant: DiscreteModel, T: int, x0=None) -> float:
    """Filtered-derivative PID (alpha != 0) as ``X^c_{t+1} = alpha X^c_t + K_b Y_t``,
    ``u_t = -K_x X^c_t - K Y_t``; returns max output deviation from the PID loop."""
    A, B, C = _plant_mats(plant)
    n = A.shape[0]
    dt = plant.dt
    x0 = _default_x0(n) if x0 is None else np.asarray(x0, dtype=float)
    aug = build_augmented(plant.A_d, plant.B_d, plant.C)
    K = pid_output_gain(gains, dt)[0]
    K_b = np.array([0.0, 0.0, -float(gains.k_d) / dt])
    K_x = -gains.alpha
    lim = SaturationLimits.unbounded()

    x = x0.copy()
    s = ControllerState()
    y_direct = np.empty(T)
    fifo = deque([0.0] * plant.delay_steps)
    for t in range(T):
        y = float(C @ x)
        y_direct[t] = y
        s, u, _ = pid_step(gains, s, 0.0, y, lim, dt)
        if fifo:
            fifo.append(u)
            u = fifo.popleft()
        x = A @ x + B * u

    X = np.concatenate([x0, np.zeros(2 * n)])
    Xc = 0.0
    y_cs = np.empty(T)
    fifo = deque([0.0] * plant.delay_steps)
    for t in range(T):
        Y = aug.C @ X
        y_cs[t] = Y[0]
        u = -K_x * Xc - float(K @ Y)
        Xc = gains.alpha * Xc + float(K_b @ Y)
        if fifo:
            fifo.append(u)
            u = fifo.popleft()
        X = aug.A @ X + aug.B[:, 0] * u
    return float(np.max(np.abs(y_direct - y_cs)))


def verify_backcalc_equivalence(
    gains: PidGains,
    plant: DiscreteModel,
    reference: ReferenceSignal | Sequence[float],
    lim: SaturationLimits,
    T: int,
) -> float:
    """Max input deviation between back-calculation and plain PID plus disturbance feedback.

    The second loop runs the PID with ``b = 0`` and adds
    ``b dt sum_{tau < t} (sat(v_tau) - v_tau)``, i.e. a disturbance-feedback
    policy with the same gain ``-b dt`` at every lag over the whole horizon.
    The saturation errors are recovered from the actuator model.
    """
    if gains.alpha != 0.0:
        raise ValueError("equivalence is stated for alpha = 0")
    r = reference.samples if isinstance(reference, ReferenceSignal) else np.asarray(reference, dtype=float)
    A, B, C = _plant_mats(plant)
    n = A.shape[0]
    dt = plant.dt

    def run(control):
        x = np.zeros(n)
        fifo = deque([0.0] * plant.delay_steps)
        us = np.empty(T)
        for t in range(T):
            y = float(C @ x)
            u = control(t, y)
            us[t] = u
            if fifo:
                fifo.append(u)
                u = fifo.popleft()
            x = A @ x + B * u
        return us

    state = {"s": ControllerState()}

    def backcalc(t, y):
        state["s"], u, _ = pid_step(gains, state["s"], float(r[t]), y, lim, dt)
        return u

    u_a = run(backcalc)

    plain = replace(gains, b=0.0)
    unbounded = SaturationLimits.unbounded()
    policy = DisturbancePolicy(K_c=np.zeros(1), K_d=tuple([-float(gains.b) * dt] * T))
    history: list[float] = []  # newest first
    ps = {"s": ControllerState()}

    def dfc(t, y):
        ps["s"], _, v_pid = pid_step(plain, ps["s"], float(r[t]), y, unbounded, dt)
        padded = history + [0.0] * (policy.h - len(history))
        v = v_pid + disturbance_feedback_control(policy, 0.0, padded)
        u = min(max(v, lim.u_low), lim.u_high)
        history.insert(0, u - v)
        return u

    u_b = run(dfc)
    return float(np.max(np.abs(u_a - u_b)))


def verify_z_cost_independence(
    gains: PidGains, plant: DiscreteModel, T: int, predictors: Sequence[Sequence], x0=None, Q: float = 1.0
) -> float:
    """Spread of the output cost across predictor choices on the Z system.

    Regulation without saturation: the disturbance blocks are driven by the
    recovered saturation error (identically zero), so the plant-output cost
    must not depend on ``M``.  Returns max |cost(M) - cost(augmented loop)|.
    """
    aug = build_augmented(plant.A_d, plant.B_d, plant.C)
    n = plant.order
    N = 3 * n
    K = pid_output_gain(gains, plant.dt)[0]
    x0 = _default_x0(n) if x0 is None else np.asarray(x0, dtype=float)
    lim = SaturationLimits.unbounded()

    def ref_cost():
        X = np.concatenate([x0, np.zeros(2 * n)])
        c = 0.0
        fifo = deque([0.0] * plant.delay_steps)
        for _ in range(T):
            Y = aug.C @ X
            c += Q * Y[0] ** 2
            u = -float(K @ Y)
            if fifo:
                fifo.append(u)
                u = fifo.popleft()
            X = aug.A @ X + aug.B[:, 0] * u
        return c

    base = ref_cost()
    worst = 0.0
    for M in predictors:
        h = len(M)
        zs = build_z_dynamics(aug, M, h)
        Z = np.zeros(zs.A.shape[0])
        Z[:n] = x0
        c = 0.0
        fifo = deque([0.0] * plant.delay_steps)
        for _ in range(T):
            Yz = zs.C @ Z
            c += Q * Yz[0] ** 2
            u = -float(K @ Yz[:3])
            if fifo:
                fifo.append(u)
                u = fifo.popleft()
            Z = zs.A @ Z + zs.B[:, 0] * u
            # overwrite the predicted newest disturbance with the recovered one
            Z[N : 2 * N] = saturation_disturbance(aug, u, lim)
        worst = max(worst, abs(c - base))
    return worst


def _pbh(A, Bc, tol, marginal, transpose):
    A = np.asarray(A, dtype=float)
    n = A.shape[0]
    for lam in np.linalg.eigvals(A):
        mag = abs(lam)
        unstable = mag > 1.0 + tol if marginal else mag >= 1.0 - tol
        if not unstable:
            continue
        if transpose:
            Mx = np.vstack([A - lam * np.eye(n), Bc])
        else:
            Mx = np.hstack([A - lam * np.eye(n), Bc])
        if np.linalg.matrix_rank(Mx, tol=1e-8 * max(1.0, np.linalg.norm(Mx))) < n:
            return False
    return True


def pbh_stabilizable(A, B, marginal: bool = False, tol: float = 1e-9) -> bool:
    """PBH test at every eigenvalue with ``|lambda| >= 1``.

    With ``marginal=True`` only modes strictly outside the unit circle must
    be controllable (uncontrollable modes on the circle are tolerated).
    """
    B = np.asarray(B, dtype=float)
    return _pbh(A, B.reshape(len(A), -1), tol, marginal, False)


def pbh_detectable(A, C, marginal: bool = False, tol: float = 1e-9) -> bool:
    C = np.atleast_2d(np.asarray(C, dtype=float))
    return _pbh(A, C, tol, marginal, True)
