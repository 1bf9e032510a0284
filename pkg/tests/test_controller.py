import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from pidtune.autodiff import Tape, backward
from pidtune.controller import (
    ControllerState,
    DynamicPidController,
    GainNetwork,
    PidController,
    PidGains,
    SaturationLimits,
    dynamic_gains,
    pid_step,
)
from pidtune.lti import TransferFunction, discretize_tf
from pidtune.simloop import ReferenceSignal, RolloutConfig, rollout

LIM = SaturationLimits(-1.5, 1.5)


def test_zero_gains_leave_state_unchanged():
    s = ControllerState()
    s2, u, v = pid_step(PidGains(), s, 1.0, 0.0, LIM)
    assert u == 0.0 and v == 0.0
    assert s2 == s


def test_hand_evaluated_backcalc_step():
    g = PidGains(k_p=2, k_i=1, k_d=0, b=0.5)
    s2, u, v = pid_step(g, ControllerState(), 1.0, 0.0, LIM)
    assert v == 2.0
    assert u == 1.5
    assert s2.I == 0.75


@pytest.mark.parametrize("b", [0.0, 0.3, -2.0, 7.5])
def test_backcalc_term_vanishes_inside_limits(b):
    g = PidGains(k_p=0.5, k_i=0.7, b=b)
    s = ControllerState(I=0.2)
    s2, u, v = pid_step(g, s, 1.0, 0.4, LIM)
    assert u == v
    assert s2.I == 0.2 + 0.7 * (1.0 - 0.4)


def test_derivative_on_measurement_and_filter():
    g = PidGains(k_d=2.0, alpha=0.5)
    s = ControllerState(D_prev=1.0, y_prev=0.25)
    s2, _, v = pid_step(g, s, 0.0, 0.75, SaturationLimits.unbounded(), dt=0.5)
    # 0.5 * 1.0 - 2.0 * (0.75 - 0.25) / 0.5
    assert s2.D_prev == pytest.approx(-1.5)
    assert s2.y_prev == 0.75


def test_validation():
    with pytest.raises(ValueError):
        PidGains(alpha=1.0)
    with pytest.raises(ValueError):
        SaturationLimits(1.0, 1.0)
    with pytest.raises(ValueError):
        PidController(PidGains(), active=("k_x",))


def test_pi_reduces_to_textbook_integrator():
    g = PidGains(k_p=1.3, k_i=0.4)
    s = ControllerState()
    total = 0.0
    rng = np.random.default_rng(0)
    for r, y in rng.normal(size=(50, 2)):
        s, _, _ = pid_step(g, s, r, y, SaturationLimits.unbounded(), dt=0.1)
        total = total + 0.1 * (0.4 * (r - y))
        assert s.I == total


@settings(max_examples=200, deadline=None)
@given(
    st.lists(st.floats(-50, 50), min_size=4, max_size=4),
    st.floats(-100, 100),
    st.floats(-10, 10),
    st.floats(-10, 10),
    st.floats(0, 0.99),
)
def test_output_always_within_limits(gains, I, r, y, alpha):
    g = PidGains(*gains, alpha=alpha)
    _, u, _ = pid_step(g, ControllerState(I=I, y_prev=0.3), r, y, LIM, dt=0.1)
    assert LIM.u_low <= u <= LIM.u_high


def _numpy_mlp(net, e_t, e_a):
    W1 = np.array(net.W1)
    W2 = np.array(net.W2)
    h = np.tanh(np.array([e_t, e_a]) @ W1 + np.array(net.b1))
    return h @ W2 + np.array(net.b2)


BASE = PidGains(10.0, 1.5, 8.0, 0.4)


def test_zero_weights_give_base_gains():
    H, G = 8, 4
    net = GainNetwork(np.zeros((2, H)), np.zeros(H), np.zeros((H, G)), np.zeros(G), BASE)
    for e in [(0.0, 0.0), (3.0, -2.0), (-100.0, 5.0)]:
        assert dynamic_gains(net, *e) == BASE


def test_zero_inputs_zero_biases_give_base_gains():
    rng = np.random.default_rng(1)
    net = GainNetwork(rng.normal(size=(2, 8)), np.zeros(8), rng.normal(size=(8, 4)), np.zeros(4), BASE)
    assert dynamic_gains(net, 0.0, 0.0) == BASE


def test_network_matches_independent_mlp():
    rng = np.random.default_rng(2)
    net = GainNetwork(rng.normal(size=(2, 8)), rng.normal(size=8), rng.normal(size=(8, 4)), rng.normal(size=4), BASE)
    out = _numpy_mlp(net, 0.5, -0.2)
    g = dynamic_gains(net, 0.5, -0.2)
    for name, o in zip(net.gain_names, out):
        expected = BASE.get(name) * (1 + o)
        assert abs(g.get(name) - expected) < 1e-12 * max(1, abs(expected))


def test_network_flat_roundtrip():
    net = GainNetwork.init(BASE, hidden=8, seed=3)
    flat = net.flat()
    assert len(flat) == 2 * 8 + 8 + 8 * 4 + 4
    assert net.with_flat(flat) == net


def test_network_init_is_identity_on_base():
    net = GainNetwork.init(BASE, seed=5)
    assert dynamic_gains(net, 1.7, -0.3) == BASE


def test_network_gradient_matches_finite_differences():
    from pidtune.autodiff import check_gradient

    net = GainNetwork.init(BASE, hidden=4, seed=0, scale=0.5)
    rng = np.random.default_rng(4)
    p0 = list(np.array(net.flat()) + rng.normal(scale=0.2, size=len(net.flat())))

    def f(p):
        g = dynamic_gains(net.with_flat(p), 0.8, -0.4)
        return g.k_p + g.k_i * 2.0 + g.k_d * 0.5 - g.b

    assert check_gradient(f, p0) < 1e-6


SYS2 = discretize_tf(TransferFunction([1], [20, 10, 1]), 0.1)


def test_dynamic_with_zero_output_layer_is_bitwise_static():
    ref = ReferenceSignal(np.full(300, 3.5))
    lim = SaturationLimits(-7, 7)
    static = PidController(BASE)
    dyn = DynamicPidController(GainNetwork.init(BASE, seed=9))
    a = rollout(SYS2, static, ref, RolloutConfig(300), lim)
    b = rollout(SYS2, dyn, ref, RolloutConfig(300), lim)
    assert a.saturated.any()
    assert np.array_equal(a.y, b.y) and np.array_equal(a.u_sat, b.u_sat)
    assert a.cost == b.cost


def test_b_gradient_zero_without_saturation():
    ref = ReferenceSignal(np.full(200, 0.05))
    res = rollout(SYS2, PidController(BASE), ref, RolloutConfig(200, record_tape=True), SaturationLimits(-7, 7))
    assert not res.saturated.any()
    assert res.gradient()[3] == 0.0
