import math

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from pidtune.autodiff import (
    DiffScalar,
    NumericError,
    Tape,
    TapeError,
    apply,
    backward,
    check_gradient,
    clamp,
    dot,
    lincomb,
    square,
    tanh,
)


def test_mul_value_and_partials():
    tape = Tape()
    x, y = tape.var(2.0), tape.var(3.0)
    f = apply("mul", x, y)
    assert f.value == 6.0
    assert tape.partials[f.node] == (3.0, 2.0)
    g = backward(tape, f)
    assert g[x.node] == 3.0 and g[y.node] == 2.0


@pytest.mark.parametrize(
    "x, value, partial",
    [(2.0, 1.0, 0.0), (0.5, 0.5, 1.0), (-3.0, -1.0, 0.0), (1.0, 1.0, 0.0), (-1.0, -1.0, 0.0)],
)
def test_clamp(x, value, partial):
    tape = Tape()
    v = tape.var(x)
    c = apply("clamp", v, lo=-1.0, hi=1.0)
    assert c.value == value
    assert backward(tape, c)[v.node] == partial


def test_clamp_rejects_inverted_bounds():
    with pytest.raises(ValueError):
        clamp(0.0, 1.0, -1.0)


def test_tanh_expression_matches_finite_differences():
    def f(p):
        x, w = p
        return tanh(x * w) + square(x)

    assert check_gradient(f, [0.3, 1.7], 1e-6) < 1e-6


def test_all_ops_against_finite_differences():
    def f(p):
        a, b = p
        out = (a - b) / (b + 3.0) - (-a) * 0.5
        out = out + apply("relu", a) + 2.0 / b + 1.0 - a
        return lincomb([0.5, -2.0], [out, square(b)], bias=1.0) + dot([a, b], [b, 2.0])

    assert check_gradient(f, [0.7, 1.3]) < 1e-6


def test_check_gradient_examples():
    assert check_gradient(lambda p: square(p[0]), [3.0], 1e-6) < 1e-8
    assert check_gradient(lambda p: 4.0, [1.0, 2.0]) == 0.0
    with pytest.raises(ValueError):
        check_gradient(lambda p: p[0], [1.0], 0.0)


def test_check_gradient_nonfinite_probe():
    def f(p):
        return p[0] / (p[0] - 1e-7) if isinstance(p[0], DiffScalar) else float("inf")

    with pytest.raises(NumericError):
        check_gradient(f, [1.0])


def test_mixed_tapes_rejected():
    a, b = Tape().var(1.0), Tape().var(2.0)
    for op in ("add", "sub", "mul", "div"):
        with pytest.raises(TapeError):
            apply(op, a, b)
    with pytest.raises(TapeError):
        lincomb([1.0, 1.0], [a, b])


def test_backward_requires_output_on_tape():
    t1, t2 = Tape(), Tape()
    x = t1.var(1.0)
    with pytest.raises(TapeError):
        backward(t2, x * 2.0)
    with pytest.raises(TapeError):
        backward(t1, 3.0)


def test_nonfinite_detected_at_record_time():
    tape = Tape()
    x = tape.var(1e200)
    with pytest.raises(NumericError, match="mul"):
        x * x
    with pytest.raises(ZeroDivisionError):
        x / 0.0
    with pytest.raises(NumericError):
        tape.var(math.nan)


def test_tape_is_topological_and_counts_nodes():
    tape = Tape()
    x, y = tape.var(1.0), tape.var(2.0)
    z = tanh(x * y + x)
    assert len(tape) == 2 + 3
    for i, ps in enumerate(tape.parents):
        assert all(p < i for p in ps)
    assert z.node == len(tape) - 1


def test_backward_is_repeatable_and_tape_reusable():
    tape = Tape()
    x, y = tape.var(0.4), tape.var(-1.1)
    a = tanh(x * y)
    b = square(x) + y
    n = len(tape)
    g1, g2 = backward(tape, a), backward(tape, a)
    assert g1 == g2
    gb = backward(tape, b)
    assert gb[x.node] == pytest.approx(0.8) and gb[y.node] == 1.0
    assert len(tape) == n


def test_fan_out_accumulates():
    tape = Tape()
    x = tape.var(3.0)
    f = x * x + x
    assert backward(tape, f)[x.node] == 7.0


def test_float_and_taped_paths_agree_bitwise():
    def f(p):
        return lincomb([0.3, 0.7], [tanh(p[0] * p[1]), clamp(p[0] - p[1], -0.2, 0.2)], 0.1) + square(p[0])

    p = [0.123, -0.456]
    tape = Tape()
    taped = f([tape.var(v) for v in p])
    assert taped.value == f(p)


# random expression trees over {add, mul, tanh, square}
_leaf = st.integers(min_value=0, max_value=2)
_expr = st.recursive(
    _leaf,
    lambda sub: st.one_of(
        st.tuples(st.sampled_from(["add", "mul"]), sub, sub),
        st.tuples(st.sampled_from(["tanh", "square"]), sub),
    ),
    max_leaves=8,
)


def _eval(e, xs):
    if isinstance(e, int):
        return xs[e]
    if e[0] == "add":
        return _eval(e[1], xs) + _eval(e[2], xs)
    if e[0] == "mul":
        return _eval(e[1], xs) * _eval(e[2], xs)
    if e[0] == "tanh":
        return tanh(_eval(e[1], xs))
    return square(_eval(e[1], xs))


@settings(max_examples=100, deadline=None)
@given(_expr, st.lists(st.floats(-1.5, 1.5), min_size=3, max_size=3))
def test_random_expressions_match_finite_differences(expr, point):
    err = check_gradient(lambda xs: _eval(expr, xs) + 0.0 * xs[0], point, 1e-6)
    assert err < 1e-6


@settings(max_examples=50, deadline=None)
@given(st.floats(-10, 10), st.floats(-3, 0), st.floats(0, 3))
def test_clamp_partial_is_zero_or_one(x, lo, hi):
    tape = Tape()
    v = tape.var(x)
    d = backward(tape, clamp(v, lo, hi))[v.node]
    assert d in (0.0, 1.0)
    assert (d == 1.0) == (lo < x < hi)


@settings(max_examples=30, deadline=None)
@given(st.lists(st.floats(-2, 2), min_size=2, max_size=2))
def test_primal_evaluation_is_deterministic(p):
    def f(xs):
        return tanh(xs[0] * xs[1]) + square(xs[0] - xs[1])

    t1, t2 = Tape(), Tape()
    a = f([t1.var(v) for v in p])
    b = f([t2.var(v) for v in p])
    assert a.value == b.value
    assert t1.values == t2.values
