"""Scalar reverse-mode automatic differentiation.

A :class:`Tape` records every arithmetic operation performed on
:class:`DiffScalar` values as a node holding its primal value, the indices of
its operands and the local partial derivatives with respect to them.  A single
reverse sweep (:func:`backward`) then yields the gradient of any recorded
output with respect to every leaf.

The free functions (:func:`tanh`, :func:`clamp`, :func:`lincomb`, ...) accept
plain floats as well, and compute the primal value with exactly the same
floating point operations in both cases, so a taped and an untaped evaluation
of the same expression agree bitwise.
"""
from __future__ import annotations

import math
from typing import Callable, Sequence

import numpy as np

__all__ = [
    "Tape",
    "DiffScalar",
    "TapeError",
    "NumericError",
    "apply",
    "backward",
    "check_gradient",
    "value_of",
    "tanh",
    "relu",
    "square",
    "clamp",
    "lincomb",
    "dot",
]

_isfinite = math.isfinite


class TapeError(ValueError):
    """Operands from different tapes, or an output that is not on the tape."""


class NumericError(ArithmeticError):
    """A recorded operation produced NaN or Inf."""

    def __init__(self, op: str, value: float):
        super().__init__(f"non-finite result {value!r} in op '{op}'")
        self.op = op
        self.value = value


class Tape:
    """Append-only record of scalar operations.

    Node ``i`` stores ``values[i]``, the operand indices ``parents[i]`` and the
    local partials ``partials[i]``.  Operand indices are always smaller than
    ``i``, so the list order is a topological order.
    """

    __slots__ = ("values", "parents", "partials", "ops", "leaves")

    def __init__(self):
        self.values: list[float] = []
        self.parents: list[tuple[int, ...]] = []
        self.partials: list[tuple[float, ...]] = []
        self.ops: list[str] = []
        self.leaves: list[int] = []

    def __len__(self) -> int:
        return len(self.values)

    def var(self, value: float) -> DiffScalar:
        """Create a leaf (an independent variable)."""
        value = float(value)
        if not _isfinite(value):
            raise NumericError("leaf", value)
        node = len(self.values)
        self.values.append(value)
        self.parents.append(())
        self.partials.append(())
        self.ops.append("leaf")
        self.leaves.append(node)
        return DiffScalar(value, node, self)

    def _record(self, op, value, parents, partials) -> DiffScalar:
        if not _isfinite(value):
            raise NumericError(op, value)
        node = len(self.values)
        self.values.append(value)
        self.parents.append(parents)
        self.partials.append(partials)
        self.ops.append(op)
        return DiffScalar(value, node, self)


def _same_tape(a: DiffScalar, b: DiffScalar) -> Tape:
    if a.tape is not b.tape:
        raise TapeError("operands are recorded on different tapes")
    return a.tape


class DiffScalar:
    """A real value, optionally tied to a node on a :class:`Tape`.

    ``node is None`` marks a constant; arithmetic with constants and plain
    floats records nothing for that operand.
    """

    __slots__ = ("value", "node", "tape")

    def __init__(self, value: float, node: int | None = None, tape: Tape | None = None):
        self.value = value
        self.node = node
        self.tape = tape

    def __repr__(self) -> str:
        return f"DiffScalar({self.value!r}, node={self.node})"

    def __float__(self) -> float:
        return float(self.value)

    # binary ops: DiffScalar op (DiffScalar | float)
    def __add__(self, other):
        if isinstance(other, DiffScalar):
            if other.node is None:
                return _unary(self, "add", self.value + other.value, 1.0)
            if self.node is None:
                return _unary(other, "add", self.value + other.value, 1.0)
            tape = _same_tape(self, other)
            return tape._record("add", self.value + other.value, (self.node, other.node), (1.0, 1.0))
        return _unary(self, "add", self.value + other, 1.0)

    def __radd__(self, other):
        return _unary(self, "add", other + self.value, 1.0)

    def __sub__(self, other):
        if isinstance(other, DiffScalar):
            if other.node is None:
                return _unary(self, "sub", self.value - other.value, 1.0)
            if self.node is None:
                return _unary(other, "sub", self.value - other.value, -1.0)
            tape = _same_tape(self, other)
            return tape._record("sub", self.value - other.value, (self.node, other.node), (1.0, -1.0))
        return _unary(self, "sub", self.value - other, 1.0)

    def __rsub__(self, other):
        return _unary(self, "sub", other - self.value, -1.0)

    def __mul__(self, other):
        if isinstance(other, DiffScalar):
            if other.node is None:
                return _unary(self, "mul", self.value * other.value, other.value)
            if self.node is None:
                return _unary(other, "mul", self.value * other.value, self.value)
            tape = _same_tape(self, other)
            return tape._record(
                "mul", self.value * other.value, (self.node, other.node), (other.value, self.value)
            )
        return _unary(self, "mul", self.value * other, other)

    def __rmul__(self, other):
        return _unary(self, "mul", other * self.value, other)

    def __truediv__(self, other):
        if isinstance(other, DiffScalar):
            if other.value == 0.0:
                raise ZeroDivisionError("div: denominator is zero")
            if other.node is None:
                return _unary(self, "div", self.value / other.value, 1.0 / other.value)
            q = self.value / other.value
            if self.node is None:
                return _unary(other, "div", q, -q / other.value)
            tape = _same_tape(self, other)
            return tape._record("div", q, (self.node, other.node), (1.0 / other.value, -q / other.value))
        if other == 0.0:
            raise ZeroDivisionError("div: denominator is zero")
        return _unary(self, "div", self.value / other, 1.0 / other)

    def __rtruediv__(self, other):
        if self.value == 0.0:
            raise ZeroDivisionError("div: denominator is zero")
        q = other / self.value
        return _unary(self, "div", q, -q / self.value)

    def __neg__(self):
        return _unary(self, "neg", -self.value, -1.0)

    def __pos__(self):
        return self

    # comparisons act on primal values only
    def __lt__(self, other):
        return self.value < value_of(other)

    def __le__(self, other):
        return self.value <= value_of(other)

    def __gt__(self, other):
        return self.value > value_of(other)

    def __ge__(self, other):
        return self.value >= value_of(other)

    def __abs__(self):
        # primal magnitude; used for divergence checks, not differentiated
        return abs(self.value)


def _unary(x: DiffScalar, op: str, value: float, partial: float) -> DiffScalar:
    if x.node is None:
        if not _isfinite(value):
            raise NumericError(op, value)
        return DiffScalar(value)
    return x.tape._record(op, value, (x.node,), (partial,))


def value_of(x) -> float:
    """Primal value of a DiffScalar or float."""
    return x.value if isinstance(x, DiffScalar) else x


def tanh(x):
    if isinstance(x, DiffScalar):
        t = math.tanh(x.value)
        return _unary(x, "tanh", t, 1.0 - t * t)
    return math.tanh(x)


def relu(x):
    if isinstance(x, DiffScalar):
        if x.value > 0.0:
            return _unary(x, "relu", x.value, 1.0)
        return _unary(x, "relu", 0.0, 0.0)
    return x if x > 0.0 else 0.0


def square(x):
    if isinstance(x, DiffScalar):
        return _unary(x, "square", x.value * x.value, 2.0 * x.value)
    return x * x


def clamp(x, lo: float, hi: float):
    """Clamp to ``[lo, hi]``.

    The partial is 1 strictly inside the interval and 0 on or beyond either
    bound: an actuator sitting at its limit passes no sensitivity.
    """
    if lo > hi:
        raise ValueError(f"clamp requires lo <= hi, got lo={lo}, hi={hi}")
    if isinstance(x, DiffScalar):
        v = x.value
        if v <= lo:
            return _unary(x, "clamp", lo, 0.0)
        if v >= hi:
            return _unary(x, "clamp", hi, 0.0)
        return _unary(x, "clamp", v, 1.0)
    if x <= lo:
        return lo
    if x >= hi:
        return hi
    return x


def lincomb(coeffs: Sequence[float], xs: Sequence, bias: float = 0.0):
    """``bias + sum(c * x)`` with constant coefficients, recorded as one node.

    Summation runs left to right in the same order for floats and
    DiffScalars.
    """
    s = bias
    tape = None
    parents = []
    partials = []
    for c, x in zip(coeffs, xs):
        if isinstance(x, DiffScalar):
            s += c * x.value
            if x.node is not None:
                if tape is None:
                    tape = x.tape
                elif x.tape is not tape:
                    raise TapeError("operands are recorded on different tapes")
                parents.append(x.node)
                partials.append(c)
        else:
            s += c * x
    if tape is None:
        if not _isfinite(s):
            raise NumericError("lincomb", s)
        return DiffScalar(s) if any(isinstance(x, DiffScalar) for x in xs) else s
    return tape._record("lincomb", s, tuple(parents), tuple(partials))


def dot(xs: Sequence, ys: Sequence):
    """``sum(x * y)`` where either factor may be taped, recorded as one node."""
    s = 0.0
    tape = None
    parents = []
    partials = []
    for x, y in zip(xs, ys):
        xv = value_of(x)
        yv = value_of(y)
        s += xv * yv
        for a, other in ((x, yv), (y, xv)):
            if isinstance(a, DiffScalar) and a.node is not None:
                if tape is None:
                    tape = a.tape
                elif a.tape is not tape:
                    raise TapeError("operands are recorded on different tapes")
                parents.append(a.node)
                partials.append(other)
    if tape is None:
        if not _isfinite(s):
            raise NumericError("dot", s)
        return s
    return tape._record("dot", s, tuple(parents), tuple(partials))


_BINARY = {
    "add": lambda a, b: a + b,
    "sub": lambda a, b: a - b,
    "mul": lambda a, b: a * b,
    "div": lambda a, b: a / b,
}
_UNARY = {"neg": lambda a: -a, "tanh": tanh, "relu": relu, "square": square}


def apply(op: str, *args, lo: float | None = None, hi: float | None = None):
    """Apply a named operation; ``clamp`` takes ``lo`` and ``hi`` keywords."""
    if op in _BINARY:
        if len(args) != 2:
            raise TypeError(f"{op} takes 2 operands, got {len(args)}")
        a, b = args
        if not isinstance(a, DiffScalar) and isinstance(b, DiffScalar):
            a = DiffScalar(float(a))
        return _BINARY[op](a, b)
    if op in _UNARY:
        (a,) = args
        return _UNARY[op](a)
    if op == "clamp":
        (a,) = args
        if lo is None or hi is None:
            raise TypeError("clamp requires lo and hi")
        return clamp(a, lo, hi)
    raise ValueError(f"unknown op {op!r}")


def backward(tape: Tape, output) -> dict[int, float]:
    """Gradient of ``output`` with respect to every leaf on ``tape``.

    Returns a mapping ``leaf node id -> derivative``.  The tape is left
    untouched, so several outputs can be differentiated from one recording.
    """
    if not isinstance(output, DiffScalar) or output.tape is not tape or output.node is None:
        raise TapeError("output is not recorded on this tape")
    top = output.node
    adj = [0.0] * (top + 1)
    adj[top] = 1.0
    parents = tape.parents
    partials = tape.partials
    for i in range(top, -1, -1):
        a = adj[i]
        if a == 0.0:
            continue
        ps = parents[i]
        if ps:
            for p, d in zip(ps, partials[i]):
                adj[p] += a * d
    return {leaf: (adj[leaf] if leaf <= top else 0.0) for leaf in tape.leaves}


def check_gradient(f: Callable, p: Sequence[float], step: float = 1e-6) -> float:
    """Max relative error between the taped gradient of ``f`` and central differences.

    ``f`` maps a list of scalars to a scalar and must be written with the
    operations of this module so it can be evaluated on both floats and
    DiffScalars.  The error per coordinate is
    ``|analytic - fd| / max(1, |analytic|)``.
    """
    if step <= 0:
        raise ValueError("step must be positive")
    p = [float(v) for v in p]
    tape = Tape()
    xs = [tape.var(v) for v in p]
    out = f(xs)
    if isinstance(out, DiffScalar) and out.node is not None:
        g = backward(tape, out)
        analytic = np.array([g[x.node] for x in xs])
    else:
        analytic = np.zeros(len(p))
    worst = 0.0
    for i in range(len(p)):
        hi = list(p)
        lo = list(p)
        hi[i] += step
        lo[i] -= step
        fh = float(value_of(f(hi)))
        fl = float(value_of(f(lo)))
        if not (_isfinite(fh) and _isfinite(fl)):
            raise NumericError("check_gradient", fh if not _isfinite(fh) else fl)
        fd = (fh - fl) / (2.0 * step)
        worst = max(worst, abs(analytic[i] - fd) / max(1.0, abs(analytic[i])))
    return worst
