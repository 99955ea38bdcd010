"""Scalar expression graphs with reverse-mode differentiation.

Every gate parameter in a tape is an :class:`Expr`.  Transforms that combine
parameters (merging rotations, fusing gates, negating angles for adjoints)
build new nodes on top of the originals, so the dependence of each gate
parameter on the flat input vector survives any number of rewrites.

Nodes are immutable and compare structurally.  Subgraphs may be shared; all
traversals work on the DAG and never expand it into a tree.
"""

from __future__ import annotations

import math
from typing import Iterable, Sequence

import numpy as np

from .errors import DomainError, InputIndexError

# Rounding slack tolerated by Acos before it reports a domain violation.
ACOS_SLACK = 1e-12


class Expr:
    """Base node.  Use the concrete subclasses to build graphs."""

    __slots__ = ("args", "value", "_hash", "_inputs")
    arity = 0

    def __init__(self, *args):
        if len(args) != self.arity:
            raise TypeError(f"{type(self).__name__} takes {self.arity} operands")
        self.args = tuple(as_expr(a) for a in args)
        self.value = None
        self._finish()

    def _finish(self):
        self._hash = hash((type(self).__name__, self.value) + tuple(a._hash for a in self.args))
        if self.args:
            self._inputs = frozenset().union(*(a._inputs for a in self.args))
        else:
            self._inputs = frozenset()

    # -- structure ---------------------------------------------------------

    @property
    def inputs(self) -> frozenset:
        """Indices of every Input node reachable from this node."""
        return self._inputs

    @property
    def is_constant(self) -> bool:
        return not self._inputs

    def __hash__(self):
        return self._hash

    def __eq__(self, other):
        if self is other:
            return True
        if not isinstance(other, Expr):
            return NotImplemented
        if self._hash != other._hash:
            return False
        stack = [(self, other)]
        seen = set()
        while stack:
            a, b = stack.pop()
            key = (id(a), id(b))
            if a is b or key in seen:
                continue
            seen.add(key)
            if type(a) is not type(b) or a._hash != b._hash or a.value != b.value:
                return False
            stack.extend(zip(a.args, b.args))
        return True

    def __ne__(self, other):
        result = self.__eq__(other)
        return result if result is NotImplemented else not result

    def __repr__(self):
        inner = ", ".join(repr(a) for a in self.args)
        return f"{type(self).__name__}({inner})"

    # -- arithmetic sugar --------------------------------------------------

    def __add__(self, other):
        return Add(self, other)

    def __radd__(self, other):
        return Add(other, self)

    def __sub__(self, other):
        return Sub(self, other)

    def __rsub__(self, other):
        return Sub(other, self)

    def __mul__(self, other):
        return Mul(self, other)

    def __rmul__(self, other):
        return Mul(other, self)

    def __truediv__(self, other):
        return Div(self, other)

    def __rtruediv__(self, other):
        return Div(other, self)

    def __neg__(self):
        return Neg(self)

    # -- per-node rules, overridden by subclasses --------------------------

    def _forward(self, vals):
        raise NotImplementedError

    def _backward(self, vals, out, grad):
        raise NotImplementedError


class Input(Expr):
    """Reference to slot ``index`` of the flat parameter vector."""

    __slots__ = ()

    def __init__(self, index: int):
        index = int(index)
        if index < 0:
            raise InputIndexError(f"negative input index {index}")
        self.args = ()
        self.value = index
        self._hash = hash(("Input", index))
        self._inputs = frozenset((index,))

    @property
    def index(self) -> int:
        return self.value

    def __repr__(self):
        return f"Input({self.value})"


class Const(Expr):
    __slots__ = ()

    def __init__(self, value: float):
        value = float(value)
        if not math.isfinite(value):
            raise DomainError(f"constant must be finite, got {value}")
        self.args = ()
        self.value = value
        self._finish()

    def __repr__(self):
        return f"Const({self.value!r})"

    def _forward(self, vals):
        return self.value

    def _backward(self, vals, out, grad):
        return ()


class Add(Expr):
    __slots__ = ()
    arity = 2

    def _forward(self, vals):
        return vals[0] + vals[1]

    def _backward(self, vals, out, grad):
        return (grad, grad)


class Sub(Expr):
    __slots__ = ()
    arity = 2

    def _forward(self, vals):
        return vals[0] - vals[1]

    def _backward(self, vals, out, grad):
        return (grad, -grad)


class Mul(Expr):
    __slots__ = ()
    arity = 2

    def _forward(self, vals):
        return vals[0] * vals[1]

    def _backward(self, vals, out, grad):
        return (grad * vals[1], grad * vals[0])


class Div(Expr):
    __slots__ = ()
    arity = 2

    def _forward(self, vals):
        if vals[1] == 0.0:
            raise DomainError("division by zero")
        return vals[0] / vals[1]

    def _backward(self, vals, out, grad):
        return (grad / vals[1], -grad * vals[0] / (vals[1] * vals[1]))


class Neg(Expr):
    __slots__ = ()
    arity = 1

    def _forward(self, vals):
        return -vals[0]

    def _backward(self, vals, out, grad):
        return (-grad,)


class Sqrt(Expr):
    __slots__ = ()
    arity = 1

    def _forward(self, vals):
        if vals[0] < 0.0:
            raise DomainError(f"sqrt of negative value {vals[0]}")
        return math.sqrt(vals[0])

    def _backward(self, vals, out, grad):
        if vals[0] <= 0.0:
            raise DomainError("sqrt is not differentiable at 0")
        return (grad / (2.0 * out),)


class Sin(Expr):
    __slots__ = ()
    arity = 1

    def _forward(self, vals):
        return math.sin(vals[0])

    def _backward(self, vals, out, grad):
        return (grad * math.cos(vals[0]),)


class Cos(Expr):
    __slots__ = ()
    arity = 1

    def _forward(self, vals):
        return math.cos(vals[0])

    def _backward(self, vals, out, grad):
        return (-grad * math.sin(vals[0]),)


class Square(Expr):
    __slots__ = ()
    arity = 1

    def _forward(self, vals):
        return vals[0] * vals[0]

    def _backward(self, vals, out, grad):
        return (2.0 * grad * vals[0],)


class Atan2(Expr):
    """``atan2(y, x)``; operands are in that order."""

    __slots__ = ()
    arity = 2

    def _forward(self, vals):
        return math.atan2(vals[0], vals[1])

    def _backward(self, vals, out, grad):
        y, x = vals
        r2 = x * x + y * y
        if r2 == 0.0:
            raise DomainError("atan2 is not differentiable at the origin")
        return (grad * x / r2, -grad * y / r2)


class Acos(Expr):
    __slots__ = ()
    arity = 1

    def _forward(self, vals):
        x = vals[0]
        if abs(x) > 1.0:
            if abs(x) > 1.0 + ACOS_SLACK:
                raise DomainError(f"acos operand {x} outside [-1, 1]")
            x = math.copysign(1.0, x)
        return math.acos(x)

    def _backward(self, vals, out, grad):
        x = vals[0]
        if abs(x) >= 1.0:
            raise DomainError("acos is not differentiable at +-1")
        return (-grad / math.sqrt(1.0 - x * x),)


def as_expr(value) -> Expr:
    """Wrap plain numbers as :class:`Const`; pass expressions through."""
    if isinstance(value, Expr):
        return value
    if isinstance(value, (int, float, np.integer, np.floating)):
        return Const(float(value))
    raise TypeError(f"cannot use {type(value).__name__} as an expression")


def _topological(roots: Iterable[Expr]) -> list[Expr]:
    order = []
    seen = set()
    for root in roots:
        stack = [(root, False)]
        while stack:
            node, done = stack.pop()
            if done:
                order.append(node)
                continue
            if id(node) in seen:
                continue
            seen.add(id(node))
            stack.append((node, True))
            for child in node.args:
                if id(child) not in seen:
                    stack.append((child, False))
    return order


def _forward_values(order: list[Expr], inputs: Sequence[float]) -> dict:
    vals = {}
    n = len(inputs)
    for node in order:
        if isinstance(node, Input):
            if node.value >= n:
                raise InputIndexError(
                    f"input index {node.value} out of range for {n} inputs"
                )
            vals[id(node)] = float(inputs[node.value])
        else:
            vals[id(node)] = node._forward([vals[id(a)] for a in node.args])
    return vals


def evaluate(e: Expr, inputs: Sequence[float]) -> float:
    """Numeric value of ``e`` with Input slots bound to ``inputs``."""
    return _forward_values(_topological([e]), inputs)[id(e)]


def evaluate_all(exprs: Sequence[Expr], inputs: Sequence[float]) -> list[float]:
    """Evaluate several expressions, sharing work across common subgraphs."""
    vals = _forward_values(_topological(exprs), inputs)
    return [vals[id(e)] for e in exprs]


_VECTOR_RULES = {
    Add: lambda a, b: a + b,
    Sub: lambda a, b: a - b,
    Mul: lambda a, b: a * b,
    Neg: lambda a: -a,
    Sin: np.sin,
    Cos: np.cos,
    Square: lambda a: a * a,
    Atan2: np.arctan2,
}


def evaluate_rows(exprs: Sequence[Expr], rows: np.ndarray) -> np.ndarray:
    """Evaluate ``exprs`` for every row of a 2-D input array at once.

    Returns an array of shape ``(len(rows), len(exprs))``.  Domain rules match
    :func:`evaluate`.
    """
    rows = np.asarray(rows, dtype=float)
    order = _topological(exprs)
    n = rows.shape[1]
    vals = {}
    for node in order:
        if isinstance(node, Input):
            if node.value >= n:
                raise InputIndexError(f"input index {node.value} out of range for {n} inputs")
            vals[id(node)] = rows[:, node.value]
            continue
        if isinstance(node, Const):
            vals[id(node)] = np.full(len(rows), node.value)
            continue
        args = [vals[id(a)] for a in node.args]
        rule = _VECTOR_RULES.get(type(node))
        if rule is not None:
            vals[id(node)] = rule(*args)
        elif isinstance(node, Div):
            if np.any(args[1] == 0.0):
                raise DomainError("division by zero")
            vals[id(node)] = args[0] / args[1]
        elif isinstance(node, Sqrt):
            if np.any(args[0] < 0.0):
                raise DomainError("sqrt of negative value")
            vals[id(node)] = np.sqrt(args[0])
        elif isinstance(node, Acos):
            x = args[0]
            if np.any(np.abs(x) > 1.0 + ACOS_SLACK):
                raise DomainError("acos operand outside [-1, 1]")
            vals[id(node)] = np.arccos(np.clip(x, -1.0, 1.0))
        else:
            raise TypeError(f"no vector rule for {type(node).__name__}")
    if not exprs:
        return np.zeros((len(rows), 0))
    return np.stack([vals[id(e)] for e in exprs], axis=1)


def _backward_pass(order, vals, root, seed, n):
    grads = np.zeros(n)
    adj = {id(root): float(seed)}
    for node in reversed(order):
        g = adj.pop(id(node), None)
        if g is None:
            continue
        if isinstance(node, Input):
            grads[node.value] += g
            continue
        child_grads = node._backward([vals[id(a)] for a in node.args], vals[id(node)], g)
        for child, cg in zip(node.args, child_grads):
            adj[id(child)] = adj.get(id(child), 0.0) + cg
    return grads


def backprop(e: Expr, inputs: Sequence[float], seed: float = 1.0) -> np.ndarray:
    """Return ``seed * d e / d inputs`` as an array of ``len(inputs)``.

    Shared children accumulate contributions from every parent.
    """
    order = _topological([e])
    vals = _forward_values(order, inputs)
    return _backward_pass(order, vals, e, seed, len(inputs))


def jacobian(exprs: Sequence[Expr], inputs: Sequence[float]) -> tuple[np.ndarray, np.ndarray]:
    """Values and Jacobian (``len(exprs) x len(inputs)``) of several expressions."""
    order = _topological(exprs)
    vals = _forward_values(order, inputs)
    values = np.array([vals[id(e)] for e in exprs], dtype=float)
    jac = np.zeros((len(exprs), len(inputs)))
    for row, e in enumerate(exprs):
        if e._inputs:
            sub = _topological([e])
            jac[row] = _backward_pass(sub, vals, e, 1.0, len(inputs))
    return values, jac


def node_count(e: Expr) -> int:
    """Number of distinct nodes in the DAG under ``e``."""
    return len(_topological([e]))
