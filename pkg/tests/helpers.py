"""Random circuits and numerical oracles shared by the test modules."""

from __future__ import annotations

import numpy as np

from qtape.expr import Const, Input, Sin
from qtape.ir import Expval, GateKind, Operation, PauliWord, Tape

SINGLE_FIXED = [GateKind.H, GateKind.X, GateKind.Y, GateKind.Z, GateKind.S, GateKind.T]
SINGLE_PARAM = [GateKind.RX, GateKind.RY, GateKind.RZ, GateKind.Rot]
TWO_QUBIT = [GateKind.CNOT, GateKind.CZ]


def random_param(rng, num_inputs, nonlinear=True):
    k = int(rng.integers(num_inputs))
    style = rng.integers(4 if nonlinear else 3)
    if style == 0:
        return Input(k)
    if style == 1:
        return Const(float(rng.uniform(-2, 2))) * Input(k) + Const(float(rng.uniform(-1, 1)))
    if style == 2:
        return Const(float(rng.uniform(-np.pi, np.pi)))
    return Sin(Input(k)) + Input((k + 1) % num_inputs)


def random_tape(rng, max_wires=4, max_ops=12, num_inputs=3, nonlinear=True, measure=None) -> Tape:
    """Channel-free circuit with trainable rotations and an expectation value."""
    n = int(rng.integers(1, max_wires + 1))
    ops = []
    for _ in range(int(rng.integers(1, max_ops + 1))):
        roll = rng.random()
        if n > 1 and roll < 0.3:
            a, b = rng.choice(n, size=2, replace=False)
            ops.append(Operation(TWO_QUBIT[rng.integers(2)], (int(a), int(b))))
        elif roll < 0.55:
            kind = SINGLE_FIXED[rng.integers(len(SINGLE_FIXED))]
            adjoint = kind in (GateKind.S, GateKind.T) and bool(rng.integers(2))
            ops.append(Operation(kind, (int(rng.integers(n)),), (), adjoint))
        else:
            kind = SINGLE_PARAM[rng.integers(len(SINGLE_PARAM))]
            params = [random_param(rng, num_inputs, nonlinear) for _ in range(kind.num_params)]
            ops.append(Operation(kind, (int(rng.integers(n)),), tuple(params)))
    if measure is None:
        wires = sorted(rng.choice(n, size=int(rng.integers(1, n + 1)), replace=False))
        word = PauliWord(tuple((int(w), "XYZ"[rng.integers(3)]) for w in wires))
        measure = [Expval(word)]
    return Tape(n, ops, measure, num_inputs)


def central_difference(f, x, step=1e-6):
    """Jacobian of a vector function by central differences, shape (m, n)."""
    x = np.asarray(x, dtype=float)
    cols = []
    for j in range(len(x)):
        e = np.zeros_like(x)
        e[j] = step
        cols.append((np.atleast_1d(f(x + e)) - np.atleast_1d(f(x - e))) / (2 * step))
    return np.stack(cols, axis=1)
