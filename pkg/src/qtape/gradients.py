"""Gradient batch transforms and the gradient engine.

Both ``param_shift`` and ``finite_diff`` differentiate with respect to each
trainable *gate parameter* and then chain through that parameter's
expression to the flat input vector.  A parameter built from several inputs
(for example a merged rotation ``RZ(a + b)``) therefore costs a single pair
of shifted tapes.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import Sequence

import numpy as np

from .errors import DomainError, InvalidRequestError, UnsupportedRuleError
from .expr import Const, Expr, Input, Mul, backprop
from .ir import (
    Expval,
    GateKind,
    H,
    PauliWord,
    SingleExcitation,
    Tape,
    collect_trainable_params,
)
from .sim import Device
from .transform import BatchResult


@dataclass(frozen=True)
class TwoTerm:
    """``c * [f(a*x + s) - f(a*x - s)]``."""

    shift: float = math.pi / 2
    scale: float = 0.5
    prescale: float = 1.0


@dataclass(frozen=True)
class Equidistant:
    """General rule for ``R`` equidistant frequencies, using ``2R`` shifted tapes."""

    R: int = 1

    def __post_init__(self):
        if self.R < 1:
            raise DomainError("R must be a positive integer")

    def terms(self) -> list[tuple[float, float]]:
        """``(shift, coefficient)`` pairs."""
        R = self.R
        out = []
        for mu in range(1, 2 * R + 1):
            shift = (2 * mu - 1) * math.pi / (2 * R)
            coeff = (-1) ** (mu - 1) / (4 * R * math.sin((2 * mu - 1) * math.pi / (4 * R)) ** 2)
            out.append((shift, coeff))
        return out


DEFAULT_RULES = {
    GateKind.RX: TwoTerm(),
    GateKind.RY: TwoTerm(),
    GateKind.RZ: TwoTerm(),
    GateKind.Rot: TwoTerm(),
    GateKind.SingleExcitation: None,
}


def _shifted_tape(tape: Tape, op_index: int, slot: int, new_param: Expr) -> Tape:
    ops = list(tape.operations)
    op = ops[op_index]
    params = list(op.params)
    params[slot] = new_param
    ops[op_index] = op.with_params(params)
    return tape.with_operations(ops)


def _shift_expr(param: Expr, shift: float, prescale: float = 1.0) -> Expr:
    base = param if prescale == 1.0 else Mul(Const(prescale), param)
    return base + Const(shift)


def _chain(tape: Tape, inputs, recipes, result_size: int, offsets_base: int = 0) -> list[Expr]:
    """Build ``d result[r] / d input[j]`` expressions from per-parameter recipes.

    ``recipes`` holds ``(weights, [(coefficient, result_offset), ...])`` per
    trainable parameter, where ``weights`` is the parameter's input gradient.
    """
    n = tape.num_inputs
    outputs = []
    for r in range(result_size):
        for j in range(n):
            total = None
            for weights, combo in recipes:
                w = weights[j]
                if w == 0.0:
                    continue
                for coeff, offset in combo:
                    c = w * coeff
                    if c == 0.0:
                        continue
                    term = Const(c) * Input(offset + r)
                    total = term if total is None else total + term
            outputs.append(total if total is not None else Const(0.0))
    return outputs


def param_shift(tape: Tape, inputs: Sequence[float], rules: dict | None = None) -> BatchResult:
    """Parameter-shift gradient tapes for every trainable gate parameter.

    Post-processing returns the Jacobian ``d results / d inputs`` flattened
    row-major, evaluated with the chain weights at ``inputs``.
    """
    rules = DEFAULT_RULES if rules is None else {**DEFAULT_RULES, **rules}
    inputs = np.asarray(inputs, dtype=float)
    m = tape.result_size
    tapes, recipes = [], []
    for op_index, slot, param in collect_trainable_params(tape):
        kind = tape.operations[op_index].kind
        rule = rules.get(kind)
        if rule is None:
            raise UnsupportedRuleError(
                f"no parameter-shift rule for trainable {kind.value} (operation {op_index})"
            )
        combo = []
        if isinstance(rule, TwoTerm):
            for sign in (1.0, -1.0):
                combo.append((sign * rule.scale, len(tapes) * m))
                tapes.append(
                    _shifted_tape(tape, op_index, slot, _shift_expr(param, sign * rule.shift, rule.prescale))
                )
        else:
            for shift, coeff in rule.terms():
                combo.append((coeff, len(tapes) * m))
                tapes.append(_shifted_tape(tape, op_index, slot, _shift_expr(param, shift)))
        recipes.append((backprop(param, inputs), combo))
    if not tapes:
        return BatchResult([tape], [Const(0.0)] * (m * tape.num_inputs))
    return BatchResult(tapes, _chain(tape, inputs, recipes, m))


def finite_diff(tape: Tape, inputs: Sequence[float], h: float = 1e-7) -> BatchResult:
    """First-order forward differences.

    The first tape is the unshifted circuit; it is shared by every parameter.
    """
    if not h > 0:
        raise DomainError(f"finite-difference step must be positive, got {h}")
    inputs = np.asarray(inputs, dtype=float)
    m = tape.result_size
    tapes = [tape]
    recipes = []
    for op_index, slot, param in collect_trainable_params(tape):
        offset = len(tapes) * m
        tapes.append(_shifted_tape(tape, op_index, slot, _shift_expr(param, h)))
        recipes.append((backprop(param, inputs), [(1.0 / h, offset), (-1.0 / h, 0)]))
    return BatchResult(tapes, _chain(tape, inputs, recipes, m))


@dataclass
class GradientResult:
    value: np.ndarray
    jacobian: np.ndarray
    executions_used: int


def _method_batch(tape, inputs, method, h, rules):
    if method in ("shift", "param_shift", "parameter-shift"):
        return param_shift(tape, inputs, rules)
    if method in ("fd", "finite_diff", "finite-diff"):
        return finite_diff(tape, inputs, h)
    raise InvalidRequestError(f"unknown gradient method {method!r}")


def gradient(device, tape: Tape, inputs: Sequence[float], method: str = "shift",
             h: float = 1e-7, rules: dict | None = None) -> GradientResult:
    """Forward value and Jacobian of ``tape`` at ``inputs``.

    ``device`` is anything with ``execute_batch(tapes, inputs)`` and an
    ``executions`` counter.  For finite differences the unshifted tape doubles
    as the forward pass.
    """
    inputs = np.asarray(inputs, dtype=float)
    before = device.executions
    batch = _method_batch(tape, inputs, method, h, rules)
    m, n = tape.result_size, tape.num_inputs
    if method in ("fd", "finite_diff", "finite-diff"):
        results = device.execute_batch(batch.tapes, inputs)
        value = np.asarray(results[0], dtype=float)
    else:
        trainable = bool(collect_trainable_params(tape))
        tapes = [tape] + (list(batch.tapes) if trainable else [])
        results = device.execute_batch(tapes, inputs)
        value = np.asarray(results[0], dtype=float)
        results = results[1:] if trainable else [value]
    jac = batch.postprocess(results).reshape(m, n)
    return GradientResult(value, jac, device.executions - before)


def batch_jacobian(device, batch: BatchResult, inputs: Sequence[float], method: str = "shift",
                   h: float = 1e-7, rules: dict | None = None) -> tuple[np.ndarray, np.ndarray]:
    """Value and input-Jacobian of a batch transform's post-processed output.

    Chains ``d post / d results`` with the Jacobian of every batch tape.
    Chain weights captured inside nested gradient batches are treated as
    constants, which is exact when gate parameters are affine in the inputs.
    """
    inputs = np.asarray(inputs, dtype=float)
    rows = []
    results = []
    for tape in batch.tapes:
        g = gradient(device, tape, inputs, method, h, rules)
        results.append(g.value)
        rows.append(g.jacobian)
    values, post_jac = batch.postprocess_jacobian(results)
    return values, post_jac @ np.vstack(rows)


def optimal_step(sigma0: float, n_shots: int, f2: float) -> float:
    """Shot-noise optimal forward-difference step ``(2 s^2 / (N f''^2)) ** (1/4)``."""
    if f2 == 0:
        raise DomainError("second derivative is zero; optimal step is unbounded")
    if sigma0 <= 0 or n_shots < 1:
        raise DomainError("sigma0 must be positive and n_shots at least 1")
    return (2.0 * sigma0**2 / (n_shots * f2**2)) ** 0.25


def gd_step(params, grads, stepsize: float, clip=None) -> np.ndarray:
    """One gradient-descent update, optionally clipped to ``clip = (lo, hi)``."""
    params = np.asarray(params, dtype=float)
    grads = np.asarray(grads, dtype=float)
    if params.shape != grads.shape:
        raise InvalidRequestError(f"params {params.shape} and grads {grads.shape} differ")
    out = params - stepsize * grads
    if clip is not None:
        lo, hi = clip
        out = np.clip(out, lo, hi)
    return out


# -- adaptive finite-difference experiment ---------------------------------

N_SHOTS = 1000
H_MAX = 5.0
# Lower bound on the step actually used for differencing once h has been clipped.
H_FLOOR = 1e-12


def excitation_tape() -> Tape:
    """Two Hadamards, then a single excitation on wires (0, 1), measuring X0 X1."""
    return Tape(
        2,
        [H(0), H(1), SingleExcitation(Input(0), (0, 1))],
        [Expval(PauliWord.parse("X0 X1"))],
        num_inputs=1,
    )


def _stream_seed(*parts) -> int:
    return int(np.random.SeedSequence([int(p) for p in parts]).generate_state(1)[0])


def _cost_and_grad(tape, x, h, seed, n_shots):
    """Cost ``f(x) + var(g1)/N + h`` and mean single-shot gradient.

    Devices are rebuilt from ``seed`` so repeated calls at nearby ``h`` share
    random numbers.
    """
    forward = Device(2, shots=n_shots, seed=_stream_seed(seed, 0)).execute(tape, [x])[0]
    batch = finite_diff(tape, [x], max(h, H_FLOOR))
    singles = Device(2, shots=[(1, n_shots)], seed=_stream_seed(seed, 1))
    g1 = batch.postprocess(singles.execute_batch(batch.tapes, [x]))[:, 0]
    return forward + np.var(g1) / n_shots + h, float(np.mean(g1))


@dataclass
class AdaptiveTrace:
    h: list = field(default_factory=list)
    cost: list = field(default_factory=list)
    x: list = field(default_factory=list)

    @property
    def final_x(self) -> float:
        return self.x[-1]

    def rows(self):
        return list(zip(self.h, self.cost))


def exact_excitation_cost(x: float) -> float:
    return float(Device(2).execute(excitation_tape(), [x])[0])


def adaptive_fd_experiment(seed: int, iters: int = 300, adapt_h: bool = True,
                           x0: float = 0.1, h0: float = 1e-7, stepsize: float = 0.05,
                           n_shots: int = N_SHOTS) -> AdaptiveTrace:
    """Train ``x`` with single-shot forward differences while also training ``h``.

    With ``adapt_h=False`` the step stays at ``h0``.  The trace records the
    clipped ``h`` and a shot estimate of the circuit value before each update
    and once more after the last one.
    """
    tape = excitation_tape()
    x, h = float(x0), float(h0)
    trace = AdaptiveTrace()

    def record(i):
        trace.h.append(h)
        trace.x.append(x)
        dev = Device(2, shots=n_shots, seed=_stream_seed(seed, i, 2))
        trace.cost.append(float(dev.execute(tape, [x])[0]))

    for i in range(iters):
        h = float(np.clip(h, 0.0, H_MAX))
        x = float(np.clip(x, 0.0, 2 * math.pi))
        record(i)
        it_seed = _stream_seed(seed, i)
        _, x_grad = _cost_and_grad(tape, x, h, it_seed, n_shots)
        h_grad = 0.0
        if adapt_h:
            d = max(1e-9, 0.05 * h)
            up, _ = _cost_and_grad(tape, x, h + d, it_seed, n_shots)
            down, _ = _cost_and_grad(tape, x, max(h - d, 0.0), it_seed, n_shots)
            h_grad = (up - down) / (h + d - max(h - d, 0.0))
        x, h = gd_step([x, h], [x_grad, h_grad], stepsize)
        x, h = float(x), float(h)
    h = float(np.clip(h, 0.0, H_MAX))
    x = float(np.clip(x, 0.0, 2 * math.pi))
    record(iters)
    return trace
