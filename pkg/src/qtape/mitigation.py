"""Noise insertion, unitary folding, zero-noise extrapolation, noise learning."""

from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Callable, Sequence

import numpy as np

from .errors import DomainError, InvalidRequestError
from .expr import Const, Div, Expr, Input, Mul, Sub, as_expr, backprop, evaluate
from .ir import GateKind, Operation, Tape, op_adjoint
from .sim import Device
from .transform import BatchResult, SingleTransform

AFTER_EACH_GATE = "after_each_gate"
AFTER_SINGLE_QUBIT_GATES = "after_single_qubit_gates"
END = "end"
_POSITIONS = (AFTER_EACH_GATE, AFTER_SINGLE_QUBIT_GATES, END)


@dataclass(frozen=True)
class InsertPolicy:
    """Which channel to insert, with what strength, and where."""

    channel: GateKind
    param: float = 0.0
    position: str = AFTER_EACH_GATE

    def __post_init__(self):
        kind = GateKind(self.channel)
        object.__setattr__(self, "channel", kind)
        if not kind.is_channel:
            raise InvalidRequestError(f"{kind.value} is not a noise channel")
        if self.position not in _POSITIONS:
            raise InvalidRequestError(f"unknown position {self.position!r}")
        if isinstance(self.param, (int, float)) and not 0.0 <= self.param <= 1.0:
            raise DomainError(f"channel parameter {self.param} outside [0, 1]")


def insert_noise(tape: Tape, policy: InsertPolicy, per_wire_params: Sequence | None = None) -> Tape:
    """Append ``policy.channel`` after qualifying operations.

    ``after_each_gate`` adds one channel per wire of every gate,
    ``after_single_qubit_gates`` only follows one-wire gates, and ``end``
    adds one channel per wire after the last operation.  With
    ``per_wire_params`` the strength on wire ``w`` is ``per_wire_params[w]``;
    entries may be expressions over the tape's inputs.
    """
    if per_wire_params is not None:
        if len(per_wire_params) != tape.num_wires:
            raise InvalidRequestError(
                f"need {tape.num_wires} per-wire parameters, got {len(per_wire_params)}"
            )
        strengths = [as_expr(p) for p in per_wire_params]
        for p in strengths:
            if p.is_constant and not 0.0 <= evaluate(p, []) <= 1.0:
                raise DomainError(f"per-wire parameter {evaluate(p, [])} outside [0, 1]")
    else:
        strengths = [as_expr(policy.param)] * tape.num_wires

    def channel(wire):
        return Operation(policy.channel, (wire,), (strengths[wire],))

    out = []
    for op in tape.operations:
        out.append(op)
        if op.kind.is_channel or policy.position == END:
            continue
        if policy.position == AFTER_EACH_GATE or len(op.wires) == 1:
            out.extend(channel(w) for w in op.wires)
    if policy.position == END:
        out.extend(channel(w) for w in range(tape.num_wires))
    return tape.with_operations(out)


class NoisyDevice:
    """Executor that inserts noise into every tape before running it.

    Acts as a device-level transform: the wrapped device is not modified.
    """

    def __init__(self, device: Device, policy: InsertPolicy, per_wire_params=None):
        self.device = device
        self.policy = policy
        self.per_wire_params = per_wire_params

    @property
    def executions(self) -> int:
        return self.device.executions

    def noisy(self, tape: Tape) -> Tape:
        return insert_noise(tape, self.policy, self.per_wire_params)

    def execute(self, tape: Tape, inputs: Sequence[float] = ()):
        return self.device.execute(self.noisy(tape), inputs)

    def execute_batch(self, tapes, inputs: Sequence[float] = ()):
        return self.device.execute_batch([self.noisy(t) for t in tapes], inputs)


# -- folding -------------------------------------------------------------------

def fold_count(scale_factor: float) -> int:
    """``round((scale_factor - 1) / 2)`` with halves rounded away from zero."""
    if scale_factor < 1:
        raise DomainError(f"scale factor must be at least 1, got {scale_factor}")
    return int(math.floor((scale_factor - 1.0) / 2.0 + 0.5))


def unitary_folding(tape: Tape, scale_factor: float) -> Tape:
    """``U`` followed by ``fold_count(scale_factor)`` repetitions of ``U^dagger U``."""
    if tape.has_channels:
        raise InvalidRequestError("cannot fold a tape that contains noise channels")
    n_folds = fold_count(scale_factor)
    ops = list(tape.operations)
    inverse = [op_adjoint(op) for op in reversed(ops)]
    return tape.with_operations(ops + (inverse + ops) * n_folds)


def unitary_folding_transform(scale_factor: float = 1.0) -> SingleTransform:
    return SingleTransform("unitary_folding", unitary_folding, (float(scale_factor),))


# -- extrapolation ---------------------------------------------------------------

def zne_intercept_expr(scale_factors: Sequence[float], offset: int = 0, stride: int = 1) -> Expr:
    """Least-squares intercept as an expression of the energies.

    Energy ``i`` is ``Input(offset + i * stride)``.
    """
    scales = [float(s) for s in scale_factors]
    n = len(scales)
    if n < 2:
        raise DomainError("need at least two scale factors")
    sum_s = sum(scales)
    denominator = n * sum(s * s for s in scales) - sum_s**2
    if abs(denominator) <= 1e-12 * max(1.0, sum_s**2):
        raise DomainError("scale factors are all equal; the fit is degenerate")
    energies = [Input(offset + i * stride) for i in range(n)]
    sum_e = energies[0]
    sum_se = Mul(Const(scales[0]), energies[0])
    for s, e in zip(scales[1:], energies[1:]):
        sum_e = sum_e + e
        sum_se = sum_se + Mul(Const(s), e)
    numerator = Sub(Mul(Const(float(n)), sum_se), Mul(Const(sum_s), sum_e))
    slope = Div(numerator, Const(denominator))
    return Div(Sub(sum_e, Mul(slope, Const(sum_s))), Const(float(n)))


def fit_zne(scale_factors: Sequence[float], energies: Sequence[float]) -> float:
    """Intercept of the ordinary least-squares line through ``(scale, energy)``."""
    if len(scale_factors) != len(energies):
        raise InvalidRequestError("scale factors and energies differ in length")
    return evaluate(zne_intercept_expr(scale_factors), [float(e) for e in energies])


def fit_zne_gradient(scale_factors: Sequence[float], energies: Sequence[float]) -> np.ndarray:
    """``d intercept / d energies``."""
    return backprop(zne_intercept_expr(scale_factors), [float(e) for e in energies])


def _apply_fold(fold_transform, tape, scale):
    if isinstance(fold_transform, SingleTransform):
        return fold_transform.with_hyperparams([scale]).apply(tape)
    return fold_transform(tape, scale)


def zne(tape: Tape, fold_transform=unitary_folding, scale_factors: Sequence[float] = (1, 3, 5)) -> BatchResult:
    """Folded copies of ``tape`` plus a linear extrapolation to zero noise.

    ``fold_transform`` is a ``(tape, scale) -> tape`` function or a
    one-hyperparameter :class:`SingleTransform`.  Each tape result entry is
    extrapolated independently.
    """
    scales = [float(s) for s in scale_factors]
    if len(scales) < 2:
        raise DomainError("zero-noise extrapolation needs at least two scale factors")
    tapes = [_apply_fold(fold_transform, tape, s) for s in scales]
    m = tape.result_size
    outputs = [zne_intercept_expr(scales, offset=r, stride=m) for r in range(m)]
    return BatchResult(tapes, outputs)


# -- noise learning --------------------------------------------------------------

def depolarizing_model(template: Tape, params: Sequence) -> Tape:
    """``template`` with per-wire depolarizing noise after each single-qubit gate."""
    policy = InsertPolicy(GateKind.DepolarizingChannel, 0.0, AFTER_SINGLE_QUBIT_GATES)
    return insert_noise(template, policy, list(params))


def noisy_provider(template: Tape, inputs: Sequence[float], true_params: Sequence[float],
                   shots: int | None = None, seed: int | None = None) -> Callable[[], np.ndarray]:
    """Observation source: the template on a noisy density-matrix device.

    Every call executes once more, so shot-based providers return fresh samples.
    """
    device = Device(template.num_wires, "density_matrix", shots=shots, seed=seed)
    noisy = depolarizing_model(template, true_params)
    return lambda: device.execute(noisy, inputs)


def noise_cost(template: Tape, inputs: Sequence[float], params: Sequence[float], observed) -> float:
    model = Device(template.num_wires, "density_matrix").execute(
        depolarizing_model(template, params), inputs
    )
    return float(np.sum((model - np.asarray(observed, dtype=float)) ** 2))


def _bounded_derivative(f, params, i, step, lo=0.0, hi=1.0):
    up, down = params.copy(), params.copy()
    up[i] = min(params[i] + step, hi)
    down[i] = max(params[i] - step, lo)
    return (f(up) - f(down)) / (up[i] - down[i])


def learn_noise(template: Tape, inputs: Sequence[float], provider: Callable[[], np.ndarray],
                init_params: Sequence[float], iters: int = 100, stepsize: float = 0.05,
                fd_step: float = 1e-4, history: list | None = None) -> np.ndarray:
    """Fit per-wire depolarizing strengths by gradient descent.

    Minimizes ``sum((model(p) - observed)**2)``, drawing one observation from
    ``provider`` per iteration.  Derivatives are central differences with
    step ``fd_step``, one-sided where the step would leave ``[0, 1]``.
    Parameters are clipped to ``[0, 1]`` after each update.
    """
    from .gradients import gd_step

    params = np.clip(np.asarray(init_params, dtype=float), 0.0, 1.0)
    if len(params) != template.num_wires:
        raise InvalidRequestError(f"need {template.num_wires} initial parameters")
    for _ in range(iters):
        observed = provider()
        cost = lambda p: noise_cost(template, inputs, p, observed)  # noqa: E731
        grads = np.array([_bounded_derivative(cost, params, i, fd_step) for i in range(len(params))])
        if history is not None:
            history.append(cost(params))
        params = gd_step(params, grads, stepsize, clip=(0.0, 1.0))
    return params
