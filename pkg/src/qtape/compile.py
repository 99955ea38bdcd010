"""Peephole compilation passes.

Every pass is a pure tape-to-tape function and is also exposed as a
:class:`~qtape.transform.SingleTransform`.  Adjacency is wire-local: two
operations are adjacent on a wire when no operation between them touches
that wire.  Rewritten parameters are expressions over the original inputs,
so compiled tapes stay differentiable.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import Callable, Sequence

import numpy as np

from .errors import InvalidRequestError, QTapeError
from .expr import Acos, Add, Atan2, Const, Cos, Expr, Mul, Neg, Sin, Square, Sub
from .ir import (
    ROTATIONS,
    GateKind,
    Operation,
    Tape,
    op_adjoint,
    rot,
)
from .transform import SingleTransform

LEFT = "left"
RIGHT = "right"
GIMBAL_EPS = 1e-9

_DIAGONAL = frozenset({GateKind.Z, GateKind.S, GateKind.T, GateKind.RZ})
_X_LIKE = frozenset({GateKind.X, GateKind.RX})
_CONTROLLED = frozenset({GateKind.CNOT, GateKind.CZ})


def _sweep_limit(ops) -> int:
    return 10 * max(len(ops), 1)


def _fixpoint(ops: list, sweep: Callable[[list], bool], name: str) -> list:
    for _ in range(_sweep_limit(ops)):
        if not sweep(ops):
            return ops
    raise QTapeError(f"{name} did not reach a fixpoint")


def _next_on_wire(ops, i, wire):
    for j in range(i + 1, len(ops)):
        if wire in ops[j].wires:
            return j
    return None


def _prev_on_wire(ops, i, wire):
    for j in range(i - 1, -1, -1):
        if wire in ops[j].wires:
            return j
    return None


def _is_single_qubit_unitary(op: Operation) -> bool:
    return op.kind.num_wires == 1 and not op.kind.is_channel


# -- cnot_to_cz ---------------------------------------------------------------

def cnot_to_cz(tape: Tape) -> Tape:
    """Rewrite every ``CNOT(i, j)`` as ``H(j) CZ(i, j) H(j)``."""
    out = []
    for op in tape.operations:
        if op.kind is GateKind.CNOT:
            control, target = op.wires
            h = Operation(GateKind.H, (target,))
            out += [h, Operation(GateKind.CZ, (control, target)), h]
        else:
            out.append(op)
    return tape.with_operations(out)


# -- merge_rotations ----------------------------------------------------------

def merge_rotations(tape: Tape) -> Tape:
    """Collapse adjacent same-axis rotations on a wire into one gate.

    The merged angle is ``Add`` of the originals, left to right.
    """
    ops = list(tape.operations)
    i = 0
    while i < len(ops):
        op = ops[i]
        if op.kind in ROTATIONS:
            j = _next_on_wire(ops, i, op.wires[0])
            if j is not None and ops[j].kind is op.kind and ops[j].wires == op.wires:
                ops[i] = op.with_params([Add(op.params[0], ops[j].params[0])])
                del ops[j]
                continue
        i += 1
    return tape.with_operations(ops)


# -- cancel_inverses ----------------------------------------------------------

def _same_support(a: Operation, b: Operation) -> bool:
    if a.kind is GateKind.CZ:
        return set(a.wires) == set(b.wires)
    return a.wires == b.wires


def are_inverses(a: Operation, b: Operation) -> bool:
    """Structural test that ``b`` undoes ``a`` on the same wires."""
    if a.kind is not b.kind or a.kind.is_channel or not _same_support(a, b):
        return False
    if a.kind.is_self_inverse:
        return True
    if not a.kind.num_params:
        return a.adjoint != b.adjoint
    return op_adjoint(a) == b or op_adjoint(b) == a


def _cancel_sweep(ops: list) -> bool:
    for i, op in enumerate(ops):
        nexts = {_next_on_wire(ops, i, w) for w in op.wires}
        if len(nexts) != 1:
            continue
        j = nexts.pop()
        if j is not None and are_inverses(op, ops[j]):
            del ops[j]
            del ops[i]
            return True
    return False


def cancel_inverses(tape: Tape) -> Tape:
    """Remove adjacent mutually inverse pairs until none remain."""
    ops = _fixpoint(list(tape.operations), _cancel_sweep, "cancel_inverses")
    return tape.with_operations(ops)


# -- commute_controlled -------------------------------------------------------

def commutes_through(gate: Operation, controlled: Operation, wire: int) -> bool:
    """Whether single-qubit ``gate`` on ``wire`` commutes with a CNOT/CZ."""
    if controlled.kind not in _CONTROLLED or not _is_single_qubit_unitary(gate):
        return False
    if gate.kind in _DIAGONAL:
        return controlled.kind is GateKind.CZ or wire == controlled.wires[0]
    if gate.kind in _X_LIKE:
        return controlled.kind is GateKind.CNOT and wire == controlled.wires[1]
    return False


def _commute_sweep(direction):
    step = _prev_on_wire if direction == LEFT else _next_on_wire

    def sweep(ops):
        moved = False
        indices = range(len(ops)) if direction == LEFT else range(len(ops) - 1, -1, -1)
        for i in indices:
            op = ops[i]
            if not _is_single_qubit_unitary(op):
                continue
            wire = op.wires[0]
            target = i
            j = step(ops, target, wire)
            while j is not None and commutes_through(op, ops[j], wire):
                target = j
                j = step(ops, target, wire)
            if target != i:
                del ops[i]
                ops.insert(target, op)
                moved = True
        return moved

    return sweep


def commute_controlled(tape: Tape, direction: str = RIGHT) -> Tape:
    """Push single-qubit gates through CNOT/CZ gates they commute with.

    Diagonal gates pass CZ on either wire and CNOT controls; X and RX pass
    CNOT targets.
    """
    direction = direction.lower()
    if direction not in (LEFT, RIGHT):
        raise InvalidRequestError(f"direction must be 'left' or 'right', got {direction!r}")
    ops = _fixpoint(list(tape.operations), _commute_sweep(direction), "commute_controlled")
    return tape.with_operations(ops)


# -- single_qubit_fusion ------------------------------------------------------

_PI = math.pi
_FIXED_ANGLES = {
    GateKind.H: (_PI, _PI / 2, 0.0),
    GateKind.X: (_PI / 2, _PI, -_PI / 2),
    GateKind.Y: (0.0, _PI, 0.0),
    GateKind.Z: (_PI, 0.0, 0.0),
    GateKind.S: (_PI / 2, 0.0, 0.0),
    GateKind.T: (_PI / 4, 0.0, 0.0),
}


def _is_const(e: Expr, value: float | None = None) -> bool:
    return isinstance(e, Const) and (value is None or e.value == value)


def _add(a: Expr, b: Expr) -> Expr:
    if _is_const(a, 0.0):
        return b
    if _is_const(b, 0.0):
        return a
    if _is_const(a) and _is_const(b):
        return Const(a.value + b.value)
    return Add(a, b)


def _half(e: Expr) -> Expr:
    if _is_const(e):
        return Const(0.5 * e.value)
    return Mul(Const(0.5), e)


def rot_angles(op: Operation) -> tuple[Expr, Expr, Expr]:
    """``(phi, theta, omega)`` with ``Rot(phi, theta, omega)`` equal to ``op`` up to phase."""
    kind = op.kind
    if kind is GateKind.Rot:
        return op.params
    if kind is GateKind.RZ:
        return op.params[0], Const(0.0), Const(0.0)
    if kind is GateKind.RY:
        return Const(0.0), op.params[0], Const(0.0)
    if kind is GateKind.RX:
        return Const(_PI / 2), op.params[0], Const(-_PI / 2)
    if kind in _FIXED_ANGLES:
        phi, theta, omega = _FIXED_ANGLES[kind]
        if op.adjoint:
            phi, theta, omega = -omega, -theta, -phi
        return Const(phi), Const(theta), Const(omega)
    raise InvalidRequestError(f"{kind.value} is not a single-qubit gate")


def zyz_angles(u: np.ndarray) -> tuple[float, float, float]:
    """Numeric ``(phi, theta, omega)`` of a 2x2 unitary, ignoring global phase.

    Near ``theta`` in {0, pi} the split between the two Z angles is not
    unique; ``omega`` is then set to 0 and the full Z rotation goes to ``phi``.
    """
    u = np.asarray(u, dtype=complex)
    u = u / np.sqrt(np.linalg.det(u))
    theta = 2.0 * math.atan2(abs(u[1, 0]), abs(u[0, 0]))
    arg00 = float(np.angle(u[0, 0]))
    arg10 = float(np.angle(u[1, 0]))
    if abs(math.sin(theta)) < GIMBAL_EPS:
        if math.cos(theta) > 0:
            return -2.0 * arg00, 0.0, 0.0
        return -2.0 * arg10, _PI, 0.0
    return -arg10 - arg00, theta, arg10 - arg00


def fuse_rot_angles(first, second) -> tuple[Expr, Expr, Expr]:
    """Angles of ``Rot(*second) @ Rot(*first)`` as expressions (up to phase).

    Constant inputs are folded numerically.  When either middle angle is a
    literal zero the Z rotations simply add.  Otherwise the closed form
    derives ``theta`` from ``cos(theta) = 2|u00|^2 - 1`` and the outer angles
    from the phases of ``u00`` and ``u10``; its gradient is undefined where
    the fused ``theta`` is 0 or pi.
    """
    phi1, theta1, omega1 = first
    phi2, theta2, omega2 = second
    if all(_is_const(e) for e in (*first, *second)):
        u = rot(*(e.value for e in second)) @ rot(*(e.value for e in first))
        return tuple(Const(v) for v in zyz_angles(u))
    if _is_const(theta2, 0.0):
        return phi1, theta1, _add(_add(omega1, phi2), omega2)
    if _is_const(theta1, 0.0):
        return _add(_add(phi1, omega1), phi2), theta2, omega2

    half_alpha = _half(_add(phi2, omega1))
    ca, sa = Cos(half_alpha), Sin(half_alpha)
    half_sum = _half(_add(theta1, theta2))
    half_diff = _half(Sub(theta1, theta2))
    re00 = Mul(ca, Cos(half_sum))
    im00 = Neg(Mul(sa, Cos(half_diff)))
    re10 = Mul(ca, Sin(half_sum))
    im10 = Mul(sa, Sin(half_diff))
    arg00 = Atan2(im00, re00)
    arg10 = Atan2(im10, re10)
    cos_theta = Sub(Mul(Const(2.0), Add(Square(re00), Square(im00))), Const(1.0))
    theta = Acos(cos_theta)
    a = Sub(arg10, arg00)
    c = Sub(Neg(arg10), arg00)
    return _add(phi1, c), theta, _add(omega2, a)


def _inner_product(thetas, gaps):
    """Entries ``u00`` and ``u10`` of ``RY(t_n) RZ(g_{n-1}) ... RZ(g_1) RY(t_1)`` as (re, im) pairs."""
    half_alpha = _half(gaps[0])
    ca, sa = Cos(half_alpha), Sin(half_alpha)
    half_sum = _half(_add(thetas[0], thetas[1]))
    half_diff = _half(Sub(thetas[0], thetas[1]))
    a = (Mul(ca, Cos(half_sum)), Neg(Mul(sa, Cos(half_diff))))
    b = (Mul(ca, Sin(half_sum)), Mul(sa, Sin(half_diff)))
    for theta, gap in zip(thetas[2:], gaps[1:]):
        half = _half(gap)
        cg, sg = Cos(half), Sin(half)
        a = (Add(Mul(cg, a[0]), Mul(sg, a[1])), Sub(Mul(cg, a[1]), Mul(sg, a[0])))
        b = (Sub(Mul(cg, b[0]), Mul(sg, b[1])), Add(Mul(cg, b[1]), Mul(sg, b[0])))
        half = _half(theta)
        ct, st = Cos(half), Sin(half)
        a, b = ((Sub(Mul(ct, a[0]), Mul(st, b[0])), Sub(Mul(ct, a[1]), Mul(st, b[1]))),
                (Add(Mul(st, a[0]), Mul(ct, b[0])), Add(Mul(st, a[1]), Mul(ct, b[1]))))
    return a, b


def fuse_run(run: Sequence[Operation]) -> Operation:
    """One ``Rot`` equal (up to phase) to applying ``run`` in order.

    Constant stretches are folded numerically first.  The remaining run is
    multiplied out as a single SU(2) product and angles are extracted once,
    so a gimbal-locked prefix does not poison the gradient of the result.
    """
    pieces = []
    for op in run:
        angles = rot_angles(op)
        if pieces and all(_is_const(e) for e in (*pieces[-1], *angles)):
            pieces[-1] = fuse_rot_angles(pieces[-1], angles)
        else:
            pieces.append(angles)
    phi_out, theta0, pending = pieces[0]
    thetas = [] if _is_const(theta0, 0.0) else [theta0]
    gaps = []
    for phi, theta, omega in pieces[1:]:
        if _is_const(theta, 0.0):
            pending = _add(_add(pending, phi), omega)
            continue
        if thetas:
            gaps.append(_add(pending, phi))
        else:
            phi_out = _add(_add(phi_out, pending), phi)
        thetas.append(theta)
        pending = omega
    wire = run[0].wires
    if len(thetas) < 2:
        return Operation(GateKind.Rot, wire, (phi_out, thetas[0] if thetas else theta0, pending))
    (re00, im00), (re10, im10) = _inner_product(thetas, gaps)
    arg00 = Atan2(im00, re00)
    arg10 = Atan2(im10, re10)
    theta = Acos(Sub(Mul(Const(2.0), Add(Square(re00), Square(im00))), Const(1.0)))
    return Operation(GateKind.Rot, wire, (_add(phi_out, Sub(Neg(arg10), arg00)), theta,
                                          _add(pending, Sub(arg10, arg00))))


def single_qubit_fusion(tape: Tape) -> Tape:
    """Replace every maximal run of single-qubit gates on a wire by one ``Rot``."""
    out = []
    runs: dict[int, list] = {}

    def flush(wire):
        run = runs.pop(wire, None)
        if run:
            out.append(fuse_run(run))

    for op in tape.operations:
        if _is_single_qubit_unitary(op):
            runs.setdefault(op.wires[0], []).append(op)
            continue
        for w in op.wires:
            flush(w)
        out.append(op)
    for w in sorted(runs):
        flush(w)
    return tape.with_operations(out)


# -- transforms and pipelines -------------------------------------------------

def _pass(name, fn, **options):
    return SingleTransform(name, lambda tape: fn(tape, **options))


def cnot_to_cz_transform() -> SingleTransform:
    return _pass("cnot_to_cz", cnot_to_cz)


def merge_rotations_transform() -> SingleTransform:
    return _pass("merge_rotations", merge_rotations)


def cancel_inverses_transform() -> SingleTransform:
    return _pass("cancel_inverses", cancel_inverses)


def commute_controlled_transform(direction: str = RIGHT) -> SingleTransform:
    return _pass(f"commute_controlled:{direction}", commute_controlled, direction=direction)


def single_qubit_fusion_transform() -> SingleTransform:
    return _pass("single_qubit_fusion", single_qubit_fusion)


PASSES = {
    "cnot_to_cz": cnot_to_cz_transform,
    "merge_rotations": merge_rotations_transform,
    "cancel_inverses": cancel_inverses_transform,
    "commute_controlled": commute_controlled_transform,
    "single_qubit_fusion": single_qubit_fusion_transform,
}


def make_pass(spec: str) -> SingleTransform:
    """Build a pass from ``"name"`` or ``"name:option"`` (e.g. ``commute_controlled:left``)."""
    name, _, option = spec.strip().partition(":")
    if name not in PASSES:
        raise InvalidRequestError(f"unknown pass {name!r}; known: {', '.join(sorted(PASSES))}")
    if option:
        if name != "commute_controlled":
            raise InvalidRequestError(f"pass {name!r} takes no options")
        return PASSES[name](option)
    return PASSES[name]()


@dataclass(frozen=True)
class Pipeline:
    passes: tuple = field(default_factory=tuple)

    @classmethod
    def parse(cls, text: str) -> "Pipeline":
        specs = [s for s in text.split(",") if s.strip()]
        return cls(tuple(make_pass(s) for s in specs))


def default_pipeline() -> Pipeline:
    return Pipeline(
        (
            commute_controlled_transform(LEFT),
            cancel_inverses_transform(),
            merge_rotations_transform(),
        )
    )


def run_pipeline(pipeline: Pipeline | None, tape: Tape) -> Tape:
    """Apply passes left to right; ``None`` selects the default pipeline."""
    if pipeline is None:
        pipeline = default_pipeline()
    for p in pipeline.passes:
        tape = p.apply(tape)
    return tape
