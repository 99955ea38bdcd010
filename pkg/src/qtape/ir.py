"""Gate vocabulary, observables, measurements and the tape container.

A :class:`Tape` holds two separate lists, operations and measurements, so
measurements can only ever come last.  Wires are dense integers
``0 .. num_wires - 1`` and wire 0 is the most significant bit of a basis
index.
"""

from __future__ import annotations

import enum
import math
from dataclasses import dataclass, replace
from typing import Iterable, Mapping, Sequence

import numpy as np

from .errors import DomainError, InputIndexError, InvalidRequestError, WidthError
from .expr import Expr, Neg, as_expr, evaluate_all


class GateKind(enum.Enum):
    H = "H"
    X = "X"
    Y = "Y"
    Z = "Z"
    S = "S"
    T = "T"
    RX = "RX"
    RY = "RY"
    RZ = "RZ"
    Rot = "Rot"
    CNOT = "CNOT"
    CZ = "CZ"
    SingleExcitation = "SingleExcitation"
    DepolarizingChannel = "DepolarizingChannel"
    AmplitudeDamping = "AmplitudeDamping"

    @property
    def num_params(self) -> int:
        return _ARITY.get(self, 0)

    @property
    def num_wires(self) -> int:
        return 2 if self in _TWO_QUBIT else 1

    @property
    def is_channel(self) -> bool:
        return self in CHANNELS

    @property
    def is_self_inverse(self) -> bool:
        return self in SELF_INVERSE


_ARITY = {
    GateKind.RX: 1,
    GateKind.RY: 1,
    GateKind.RZ: 1,
    GateKind.Rot: 3,
    GateKind.SingleExcitation: 1,
    GateKind.DepolarizingChannel: 1,
    GateKind.AmplitudeDamping: 1,
}
_TWO_QUBIT = frozenset({GateKind.CNOT, GateKind.CZ, GateKind.SingleExcitation})
CHANNELS = frozenset({GateKind.DepolarizingChannel, GateKind.AmplitudeDamping})
SELF_INVERSE = frozenset(
    {GateKind.H, GateKind.X, GateKind.Y, GateKind.Z, GateKind.CNOT, GateKind.CZ}
)
ROTATIONS = frozenset({GateKind.RX, GateKind.RY, GateKind.RZ})


@dataclass(frozen=True)
class Operation:
    """One gate or channel application.

    ``params`` are expressions over the tape's input vector; plain numbers
    are wrapped as constants.
    """

    kind: GateKind
    wires: tuple
    params: tuple = ()
    adjoint: bool = False

    def __post_init__(self):
        kind = self.kind if isinstance(self.kind, GateKind) else GateKind(self.kind)
        object.__setattr__(self, "kind", kind)
        object.__setattr__(self, "wires", tuple(int(w) for w in self.wires))
        object.__setattr__(self, "params", tuple(as_expr(p) for p in self.params))
        if len(self.params) != kind.num_params:
            raise InvalidRequestError(
                f"{kind.value} takes {kind.num_params} parameters, got {len(self.params)}"
            )
        if len(self.wires) != kind.num_wires:
            raise InvalidRequestError(
                f"{kind.value} acts on {kind.num_wires} wires, got {len(self.wires)}"
            )
        if len(set(self.wires)) != len(self.wires):
            raise InvalidRequestError(f"{kind.value} wires must be distinct: {self.wires}")
        if any(w < 0 for w in self.wires):
            raise WidthError(f"negative wire in {self.wires}")
        if self.adjoint and kind.is_channel:
            raise InvalidRequestError(f"{kind.value} is a channel and has no adjoint")

    @property
    def name(self) -> str:
        return self.kind.value

    @property
    def inputs(self) -> frozenset:
        return frozenset().union(*(p.inputs for p in self.params))

    def param_values(self, inputs: Sequence[float]) -> list[float]:
        return evaluate_all(self.params, inputs)

    def with_params(self, params) -> "Operation":
        return replace(self, params=tuple(params))

    def __repr__(self):
        parts = [self.kind.value]
        if self.params:
            parts.append(repr(list(self.params)))
        parts.append(f"wires={list(self.wires)}")
        if self.adjoint:
            parts.append("adjoint")
        return f"Operation({', '.join(parts)})"


@dataclass(frozen=True)
class PauliWord:
    """Tensor product of X/Y/Z factors on distinct wires.

    ``factors`` is kept sorted by wire so equal words compare equal.
    """

    factors: tuple

    def __post_init__(self):
        items = self.factors.items() if isinstance(self.factors, Mapping) else self.factors
        pairs = sorted((int(w), str(p).upper()) for w, p in items)
        if not pairs:
            raise InvalidRequestError("a Pauli word needs at least one factor")
        wires = [w for w, _ in pairs]
        if len(set(wires)) != len(wires):
            raise InvalidRequestError(f"repeated wire in Pauli word: {wires}")
        for w, p in pairs:
            if p not in ("X", "Y", "Z"):
                raise InvalidRequestError(f"unknown Pauli factor {p!r}")
            if w < 0:
                raise WidthError(f"negative wire {w} in Pauli word")
        object.__setattr__(self, "factors", tuple(pairs))

    @classmethod
    def parse(cls, text: str) -> "PauliWord":
        """Read ``"Z0 Z1"`` or ``"Z0@Z1"`` style words."""
        tokens = text.replace("@", " ").split()
        pairs = []
        for tok in tokens:
            if len(tok) < 2 or tok[0].upper() not in "XYZ" or not tok[1:].isdigit():
                raise InvalidRequestError(f"bad Pauli factor {tok!r}")
            pairs.append((int(tok[1:]), tok[0].upper()))
        return cls(tuple(pairs))

    @property
    def wires(self) -> tuple:
        return tuple(w for w, _ in self.factors)

    def __str__(self):
        return " ".join(f"{p}{w}" for w, p in self.factors)


@dataclass(frozen=True)
class Hamiltonian:
    """Real-weighted sum of Pauli words."""

    terms: tuple

    def __post_init__(self):
        terms = tuple((float(c), w if isinstance(w, PauliWord) else PauliWord.parse(w))
                      for c, w in self.terms)
        if not terms:
            raise InvalidRequestError("a Hamiltonian needs at least one term")
        if not all(math.isfinite(c) for c, _ in terms):
            raise DomainError("Hamiltonian coefficients must be finite")
        object.__setattr__(self, "terms", terms)

    @property
    def coeffs(self) -> list[float]:
        return [c for c, _ in self.terms]

    @property
    def words(self) -> list[PauliWord]:
        return [w for _, w in self.terms]

    @property
    def wires(self) -> tuple:
        return tuple(sorted({w for _, word in self.terms for w in word.wires}))


@dataclass(frozen=True)
class Expval:
    word: PauliWord

    @property
    def wires(self):
        return self.word.wires

    @property
    def size(self) -> int:
        return 1


@dataclass(frozen=True)
class ExpvalHamiltonian:
    hamiltonian: Hamiltonian

    @property
    def wires(self):
        return self.hamiltonian.wires

    @property
    def size(self) -> int:
        return 1


@dataclass(frozen=True)
class Probs:
    wires: tuple

    def __post_init__(self):
        wires = tuple(int(w) for w in self.wires)
        if not wires or len(set(wires)) != len(wires):
            raise InvalidRequestError(f"Probs wires must be distinct and nonempty: {wires}")
        object.__setattr__(self, "wires", wires)

    @property
    def size(self) -> int:
        return 2 ** len(self.wires)


Measurement = Expval | ExpvalHamiltonian | Probs


@dataclass(frozen=True)
class Tape:
    """Operations followed by terminal measurements over ``num_inputs`` inputs."""

    num_wires: int
    operations: tuple = ()
    measurements: tuple = ()
    num_inputs: int = 0

    def __post_init__(self):
        object.__setattr__(self, "operations", tuple(self.operations))
        object.__setattr__(self, "measurements", tuple(self.measurements))
        if self.num_wires < 1:
            raise WidthError("a tape needs at least one wire")
        for op in self.operations:
            if max(op.wires) >= self.num_wires:
                raise WidthError(f"{op.name} on wires {op.wires} exceeds {self.num_wires} wires")
            for idx in op.inputs:
                if idx >= self.num_inputs:
                    raise InputIndexError(
                        f"{op.name} references input {idx} but tape has {self.num_inputs}"
                    )
        for m in self.measurements:
            if m.wires and max(m.wires) >= self.num_wires:
                raise WidthError(f"measurement on {m.wires} exceeds {self.num_wires} wires")

    @property
    def result_size(self) -> int:
        return sum(m.size for m in self.measurements)

    @property
    def has_channels(self) -> bool:
        return any(op.kind.is_channel for op in self.operations)

    def with_operations(self, operations: Iterable[Operation]) -> "Tape":
        return replace(self, operations=tuple(operations))

    def with_measurements(self, measurements: Iterable) -> "Tape":
        return replace(self, measurements=tuple(measurements))


# -- matrices -------------------------------------------------------------

_I2 = np.eye(2, dtype=complex)
PAULI = {
    "I": _I2,
    "X": np.array([[0, 1], [1, 0]], dtype=complex),
    "Y": np.array([[0, -1j], [1j, 0]], dtype=complex),
    "Z": np.array([[1, 0], [0, -1]], dtype=complex),
}
_FIXED = {
    GateKind.H: np.array([[1, 1], [1, -1]], dtype=complex) / math.sqrt(2),
    GateKind.X: PAULI["X"],
    GateKind.Y: PAULI["Y"],
    GateKind.Z: PAULI["Z"],
    GateKind.S: np.diag([1, 1j]),
    GateKind.T: np.diag([1, np.exp(1j * math.pi / 4)]),
    GateKind.CNOT: np.array(
        [[1, 0, 0, 0], [0, 1, 0, 0], [0, 0, 0, 1], [0, 0, 1, 0]], dtype=complex
    ),
    GateKind.CZ: np.diag([1, 1, 1, -1]).astype(complex),
}


def rx(theta):
    c, s = math.cos(theta / 2), math.sin(theta / 2)
    return np.array([[c, -1j * s], [-1j * s, c]])


def ry(theta):
    c, s = math.cos(theta / 2), math.sin(theta / 2)
    return np.array([[c, -s], [s, c]], dtype=complex)


def rz(theta):
    return np.diag([np.exp(-0.5j * theta), np.exp(0.5j * theta)])


def rot(phi, theta, omega):
    """``RZ(omega) @ RY(theta) @ RZ(phi)``: the RZ(phi) factor acts first."""
    return rz(omega) @ ry(theta) @ rz(phi)


def single_excitation(theta):
    c, s = math.cos(theta / 2), math.sin(theta / 2)
    return np.array([[1, 0, 0, 0], [0, c, -s, 0], [0, s, c, 0], [0, 0, 0, 1]], dtype=complex)


_PARAMETRIC = {
    GateKind.RX: rx,
    GateKind.RY: ry,
    GateKind.RZ: rz,
    GateKind.Rot: rot,
    GateKind.SingleExcitation: single_excitation,
}


def gate_matrix(kind: GateKind, param_values: Sequence[float] = (), adjoint: bool = False) -> np.ndarray:
    """Unitary of ``kind``; the conjugate transpose when ``adjoint`` is set."""
    kind = GateKind(kind)
    if kind.is_channel:
        raise InvalidRequestError(f"{kind.value} is a channel; use kraus_operators")
    if len(param_values) != kind.num_params:
        raise InvalidRequestError(
            f"{kind.value} takes {kind.num_params} parameters, got {len(param_values)}"
        )
    if kind in _PARAMETRIC:
        mat = _PARAMETRIC[kind](*[float(v) for v in param_values])
    else:
        mat = _FIXED[kind].copy()
    return mat.conj().T if adjoint else mat


def kraus_operators(kind: GateKind, param_values: Sequence[float]) -> list[np.ndarray]:
    """Kraus set of a channel.  Operators with zero weight are dropped."""
    kind = GateKind(kind)
    if not kind.is_channel:
        raise InvalidRequestError(f"{kind.value} is not a channel")
    (p,) = param_values
    p = float(p)
    if not 0.0 <= p <= 1.0:
        raise DomainError(f"{kind.value} parameter {p} outside [0, 1]")
    if kind is GateKind.DepolarizingChannel:
        ops = [math.sqrt(1 - p) * _I2]
        if p > 0:
            ops += [math.sqrt(p / 3) * PAULI[k] for k in "XYZ"]
        return [k for k in ops if np.any(k)]
    k0 = np.array([[1, 0], [0, math.sqrt(1 - p)]], dtype=complex)
    k1 = np.array([[0, math.sqrt(p)], [0, 0]], dtype=complex)
    return [k0, k1] if p > 0 else [k0]


def operation_matrix(op: Operation, inputs: Sequence[float]) -> np.ndarray:
    return gate_matrix(op.kind, op.param_values(inputs), op.adjoint)


def op_adjoint(op: Operation) -> Operation:
    """Inverse of a unitary operation, kept differentiable via :class:`Neg`."""
    kind = op.kind
    if kind.is_channel:
        raise InvalidRequestError(f"{kind.value} is a channel and has no adjoint")
    if kind.is_self_inverse:
        return op
    if kind is GateKind.Rot:
        phi, theta, omega = op.params
        return replace(op, params=(Neg(omega), Neg(theta), Neg(phi)))
    if kind.num_params:
        return replace(op, params=tuple(Neg(p) for p in op.params))
    return replace(op, adjoint=not op.adjoint)


def collect_trainable_params(tape: Tape) -> list[tuple[int, int, Expr]]:
    """``(operation index, parameter slot, expr)`` for input-dependent parameters."""
    return [
        (i, slot, p)
        for i, op in enumerate(tape.operations)
        for slot, p in enumerate(op.params)
        if p.inputs
    ]


# Convenience constructors; wires come last so circuits read like listings.

def H(wire):
    return Operation(GateKind.H, (wire,))


def X(wire):
    return Operation(GateKind.X, (wire,))


def Y(wire):
    return Operation(GateKind.Y, (wire,))


def Z(wire):
    return Operation(GateKind.Z, (wire,))


def S(wire, adjoint=False):
    return Operation(GateKind.S, (wire,), adjoint=adjoint)


def T(wire, adjoint=False):
    return Operation(GateKind.T, (wire,), adjoint=adjoint)


def RX(theta, wire):
    return Operation(GateKind.RX, (wire,), (theta,))


def RY(theta, wire):
    return Operation(GateKind.RY, (wire,), (theta,))


def RZ(theta, wire):
    return Operation(GateKind.RZ, (wire,), (theta,))


def Rot(phi, theta, omega, wire):
    return Operation(GateKind.Rot, (wire,), (phi, theta, omega))


def CNOT(control, target):
    return Operation(GateKind.CNOT, (control, target))


def CZ(a, b):
    return Operation(GateKind.CZ, (a, b))


def SingleExcitation(theta, wires):
    return Operation(GateKind.SingleExcitation, tuple(wires), (theta,))


def DepolarizingChannel(p, wire):
    return Operation(GateKind.DepolarizingChannel, (wire,), (p,))


def AmplitudeDamping(gamma, wire):
    return Operation(GateKind.AmplitudeDamping, (wire,), (gamma,))
