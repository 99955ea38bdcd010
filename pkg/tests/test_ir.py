import math

import numpy as np
import pytest
from scipy.linalg import expm

from qtape.errors import DomainError, InputIndexError, InvalidRequestError, WidthError
from qtape.expr import Const, Input, Neg
from qtape.ir import (
    CNOT, PAULI, Expval, GateKind, Hamiltonian, Operation, PauliWord, Probs, Rot, RX, RY, RZ, S,
    SingleExcitation, T, Tape, AmplitudeDamping, DepolarizingChannel, H,
    collect_trainable_params, gate_matrix, kraus_operators, op_adjoint, operation_matrix,
)

X, Y, Z = PAULI["X"], PAULI["Y"], PAULI["Z"]


@pytest.mark.parametrize("kind, pauli", [(GateKind.RX, X), (GateKind.RY, Y), (GateKind.RZ, Z)])
def test_rotations_match_matrix_exponential(kind, pauli):
    theta = 0.731
    np.testing.assert_allclose(gate_matrix(kind, [theta]), expm(-0.5j * theta * pauli), atol=1e-12)


def test_rot_is_rz_ry_rz_product():
    phi, theta, omega = 0.3, -1.1, 2.2
    expected = expm(-0.5j * omega * Z) @ expm(-0.5j * theta * Y) @ expm(-0.5j * phi * Z)
    np.testing.assert_allclose(gate_matrix(GateKind.Rot, [phi, theta, omega]), expected, atol=1e-12)


def test_single_excitation_is_givens_rotation():
    theta = 0.9
    generator = np.zeros((4, 4), dtype=complex)
    generator[1, 2], generator[2, 1] = -1j, 1j
    expected = expm(-0.5j * theta * generator)
    np.testing.assert_allclose(gate_matrix(GateKind.SingleExcitation, [theta]), expected, atol=1e-12)


def test_fixed_gates():
    np.testing.assert_allclose(gate_matrix(GateKind.S) @ gate_matrix(GateKind.S), Z, atol=1e-12)
    t = gate_matrix(GateKind.T)
    np.testing.assert_allclose(t @ t, gate_matrix(GateKind.S), atol=1e-12)
    np.testing.assert_allclose(gate_matrix(GateKind.S, adjoint=True), gate_matrix(GateKind.S).conj().T)
    cnot = gate_matrix(GateKind.CNOT)
    np.testing.assert_array_equal(cnot @ np.eye(4)[:, 2], np.eye(4)[:, 3])


@pytest.mark.parametrize("kind", [k for k in GateKind if not k.is_channel])
def test_every_gate_is_unitary(kind):
    values = np.linspace(0.2, 1.3, kind.num_params)
    u = gate_matrix(kind, values)
    np.testing.assert_allclose(u.conj().T @ u, np.eye(u.shape[0]), atol=1e-12)


@pytest.mark.parametrize("kind, p", [(GateKind.DepolarizingChannel, 0.0), (GateKind.DepolarizingChannel, 0.3),
                                     (GateKind.DepolarizingChannel, 1.0), (GateKind.AmplitudeDamping, 0.0),
                                     (GateKind.AmplitudeDamping, 0.05), (GateKind.AmplitudeDamping, 1.0)])
def test_kraus_completeness(kind, p):
    ks = kraus_operators(kind, [p])
    total = sum(k.conj().T @ k for k in ks)
    np.testing.assert_allclose(total, np.eye(2), atol=1e-12)


def test_kraus_domain():
    with pytest.raises(DomainError):
        kraus_operators(GateKind.DepolarizingChannel, [1.2])
    with pytest.raises(DomainError):
        kraus_operators(GateKind.AmplitudeDamping, [-0.1])


def test_gate_matrix_rejects_channels():
    with pytest.raises(InvalidRequestError):
        gate_matrix(GateKind.AmplitudeDamping, [0.1])


def test_operation_validation():
    with pytest.raises(InvalidRequestError):
        Operation(GateKind.RX, (0,), ())
    with pytest.raises(InvalidRequestError):
        Operation(GateKind.CNOT, (0,))
    with pytest.raises(InvalidRequestError):
        Operation(GateKind.CNOT, (1, 1))
    with pytest.raises(InvalidRequestError):
        Operation(GateKind.DepolarizingChannel, (0,), (0.1,), adjoint=True)


def test_tape_validation():
    with pytest.raises(WidthError):
        Tape(2, [CNOT(0, 2)], [])
    with pytest.raises(InputIndexError):
        Tape(1, [RX(Input(1), 0)], [], num_inputs=1)
    with pytest.raises(WidthError):
        Tape(1, [], [Probs((1,))])
    with pytest.raises(WidthError):
        Tape(0)


def test_pauli_word_parsing_and_order():
    w = PauliWord.parse("Z1 x0")
    assert w == PauliWord.parse("X0@Z1")
    assert str(w) == "X0 Z1"
    assert w.wires == (0, 1)
    with pytest.raises(InvalidRequestError):
        PauliWord.parse("Z0 X0")
    with pytest.raises(InvalidRequestError):
        PauliWord.parse("Q3")


def test_hamiltonian_terms():
    ham = Hamiltonian(((1.0, "Z0 Z1"), (0.5, PauliWord.parse("X2"))))
    assert ham.coeffs == [1.0, 0.5]
    assert ham.wires == (0, 1, 2)
    with pytest.raises(InvalidRequestError):
        Hamiltonian(())


def test_measurement_sizes():
    tape = Tape(2, [], [Expval(PauliWord.parse("Z0")), Probs((0, 1))])
    assert tape.result_size == 5


def test_adjoint_inverts_every_gate():
    values = [0.4, -0.9, 1.7]
    for kind in GateKind:
        if kind.is_channel:
            continue
        params = [Input(i) for i in range(kind.num_params)]
        op = Operation(kind, tuple(range(kind.num_wires)), tuple(params))
        inv = op_adjoint(op)
        product = operation_matrix(inv, values) @ operation_matrix(op, values)
        np.testing.assert_allclose(product, np.eye(product.shape[0]), atol=1e-12, err_msg=kind.value)


def test_adjoint_structure():
    assert op_adjoint(H(0)) == H(0)
    assert op_adjoint(S(0)) == S(0, adjoint=True)
    assert op_adjoint(RX(Input(0), 0)).params == (Neg(Input(0)),)
    rot = op_adjoint(Rot(Input(0), Input(1), Input(2), 0))
    assert rot.params == (Neg(Input(2)), Neg(Input(1)), Neg(Input(0)))
    with pytest.raises(InvalidRequestError):
        op_adjoint(AmplitudeDamping(0.1, 0))


def test_collect_trainable_params_skips_constants():
    tape = Tape(1, [RX(Input(0), 0), RY(0.3, 0), Rot(Input(1), 0.1, Input(0), 0)], [], 2)
    found = [(i, slot) for i, slot, _ in collect_trainable_params(tape)]
    assert found == [(0, 0), (2, 0), (2, 2)]


def test_constructors_wrap_numbers():
    op = RZ(0.5, 3)
    assert op.params == (Const(0.5),) and op.wires == (3,)
    assert T(1, adjoint=True).adjoint
    assert SingleExcitation(Input(0), (0, 1)).wires == (0, 1)
    assert DepolarizingChannel(0.2, 0).kind.is_channel
    assert math.isclose(op.param_values([])[0], 0.5)
