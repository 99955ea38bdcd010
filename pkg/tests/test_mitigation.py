import numpy as np
import pytest

from qtape.errors import DomainError, InvalidRequestError
from qtape.expr import Input
from qtape.gradients import batch_jacobian
from qtape.ir import (
    CNOT, RX, RY, RZ, S, AmplitudeDamping, DepolarizingChannel, Expval, ExpvalHamiltonian,
    GateKind, Hamiltonian, PauliWord, Probs, Tape,
)
from qtape.mitigation import (
    AFTER_SINGLE_QUBIT_GATES, END, InsertPolicy, NoisyDevice, fit_zne,
    fit_zne_gradient, fold_count, insert_noise, learn_noise, noise_cost, noisy_provider,
    unitary_folding, unitary_folding_transform, zne,
)
from qtape.sim import Device, equal_up_to_phase, statevector

from helpers import central_difference, random_tape


def zne_tape():
    ham = Hamiltonian(((1.0, "Z0 Z1"), (2.0, "Z1 Z2"), (3.0, "X0 X1 X2")))
    ops = [RX(Input(0), 0), CNOT(0, 1), RY(Input(1), 1), CNOT(1, 2), RZ(Input(2), 2), CNOT(2, 0)]
    return Tape(3, ops, [ExpvalHamiltonian(ham)], 3)


def noise_template():
    return Tape(2, [RX(Input(0), 0), RY(Input(1), 1)],
                [Expval(PauliWord.parse("Z0")), Expval(PauliWord.parse("Z1"))], 2)


def test_insert_after_each_gate():
    tape = Tape(1, [RX(-0.6, 0), S(0)], [Probs((0,))])
    out = insert_noise(tape, InsertPolicy(GateKind.AmplitudeDamping, 0.05))
    assert out.operations == (RX(-0.6, 0), AmplitudeDamping(0.05, 0), S(0), AmplitudeDamping(0.05, 0))


def test_insert_covers_every_wire_of_multi_qubit_gates():
    tape = Tape(2, [CNOT(0, 1)], [])
    out = insert_noise(tape, InsertPolicy(GateKind.DepolarizingChannel, 0.1))
    assert [op.wires for op in out.operations] == [(0, 1), (0,), (1,)]


def test_insert_single_qubit_only_and_end():
    tape = Tape(2, [RX(0.1, 0), CNOT(0, 1), RY(0.2, 1)], [])
    single = insert_noise(tape, InsertPolicy(GateKind.DepolarizingChannel, 0.1, AFTER_SINGLE_QUBIT_GATES))
    assert [op.name for op in single.operations] == ["RX", "DepolarizingChannel", "CNOT", "RY",
                                                     "DepolarizingChannel"]
    end = insert_noise(tape, InsertPolicy(GateKind.DepolarizingChannel, 0.1, END))
    assert [op.wires for op in end.operations[3:]] == [(0,), (1,)]


def test_insert_per_wire_params_and_expressions():
    tape = Tape(2, [RX(0.1, 0), RY(0.2, 1)], [], num_inputs=2)
    out = insert_noise(tape, InsertPolicy(GateKind.DepolarizingChannel, 0.0, AFTER_SINGLE_QUBIT_GATES),
                       [Input(0), 0.02])
    assert out.operations[1].params == (Input(0),)
    assert out.operations[3].param_values([0, 0]) == [0.02]
    with pytest.raises(InvalidRequestError):
        insert_noise(tape, InsertPolicy(GateKind.DepolarizingChannel), [0.1])
    with pytest.raises(DomainError):
        insert_noise(tape, InsertPolicy(GateKind.DepolarizingChannel), [0.1, 2.0])


def test_insert_policy_validation():
    with pytest.raises(InvalidRequestError):
        InsertPolicy(GateKind.RX, 0.1)
    with pytest.raises(InvalidRequestError):
        InsertPolicy(GateKind.AmplitudeDamping, 0.1, "sometimes")
    with pytest.raises(DomainError):
        InsertPolicy(GateKind.AmplitudeDamping, 1.5)


def test_noise_insertion_does_not_touch_existing_channels():
    tape = Tape(1, [DepolarizingChannel(0.2, 0)], [])
    out = insert_noise(tape, InsertPolicy(GateKind.AmplitudeDamping, 0.1))
    assert out.operations == tape.operations


@pytest.mark.parametrize("scale, folds", [(1, 0), (2, 1), (3, 1), (4, 2), (5, 2), (7, 3), (9, 4), (2.9, 1)])
def test_fold_count(scale, folds):
    assert fold_count(scale) == folds


def test_fold_count_domain():
    with pytest.raises(DomainError):
        fold_count(0.5)


def test_unitary_folding_structure_and_semantics():
    tape = zne_tape()
    folded = unitary_folding(tape, 5)
    n = len(tape.operations)
    assert len(folded.operations) == 5 * n
    x = [0.5, 0.1, -0.2]
    assert equal_up_to_phase(statevector(folded, x), statevector(tape, x))
    assert unitary_folding(tape, 1) == tape


def test_unitary_folding_rejects_channels():
    with pytest.raises(InvalidRequestError):
        unitary_folding(Tape(1, [DepolarizingChannel(0.1, 0)], []), 3)


def test_fit_zne_matches_polyfit():
    scales = [1.0, 3.0, 5.0, 7.0, 9.0]
    energies = [2.9, 2.6, 2.31, 2.05, 1.83]
    slope, intercept = np.polyfit(scales, energies, 1)
    assert fit_zne(scales, energies) == pytest.approx(intercept, abs=1e-12)
    grad = fit_zne_gradient(scales, energies)
    numeric = central_difference(lambda e: fit_zne(scales, e), energies)[0]
    np.testing.assert_allclose(grad, numeric, atol=1e-8)
    assert grad.sum() == pytest.approx(1.0)


def test_fit_zne_degenerate():
    with pytest.raises(DomainError):
        fit_zne([2.0, 2.0], [1.0, 1.5])
    with pytest.raises(DomainError):
        fit_zne([1.0], [1.0])


def test_zne_noiseless_is_identity():
    tape = zne_tape()
    x = [0.5, 0.1, -0.2]
    batch = zne(tape, unitary_folding, [1, 3, 5])
    mitigated = batch.postprocess(Device(3, "dm").execute_batch(batch.tapes, x))
    np.testing.assert_allclose(mitigated, Device(3).execute(tape, x), atol=1e-9)


def test_zne_accepts_single_transform():
    batch = zne(zne_tape(), unitary_folding_transform(), [1, 3])
    assert len(batch.tapes[1].operations) == 3 * len(zne_tape().operations)


def test_zne_multiple_results():
    tape = noise_template()
    batch = zne(tape, unitary_folding, [1, 3, 5])
    assert len(batch.outputs) == 2
    dev = NoisyDevice(Device(2, "dm"), InsertPolicy(GateKind.DepolarizingChannel, 0.02))
    mitigated = batch.postprocess(dev.execute_batch(batch.tapes, [0.2, 0.3]))
    raw = dev.execute(tape, [0.2, 0.3])
    ideal = Device(2).execute(tape, [0.2, 0.3])
    assert np.all(np.abs(mitigated - ideal) < np.abs(raw - ideal))


def test_zne_improves_depolarized_estimate_and_is_differentiable():
    tape = zne_tape()
    x = [0.5, 0.1, -0.2]
    dev = NoisyDevice(Device(3, "dm"), InsertPolicy(GateKind.DepolarizingChannel, 0.01))
    batch = zne(tape, unitary_folding, [1, 3, 5, 7, 9])
    ideal = Device(3).execute(tape, x)[0]
    raw = dev.execute(tape, x)[0]
    mitigated = batch.postprocess(dev.execute_batch(batch.tapes, x))[0]
    assert abs(mitigated - ideal) < abs(raw - ideal)
    _, jac = batch_jacobian(dev, batch, x)
    numeric = central_difference(lambda v: batch.postprocess(dev.execute_batch(batch.tapes, v)), x)
    np.testing.assert_allclose(jac, numeric, atol=1e-6)


def test_noisy_device_counts_on_wrapped_device():
    base = Device(1, "dm")
    dev = NoisyDevice(base, InsertPolicy(GateKind.AmplitudeDamping, 0.05))
    dev.execute_batch([Tape(1, [RX(0.1, 0)], [Probs((0,))])] * 2)
    assert dev.executions == base.executions == 2


def test_noise_cost_zero_at_truth():
    x = [0.2, 0.3]
    observed = noisy_provider(noise_template(), x, [0.05, 0.02])()
    assert noise_cost(noise_template(), x, [0.05, 0.02], observed) == pytest.approx(0.0, abs=1e-24)
    assert noise_cost(noise_template(), x, [0.1, 0.1], observed) > 0


def test_learn_noise_exact_provider():
    x = [0.2, 0.3]
    history = []
    learned = learn_noise(noise_template(), x, noisy_provider(noise_template(), x, [0.05, 0.02]),
                          [0.1, 0.1], iters=100, history=history)
    np.testing.assert_allclose(learned, [0.05, 0.02], atol=1e-3)
    assert len(history) == 100 and history[-1] < history[0]


def test_learn_noise_clips_to_unit_interval():
    x = [0.2, 0.3]
    learned = learn_noise(noise_template(), x, noisy_provider(noise_template(), x, [0.0, 0.0]),
                          [0.0, 0.0], iters=5, stepsize=10.0)
    assert np.all((learned >= 0) & (learned <= 1))


def test_learn_noise_provider_called_once_per_iteration():
    calls = []
    source = noisy_provider(noise_template(), [0.2, 0.3], [0.05, 0.02])

    def provider():
        calls.append(1)
        return source()

    learn_noise(noise_template(), [0.2, 0.3], provider, [0.1, 0.1], iters=7)
    assert len(calls) == 7


def test_learn_noise_checks_parameter_count():
    with pytest.raises(InvalidRequestError):
        learn_noise(noise_template(), [0.2, 0.3], lambda: np.zeros(2), [0.1], iters=1)


def test_folding_preserves_random_circuits():
    rng = np.random.default_rng(8)
    for _ in range(20):
        tape = random_tape(rng)
        x = rng.uniform(-2, 2, tape.num_inputs)
        assert equal_up_to_phase(statevector(unitary_folding(tape, 3), x), statevector(tape, x))
