"""Dense simulators: statevector, density matrix, and shot sampling.

Shot noise is drawn from NumPy's PCG64 generator.  Each executed tape gets
its own stream seeded with ``[seed, execution_index]``, so results depend
only on the device seed and the order in which tapes were submitted.
"""

from __future__ import annotations

import math
import threading
from dataclasses import dataclass
from typing import Sequence

import numpy as np

from .errors import InputIndexError, InvalidRequestError, WidthError
from .ir import (
    Expval,
    ExpvalHamiltonian,
    GateKind,
    PauliWord,
    Probs,
    Tape,
    gate_matrix,
    kraus_operators,
)

STATEVECTOR = "statevector"
DENSITY_MATRIX = "density_matrix"
_BACKEND_ALIASES = {
    "sv": STATEVECTOR,
    "statevector": STATEVECTOR,
    "dm": DENSITY_MATRIX,
    "density_matrix": DENSITY_MATRIX,
    "mixed": DENSITY_MATRIX,
}

_H = gate_matrix(GateKind.H)
_SDG = gate_matrix(GateKind.S, adjoint=True)
_BASIS_CHANGE = {"X": _H, "Y": _H @ _SDG}


def _apply(tensor: np.ndarray, mat: np.ndarray, axes: Sequence[int]) -> np.ndarray:
    k = len(axes)
    m = mat.reshape((2,) * (2 * k))
    out = np.tensordot(m, tensor, axes=(list(range(k, 2 * k)), list(axes)))
    return np.moveaxis(out, list(range(k)), list(axes))


@dataclass
class SimState:
    """Pure (``mixed=False``, a vector) or mixed (a matrix) state of ``num_wires`` qubits."""

    data: np.ndarray
    num_wires: int
    mixed: bool = False

    @classmethod
    def zero(cls, num_wires: int, mixed: bool = False) -> "SimState":
        dim = 2**num_wires
        if mixed:
            data = np.zeros((dim, dim), dtype=complex)
            data[0, 0] = 1.0
        else:
            data = np.zeros(dim, dtype=complex)
            data[0] = 1.0
        return cls(data, num_wires, mixed)

    def _tensor(self):
        n = self.num_wires
        shape = (2,) * (2 * n if self.mixed else n)
        return self.data.reshape(shape)

    def apply_unitary(self, mat: np.ndarray, wires: Sequence[int]) -> "SimState":
        t = _apply(self._tensor(), mat, wires)
        if self.mixed:
            t = _apply(t, mat.conj(), [w + self.num_wires for w in wires])
        return SimState(t.reshape(self.data.shape), self.num_wires, self.mixed)

    def apply_kraus(self, ops: Sequence[np.ndarray], wires: Sequence[int]) -> "SimState":
        if not self.mixed:
            raise InvalidRequestError("channels require a density-matrix state")
        base = self._tensor()
        n = self.num_wires
        acc = np.zeros_like(base)
        for k in ops:
            t = _apply(base, k, wires)
            acc = acc + _apply(t, k.conj(), [w + n for w in wires])
        return SimState(acc.reshape(self.data.shape), n, True)

    def probabilities(self, wires: Sequence[int] | None = None) -> np.ndarray:
        """Computational-basis probabilities of ``wires`` (first wire most significant)."""
        n = self.num_wires
        if self.mixed:
            full = np.real(np.diagonal(self.data)).reshape((2,) * n)
        else:
            full = (np.abs(self.data) ** 2).reshape((2,) * n)
        if wires is None:
            wires = list(range(n))
        others = tuple(w for w in range(n) if w not in wires)
        marg = full.sum(axis=others) if others else full
        # sum() leaves the kept axes in increasing wire order
        kept = sorted(wires)
        marg = np.transpose(marg, [kept.index(w) for w in wires])
        return np.clip(marg.reshape(-1), 0.0, None)

    def rotate_to_eigenbasis(self, word: PauliWord) -> "SimState":
        state = self
        for wire, pauli in word.factors:
            if pauli in _BASIS_CHANGE:
                state = state.apply_unitary(_BASIS_CHANGE[pauli], [wire])
        return state

    def trace(self) -> float:
        if self.mixed:
            return float(np.real(np.trace(self.data)))
        return float(np.vdot(self.data, self.data).real)


def _parity_signs(word: PauliWord, num_wires: int) -> np.ndarray:
    idx = np.arange(2**num_wires)
    parity = np.zeros_like(idx)
    for w in word.wires:
        parity ^= (idx >> (num_wires - 1 - w)) & 1
    return 1 - 2 * parity


def _check_word(state: SimState, word: PauliWord):
    if max(word.wires) >= state.num_wires:
        raise WidthError(f"Pauli word on {word.wires} exceeds {state.num_wires} wires")


def expval_pauli(state: SimState, word: PauliWord) -> float:
    """Exact expectation of a Pauli word."""
    _check_word(state, word)
    probs = state.rotate_to_eigenbasis(word).probabilities()
    value = float(np.dot(probs, _parity_signs(word, state.num_wires)))
    return min(1.0, max(-1.0, value))


def _plus_probability(state: SimState, word: PauliWord) -> float:
    _check_word(state, word)
    probs = state.rotate_to_eigenbasis(word).probabilities()
    return min(1.0, float(np.dot(probs, _parity_signs(word, state.num_wires) > 0)))


def sample_word(state: SimState, word: PauliWord, n: int, rng: np.random.Generator) -> np.ndarray:
    """``n`` independent +/-1 eigenvalue draws of ``word`` measured on ``state``."""
    p_plus = _plus_probability(state, word)
    return np.where(rng.random(n) < p_plus, 1, -1)


def _word_means(state, word, shots, count, rng):
    p_plus = _plus_probability(state, word)
    draws = rng.random((count, shots)) < p_plus
    return 2.0 * draws.mean(axis=1) - 1.0


def _probs_frequencies(state, wires, shots, count, rng):
    probs = state.probabilities(wires)
    cdf = np.cumsum(probs)
    cdf /= cdf[-1]
    dim = len(probs)
    draws = np.minimum(np.searchsorted(cdf, rng.random((count, shots)), side="right"), dim - 1)
    flat = draws + dim * np.arange(count)[:, None]
    return np.bincount(flat.ravel(), minlength=dim * count).reshape(count, dim) / shots


def evolve(tape: Tape, inputs: Sequence[float], mixed: bool = False) -> SimState:
    """Run the operations of ``tape`` from ``|0...0>``."""
    state = SimState.zero(tape.num_wires, mixed)
    for op in tape.operations:
        values = op.param_values(inputs)
        if op.kind.is_channel:
            state = state.apply_kraus(kraus_operators(op.kind, values), op.wires)
        else:
            state = state.apply_unitary(gate_matrix(op.kind, values, op.adjoint), op.wires)
    return state


def exact_results(state: SimState, measurements) -> np.ndarray:
    out = []
    for m in measurements:
        if isinstance(m, Expval):
            out.append(expval_pauli(state, m.word))
        elif isinstance(m, ExpvalHamiltonian):
            out.append(sum(c * expval_pauli(state, w) for c, w in m.hamiltonian.terms))
        elif isinstance(m, Probs):
            out.extend(state.probabilities(m.wires))
        else:
            raise InvalidRequestError(f"unknown measurement {m!r}")
    return np.array(out, dtype=float)


def sampled_results(state: SimState, measurements, shots: int, rng, count: int = 1) -> np.ndarray:
    """Shot estimates for ``count`` independent batches of ``shots`` each.

    Returns an array of shape ``(count, result_size)``.  Every measurement
    (and every Hamiltonian term) is sampled in its own eigenbasis.
    """
    cols = []
    for m in measurements:
        if isinstance(m, Expval):
            cols.append(_word_means(state, m.word, shots, count, rng)[:, None])
        elif isinstance(m, ExpvalHamiltonian):
            total = sum(c * _word_means(state, w, shots, count, rng) for c, w in m.hamiltonian.terms)
            cols.append(np.asarray(total, dtype=float)[:, None])
        elif isinstance(m, Probs):
            cols.append(_probs_frequencies(state, m.wires, shots, count, rng))
        else:
            raise InvalidRequestError(f"unknown measurement {m!r}")
    if not cols:
        return np.zeros((count, 0))
    return np.concatenate(cols, axis=1)


class Device:
    """Execution target with an execution counter.

    Args:
        num_wires: number of qubits available.
        backend: ``"statevector"`` or ``"density_matrix"`` (aliases ``sv``/``dm``).
        shots: ``None`` for exact results, an integer shot count, or a list of
            ``(shots_per_batch, num_batches)`` pairs.  With batches, ``execute``
            returns one row per batch.
        seed: seed for the shot sampler.  ``None`` draws fresh entropy.
    """

    def __init__(self, num_wires: int, backend: str = STATEVECTOR, shots=None, seed: int | None = None):
        if backend not in _BACKEND_ALIASES:
            raise InvalidRequestError(f"unknown backend {backend!r}")
        self.num_wires = int(num_wires)
        self.backend = _BACKEND_ALIASES[backend]
        self.shots = _normalize_shots(shots)
        self.seed = seed
        self.executions = 0
        self._lock = threading.Lock()
        self._entropy = np.random.SeedSequence().entropy if seed is None else None

    @property
    def mixed(self) -> bool:
        return self.backend == DENSITY_MATRIX

    @property
    def shot_batches(self) -> bool:
        return isinstance(self.shots, list)

    def __repr__(self):
        return (f"Device({self.num_wires}, backend={self.backend!r}, shots={self.shots!r}, "
                f"seed={self.seed!r})")

    def _check(self, tape: Tape, inputs: Sequence[float]):
        if tape.num_wires > self.num_wires:
            raise WidthError(f"tape uses {tape.num_wires} wires, device has {self.num_wires}")
        if len(inputs) != tape.num_inputs:
            raise InputIndexError(f"tape expects {tape.num_inputs} inputs, got {len(inputs)}")
        if not self.mixed and tape.has_channels:
            raise InvalidRequestError("statevector backend cannot apply noise channels")

    def _claim_index(self) -> int:
        with self._lock:
            index = self.executions
            self.executions += 1
        return index

    def rng_for(self, index: int) -> np.random.Generator:
        root = self.seed if self.seed is not None else self._entropy
        return np.random.default_rng([root, index])

    def execute(self, tape: Tape, inputs: Sequence[float] = ()) -> np.ndarray:
        """Run one tape.  Returns a 1-D result vector, or ``(batches, results)``
        when the device is configured with shot batches."""
        inputs = np.asarray(inputs, dtype=float)
        self._check(tape, inputs)
        index = self._claim_index()
        return self._run(tape, inputs, index)

    def _run(self, tape, inputs, index):
        state = evolve(tape, inputs, self.mixed)
        if self.shots is None:
            return exact_results(state, tape.measurements)
        rng = self.rng_for(index)
        if isinstance(self.shots, int):
            return sampled_results(state, tape.measurements, self.shots, rng)[0]
        return np.concatenate(
            [sampled_results(state, tape.measurements, s, rng, count) for s, count in self.shots]
        )

    def execute_batch(self, tapes: Sequence[Tape], inputs: Sequence[float] = ()) -> list[np.ndarray]:
        """Run several tapes; stream indices follow list order."""
        inputs = np.asarray(inputs, dtype=float)
        for tape in tapes:
            self._check(tape, inputs)
        return [self._run(tape, inputs, self._claim_index()) for tape in tapes]


def _normalize_shots(shots):
    if shots is None:
        return None
    if isinstance(shots, (int, np.integer)):
        if shots < 1:
            raise InvalidRequestError("shots must be positive")
        return int(shots)
    batches = [(int(s), int(b)) for s, b in shots]
    if not batches or any(s < 1 or b < 1 for s, b in batches):
        raise InvalidRequestError(f"bad shot batches {shots!r}")
    return batches


def statevector(tape: Tape, inputs: Sequence[float] = ()) -> np.ndarray:
    """Final statevector of a channel-free tape."""
    if tape.has_channels:
        raise InvalidRequestError("statevector simulation cannot apply noise channels")
    return evolve(tape, np.asarray(inputs, dtype=float)).data


def equal_up_to_phase(a: np.ndarray, b: np.ndarray, atol: float = 1e-9) -> bool:
    """True when ``a == exp(i g) b`` for some global phase ``g``."""
    a = np.asarray(a).reshape(-1)
    b = np.asarray(b).reshape(-1)
    k = int(np.argmax(np.abs(b)))
    if abs(b[k]) < atol:
        return bool(np.allclose(a, b, atol=atol))
    phase = a[k] / b[k]
    if not math.isclose(abs(phase), 1.0, abs_tol=max(atol, 1e-12) * 10):
        return False
    phase /= abs(phase)
    return bool(np.allclose(a, phase * b, atol=atol, rtol=0))
