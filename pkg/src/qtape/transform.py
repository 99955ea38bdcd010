"""Single and batch transforms over tapes.

A single transform maps one tape to one tape.  A batch transform maps one
tape to several tapes plus a classical post-processing step.  Post-processing
is written as expressions over the concatenated tape results, which makes it
differentiable with respect to those results by the same reverse-mode
machinery that tracks gate parameters.
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import Callable, Sequence

import numpy as np

from .errors import InvalidRequestError
from .expr import Const, Expr, Input, evaluate_all, evaluate_rows, jacobian
from .ir import Expval, ExpvalHamiltonian, Tape


def _check_same_inputs(name: str, before: Tape, after: Tape):
    if after.num_inputs != before.num_inputs:
        raise InvalidRequestError(
            f"transform {name} changed num_inputs from {before.num_inputs} to {after.num_inputs}"
        )


@dataclass(frozen=True)
class SingleTransform:
    """Tape-to-tape map ``fn(tape, *hyperparams)``.

    Calling the transform on a list maps it over the list.
    """

    name: str
    fn: Callable[..., Tape]
    hyperparams: tuple = ()

    def apply(self, tape: Tape) -> Tape:
        out = self.fn(tape, *self.hyperparams)
        _check_same_inputs(self.name, tape, out)
        return out

    def __call__(self, tapes):
        if isinstance(tapes, Tape):
            return self.apply(tapes)
        return map_over(self, tapes)

    def with_hyperparams(self, values: Sequence[float]) -> "SingleTransform":
        if len(values) != len(self.hyperparams):
            raise InvalidRequestError(
                f"{self.name} takes {len(self.hyperparams)} hyperparameters, got {len(values)}"
            )
        return SingleTransform(self.name, self.fn, tuple(float(v) for v in values))


def identity() -> SingleTransform:
    return SingleTransform("identity", lambda tape: tape)


def compose(first: SingleTransform, second: SingleTransform) -> SingleTransform:
    """Transform applying ``first`` then ``second``; hyperparameters concatenate."""
    split = len(first.hyperparams)

    def fn(tape, *hp):
        a = first.with_hyperparams(hp[:split]) if split else first
        b = second.with_hyperparams(hp[split:]) if len(hp) > split else second
        return b.apply(a.apply(tape))

    return SingleTransform(
        f"{first.name}|{second.name}", fn, tuple(first.hyperparams) + tuple(second.hyperparams)
    )


def map_over(transform, tapes: Sequence[Tape]) -> list:
    """Apply a single or batch transform to each tape, preserving order."""
    return [transform.apply(t) for t in tapes]


@dataclass(frozen=True)
class BatchResult:
    """Tapes to execute plus expressions combining their results.

    ``outputs`` reference ``Input(k)`` for the k-th entry of the concatenated
    result vectors of ``tapes`` (in tape order).
    """

    tapes: tuple
    outputs: tuple

    def __post_init__(self):
        object.__setattr__(self, "tapes", tuple(self.tapes))
        object.__setattr__(self, "outputs", tuple(self.outputs))
        if not self.tapes:
            raise InvalidRequestError("a batch transform must emit at least one tape")
        n = self.num_results
        for e in self.outputs:
            if e.inputs and max(e.inputs) >= n:
                raise InvalidRequestError("post-processing references a missing result")

    @property
    def num_results(self) -> int:
        return sum(t.result_size for t in self.tapes)

    def _flatten(self, results) -> np.ndarray:
        if len(results) != len(self.tapes):
            raise InvalidRequestError(
                f"expected results for {len(self.tapes)} tapes, got {len(results)}"
            )
        return np.concatenate([np.asarray(r, dtype=float).reshape(-1) for r in results])

    def postprocess(self, results) -> np.ndarray:
        """Combine per-tape results.

        When every result is a 2-D array of shot batches, the expressions are
        applied batch by batch and one row per batch is returned.
        """
        arrays = [np.asarray(r, dtype=float) for r in results]
        if arrays and all(a.ndim == 2 for a in arrays):
            nrows = {a.shape[0] for a in arrays}
            if len(nrows) != 1:
                raise InvalidRequestError("shot-batch results have unequal batch counts")
            nrows.pop()
            return evaluate_rows(self.outputs, np.concatenate(arrays, axis=1))
        return np.array(evaluate_all(self.outputs, self._flatten(arrays)), dtype=float)

    def postprocess_jacobian(self, results) -> tuple[np.ndarray, np.ndarray]:
        """Values and ``d outputs / d concatenated results``."""
        return jacobian(self.outputs, self._flatten(results))


@dataclass(frozen=True)
class BatchTransform:
    """Tape-to-batch map ``fn(tape, *hyperparams) -> BatchResult``."""

    name: str
    fn: Callable[..., BatchResult]
    hyperparams: tuple = ()

    def apply(self, tape: Tape) -> BatchResult:
        out = self.fn(tape, *self.hyperparams)
        for t in out.tapes:
            _check_same_inputs(self.name, tape, t)
        return out

    def __call__(self, tapes):
        if isinstance(tapes, Tape):
            return self.apply(tapes)
        return map_over(self, tapes)

    def with_hyperparams(self, values: Sequence[float]) -> "BatchTransform":
        return BatchTransform(self.name, self.fn, tuple(float(v) for v in values))


def linear_combination(coeffs: Sequence[float], offset: int = 0) -> Expr:
    """``sum_i coeffs[i] * Input(offset + i)`` as an expression."""
    terms = [Const(c) * Input(offset + i) for i, c in enumerate(coeffs)]
    total = terms[0]
    for t in terms[1:]:
        total = total + t
    return total


def hamiltonian_expand(tape: Tape) -> BatchResult:
    """One tape per Hamiltonian term; post-processing is the weighted sum."""
    if len(tape.measurements) != 1 or not isinstance(tape.measurements[0], ExpvalHamiltonian):
        raise InvalidRequestError("hamiltonian_expand needs a single Hamiltonian expectation")
    ham = tape.measurements[0].hamiltonian
    tapes = [tape.with_measurements([Expval(word)]) for word in ham.words]
    return BatchResult(tapes, [linear_combination(ham.coeffs)])


def hyperparam_gradient(fn: Callable[[np.ndarray], np.ndarray], hyperparams: Sequence[float],
                        step: Callable[[float], float] | None = None) -> np.ndarray:
    """Central-difference derivative of ``fn`` with respect to each hyperparameter.

    The default step for a value ``v`` is ``1e-6 * max(1, |v|)``.  Returns an
    array of shape ``(len(fn(h)), len(hyperparams))``.
    """
    hp = np.asarray(hyperparams, dtype=float)
    if step is None:
        step = lambda v: 1e-6 * max(1.0, abs(v))  # noqa: E731
    columns = []
    for i, v in enumerate(hp):
        d = step(v)
        up, down = hp.copy(), hp.copy()
        up[i] += d
        down[i] -= d
        diff = (np.atleast_1d(fn(up)) - np.atleast_1d(fn(down))) / (2 * d)
        columns.append(diff)
    if not columns:
        return np.zeros((np.atleast_1d(fn(hp)).size, 0))
    return np.stack(columns, axis=1)
