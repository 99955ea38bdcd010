"""Text drawings and resource summaries of tapes."""

from __future__ import annotations

from collections import Counter
from dataclasses import dataclass, field
from typing import Sequence

from .errors import InputIndexError
from .ir import Expval, ExpvalHamiltonian, GateKind, Operation, Tape, collect_trainable_params

_CONTROL_LABELS = {GateKind.CNOT: ("C", "X"), GateKind.CZ: ("C", "Z")}


def _fmt(v: float) -> str:
    text = f"{v:.4g}"
    return "0" if text == "-0" else text


def _labels(op: Operation, inputs) -> dict[int, str]:
    if op.kind in _CONTROL_LABELS:
        ctrl, target = _CONTROL_LABELS[op.kind]
        return {op.wires[0]: ctrl, op.wires[1]: target}
    name = op.name + ("†" if op.adjoint else "")
    if op.params:
        name += "(" + ",".join(_fmt(v) for v in op.param_values(inputs)) + ")"
    return {w: name for w in op.wires}


def _measurement_label(m) -> str:
    if isinstance(m, Expval):
        return f"<{m.word}>"
    if isinstance(m, ExpvalHamiltonian):
        return "<H>"
    return "Probs"


def _layers(ops: Sequence[Operation], num_wires: int) -> list[list[Operation]]:
    """Greedy layering; multi-wire gates also block the wires they span."""
    level = [0] * num_wires
    layers: list[list[Operation]] = []
    for op in ops:
        span = range(min(op.wires), max(op.wires) + 1)
        k = max(level[w] for w in span)
        if k == len(layers):
            layers.append([])
        layers[k].append(op)
        for w in span:
            level[w] = k + 1
    return layers


def draw(tape: Tape, inputs: Sequence[float] = ()) -> str:
    """One text line per wire: ``w: --GATE(values)--...--| measurement``.

    Gate parameters are evaluated at ``inputs`` and shown to four
    significant digits.  Controlled gates show ``C`` on the control wire,
    gates that span several wires show ``|`` on the wires in between.
    """
    if len(inputs) < tape.num_inputs:
        raise InputIndexError(f"tape needs {tape.num_inputs} inputs, got {len(inputs)}")
    rows: list[list[str]] = [[] for _ in range(tape.num_wires)]
    for layer in _layers(tape.operations, tape.num_wires):
        cells: dict[int, tuple[str, bool]] = {}
        for op in layer:
            marks = op.kind in _CONTROL_LABELS
            for w, text in _labels(op, inputs).items():
                cells[w] = (text, marks)
            for w in range(min(op.wires), max(op.wires) + 1):
                cells.setdefault(w, ("|", True))
        width = max(len(text) for text, _ in cells.values())
        for w in range(tape.num_wires):
            text, centered = cells.get(w, ("", False))
            if centered:
                left = (width - len(text)) // 2
                rows[w].append("-" * left + text + "-" * (width - len(text) - left))
            else:
                rows[w].append(text.ljust(width, "-"))
    ends = [[] for _ in range(tape.num_wires)]
    for m in tape.measurements:
        for w in m.wires:
            ends[w].append(_measurement_label(m))
    pad = len(str(tape.num_wires - 1))
    lines = []
    for w in range(tape.num_wires):
        body = "".join("--" + c for c in rows[w])
        tail = "--|" + (" " + ", ".join(ends[w]) if ends[w] else "")
        lines.append(f"{w:>{pad}}: {body}{tail}")
    return "\n".join(lines)


@dataclass(frozen=True)
class Specs:
    num_wires: int
    gate_counts: dict = field(default_factory=dict)
    num_operations: int = 0
    num_trainable_params: int = 0
    depth: int = 0

    def lines(self) -> list[str]:
        out = [
            f"wires: {self.num_wires}",
            f"operations: {self.num_operations}",
            f"trainable_params: {self.num_trainable_params}",
            f"depth: {self.depth}",
        ]
        out += [f"gate {name}: {count}" for name, count in self.gate_counts.items()]
        return out


def depth(tape: Tape, expand_rot: bool = False) -> int:
    """Greedy wire-conflict layering; ``Rot`` costs three layers if expanded."""
    level = [0] * tape.num_wires
    for op in tape.operations:
        cost = 3 if expand_rot and op.kind is GateKind.Rot else 1
        k = max(level[w] for w in op.wires) + cost
        for w in op.wires:
            level[w] = k
    return max(level, default=0)


def specs(tape: Tape, expand_rot: bool = False) -> Specs:
    """Gate counts, operation total, distinct trainable parameters and depth."""
    counts = Counter(op.name for op in tape.operations)
    trainable = {expr for _, _, expr in collect_trainable_params(tape)}
    return Specs(
        num_wires=tape.num_wires,
        gate_counts=dict(sorted(counts.items())),
        num_operations=len(tape.operations),
        num_trainable_params=len(trainable),
        depth=depth(tape, expand_rot),
    )
