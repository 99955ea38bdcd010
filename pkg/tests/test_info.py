from pathlib import Path

import pytest

from qtape.compile import single_qubit_fusion
from qtape.errors import InputIndexError
from qtape.expr import Input
from qtape.fileformat import load_circuit
from qtape.info import draw, specs
from qtape.ir import CNOT, H, RX, S, AmplitudeDamping, Probs, Rot, Tape

FIXTURES = Path(__file__).parent / "fixtures"


def test_draw_single_wire_with_channels():
    tape = Tape(1, [RX(Input(0), 0), AmplitudeDamping(0.05, 0), S(0), AmplitudeDamping(0.05, 0)],
                [Probs((0,))], 1)
    assert draw(tape, [-0.6]) == "0: --RX(-0.6)--AmplitudeDamping(0.05)--S--AmplitudeDamping(0.05)--| Probs"


def test_draw_empty_tape():
    assert draw(Tape(1, [], [Probs((0,))])) == "0: --| Probs"


def test_draw_four_significant_digits():
    tape = Tape(1, [Rot(3.14159265, 0.000123456, -12345.6, 0)], [])
    assert draw(tape) == "0: --Rot(3.142,0.0001235,-1.235e+04)--|"


def test_draw_requires_inputs():
    with pytest.raises(InputIndexError):
        draw(Tape(1, [RX(Input(0), 0)], [], 1), [])


@pytest.mark.parametrize("name, inputs", [
    ("compile_example", [0.1, 0.2, 0.3]),
    ("fused_compile_example", [0.1, 0.2, 0.3]),
    ("adjoint_gates", []),
])
def test_draw_golden(name, inputs):
    tape = load_circuit(FIXTURES / "circuits" / f"{name}.yaml")
    expected = (FIXTURES / "golden" / f"{name}.txt").read_text().rstrip("\n")
    assert draw(tape, inputs) == expected


def test_controlled_gate_marks_are_aligned():
    lines = draw(load_circuit(FIXTURES / "circuits" / "compile_example.yaml"), [0.1, 0.2, 0.3]).splitlines()
    control = lines[0].index("C")
    assert lines[1][control] == "X"
    target = lines[0].index("X")
    assert lines[1][target] == "|" and lines[2][target] == "C"
    assert len({line.rindex("--|") for line in lines}) == 1


def test_specs_small_circuit():
    report = specs(Tape(2, [H(0), CNOT(0, 1)], []))
    assert report.depth == 2
    assert report.gate_counts == {"CNOT": 1, "H": 1}
    assert report.num_operations == 2


def test_specs_empty():
    report = specs(Tape(1))
    assert (report.depth, report.num_operations, report.num_trainable_params) == (0, 0, 0)
    assert report.gate_counts == {}


def test_specs_five_qubit_trainable_params():
    tape = load_circuit(FIXTURES / "circuits" / "five_qubit.yaml")
    assert specs(tape).num_trainable_params == 20
    assert specs(single_qubit_fusion(tape)).num_trainable_params == 15


def test_specs_expand_rot_depth():
    tape = Tape(1, [Rot(0.1, 0.2, 0.3, 0), H(0)], [])
    assert specs(tape).depth == 2
    assert specs(tape, expand_rot=True).depth == 4


def test_specs_lines():
    lines = specs(Tape(2, [H(0), CNOT(0, 1)], [])).lines()
    assert "depth: 2" in lines and "gate H: 1" in lines
