from pathlib import Path

import math
import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from qtape.errors import ParseError
from qtape.expr import Add, Const, Input, Neg, Sqrt, evaluate
from qtape.fileformat import format_expr, load_circuit, parse_circuit, parse_expr, serialize_circuit
from qtape.ir import GateKind

from test_expr import smooth_exprs

FIXTURES = sorted((Path(__file__).parent / "fixtures" / "circuits").glob("*.yaml"))


def test_fixture_corpus_is_large_enough():
    assert len(FIXTURES) >= 20


@pytest.mark.parametrize("path", FIXTURES, ids=lambda p: p.stem)
def test_round_trip(path):
    tape = load_circuit(path)
    text = serialize_circuit(tape)
    again = parse_circuit(text)
    assert again == tape
    assert serialize_circuit(again) == text


def test_minimal_file():
    tape = parse_circuit("wires: 1\ninputs: 1\nops: [{gate: rx, wires: [0], params: ['$0']}]\n"
                         "measurements: [{type: expval, observable: Z0}]\n")
    assert len(tape.operations) == 1
    assert tape.operations[0].kind is GateKind.RX
    assert tape.operations[0].params == (Input(0),)


def test_sqrt_parameter():
    tape = parse_circuit("wires: 1\ninputs: 1\nops: [{gate: RX, wires: [0], params: ['sqrt($0)']}]\n")
    assert tape.operations[0].params == (Sqrt(Input(0)),)


def test_defs_are_shared_objects():
    tape = load_circuit(Path(__file__).parent / "fixtures" / "circuits" / "defs_shared.yaml")
    a = tape.operations[0].params[0]
    assert a == Add(Input(0), Input(1))
    assert tape.operations[2].params[0].args[1] is a


def test_expression_precedence_and_literals():
    assert evaluate(parse_expr("1 + 2 * 3 - 4 / 2"), []) == 5.0
    assert evaluate(parse_expr("-(2) * 3"), []) == -6.0
    assert parse_expr("-0.5") == Const(-0.5)
    assert parse_expr("-$0") == Neg(Input(0))
    assert evaluate(parse_expr("atan2(1, 1) * 4"), []) == pytest.approx(math.pi)
    assert evaluate(parse_expr("PI"), []) == pytest.approx(math.pi)


@pytest.mark.parametrize("text, fragment", [
    ("$0 +", "unexpected token"),
    ("sqrt($0", r"expected '\)'"),
    ("foo($0)", "unknown function"),
    ("atan2($0)", "takes 2"),
    ("$0 # 1", "unexpected character"),
    ("@nothing", "undefined reference"),
])
def test_expression_errors(text, fragment):
    with pytest.raises(ParseError, match=fragment):
        parse_expr(text)


def _error(text):
    with pytest.raises(ParseError) as info:
        parse_circuit(text)
    return info.value


def test_unknown_gate_names_token_and_position():
    err = _error("wires: 1\nops:\n  - {gate: foo, wires: [0]}\n")
    assert "'foo'" in str(err)
    assert (err.line, err.column) == (3, 12)


def test_arity_mismatch():
    err = _error("wires: 1\nops:\n  - {gate: RX, wires: [0]}\n")
    assert "takes 1 parameters" in str(err) and err.line == 3


def test_wire_out_of_range():
    err = _error("wires: 2\nops:\n  - {gate: CNOT, wires: [0, 2]}\n")
    assert "out of range" in str(err)
    assert (err.line, err.column) == (3, 29)


def test_malformed_expression_position():
    err = _error("wires: 1\ninputs: 1\nops:\n  - {gate: RX, wires: [0], params: [\"$0 * \"]}\n")
    assert err.line == 4
    assert "end of expression" in str(err) or "unexpected token" in str(err)


def test_input_out_of_range():
    err = _error("wires: 1\ninputs: 1\nops:\n  - {gate: RX, wires: [0], params: ['$3']}\n")
    assert "$3" in str(err) and err.line == 4


@pytest.mark.parametrize("text, fragment", [
    ("", "empty"),
    ("wires: 1\nops: [\n", "invalid YAML"),
    ("- 1\n- 2\n", "mapping"),
    ("ops: []\n", "missing 'wires'"),
    ("wires: 0\n", "wires must be"),
    ("wires: 1\ncolour: red\n", "unknown circuit field"),
    ("wires: 1\nmeasurements: [{type: sample}]\n", "unknown measurement type"),
    ("wires: 1\nmeasurements: [{type: expval, observable: Q0}]\n", "bad Pauli"),
    ("wires: 1\nmeasurements: [{type: expval, observable: Z4}]\n", "out of range"),
    ("wires: 1\nops: [{gate: S, wires: [0], adjoint: maybe}]\n", "adjoint"),
    ("wires: 1\nops: [{gate: RX, wires: [0], params: [[1]]}]\n", "parameter"),
    ("wires: 1\nwires: 2\n", "duplicate key"),
])
def test_document_errors(text, fragment):
    with pytest.raises(ParseError, match=fragment):
        parse_circuit(text)


@settings(max_examples=150, deadline=None)
@given(e=smooth_exprs())
def test_format_expr_round_trip(e):
    assert parse_expr(format_expr(e)) == e


@settings(max_examples=50, deadline=None)
@given(value=st.floats(allow_nan=False, allow_infinity=False, width=64))
def test_numeric_constants_round_trip_exactly(value):
    assert parse_expr(format_expr(Const(value))).value == value
    assert parse_expr(format_expr(Neg(Const(value)))) == Neg(Const(value))


def test_serialized_values_match_original_evaluation():
    path = Path(__file__).parent / "fixtures" / "circuits" / "expression_syntax.yaml"
    tape = load_circuit(path)
    again = parse_circuit(serialize_circuit(tape))
    x = np.array([0.3, -0.2, 1.1])
    for a, b in zip(tape.operations, again.operations):
        assert a.param_values(x) == b.param_values(x)
