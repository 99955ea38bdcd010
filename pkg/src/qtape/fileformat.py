"""Circuit files: YAML documents with infix parameter expressions.

Example::

    wires: 1
    inputs: 1
    defs:
      a: sqrt($0)
    ops:
      - {gate: RX, wires: [0], params: ["@a"]}
    measurements:
      - {type: expval, observable: Z0}

Parameters are numbers or strings in a small expression language:
``$k`` is input slot ``k``, ``@name`` refers to an entry of ``defs``,
``pi`` is a constant, and ``+ - * /`` combine with the functions
``sqrt sin cos square acos atan2``.  Entries of ``defs`` may refer to
earlier entries, which lets one subexpression be shared by many gates.
"""

from __future__ import annotations

import math
import re
from dataclasses import dataclass

import yaml

from .errors import ParseError, QTapeError
from .expr import (
    Acos, Add, Atan2, Const, Cos, Div, Expr, Input, Mul, Neg, Sin, Sqrt, Square, Sub,
    _topological,
)
from .ir import (
    Expval, ExpvalHamiltonian, GateKind, Hamiltonian, Operation, PauliWord, Probs, Tape,
)

_GATES = {k.value.lower(): k for k in GateKind}
_GATES.update({"depolarizing": GateKind.DepolarizingChannel, "amplitude": GateKind.AmplitudeDamping})
_UNARY = {"sqrt": Sqrt, "sin": Sin, "cos": Cos, "square": Square, "acos": Acos}
_BINARY = {"atan2": Atan2}
_FUNC_NAMES = {cls: name for name, cls in {**_UNARY, **_BINARY}.items()}
_INFIX = {Add: "+", Sub: "-", Mul: "*", Div: "/"}

_TOKEN = re.compile(
    r"\s*(?:(?P<num>(?:\d+\.?\d*|\.\d+)(?:[eE][+-]?\d+)?)"
    r"|(?P<input>\$\d+)|(?P<ref>@[A-Za-z_]\w*)|(?P<name>[A-Za-z_]\w*)|(?P<op>[-+*/(),]))"
)


# -- expression language --------------------------------------------------------

@dataclass
class _Token:
    kind: str
    text: str
    pos: int


def _tokenize(text: str, where) -> list[_Token]:
    tokens, pos = [], 0
    text = text.rstrip()
    while pos < len(text):
        m = _TOKEN.match(text, pos)
        if not m or m.end() == pos:
            raise where(f"unexpected character {text[pos:].strip()[:1]!r}", pos)
        kind = m.lastgroup
        tokens.append(_Token(kind, m.group(kind), m.start(kind)))
        pos = m.end()
    tokens.append(_Token("end", "", len(text)))
    return tokens


class _ExprParser:
    def __init__(self, text, defs, where):
        self.where = where
        self.tokens = _tokenize(text, where)
        self.i = 0
        self.defs = defs

    def peek(self):
        return self.tokens[self.i]

    def take(self):
        tok = self.tokens[self.i]
        self.i += 1
        return tok

    def expect(self, text):
        tok = self.take()
        if tok.text != text:
            found = tok.text or "end of expression"
            raise self.where(f"expected {text!r}, found {found!r}", tok.pos)
        return tok

    def parse(self) -> Expr:
        e = self.sum()
        tok = self.peek()
        if tok.kind != "end":
            raise self.where(f"unexpected token {tok.text!r}", tok.pos)
        return e

    def sum(self):
        left = self.product()
        while self.peek().text in ("+", "-"):
            op = self.take().text
            right = self.product()
            left = Add(left, right) if op == "+" else Sub(left, right)
        return left

    def product(self):
        left = self.unary()
        while self.peek().text in ("*", "/"):
            op = self.take().text
            right = self.unary()
            left = Mul(left, right) if op == "*" else Div(left, right)
        return left

    def unary(self):
        if self.peek().text == "-":
            self.take()
            # A minus sign directly on a literal is part of the number.
            if self.peek().kind == "num":
                return Const(-float(self.take().text))
            return Neg(self.unary())
        return self.primary()

    def primary(self):
        tok = self.take()
        if tok.kind == "num":
            return Const(float(tok.text))
        if tok.kind == "input":
            return Input(int(tok.text[1:]))
        if tok.kind == "ref":
            name = tok.text[1:]
            if name not in self.defs:
                raise self.where(f"undefined reference {tok.text!r}", tok.pos)
            return self.defs[name]
        if tok.kind == "name":
            name = tok.text.lower()
            if name == "pi":
                return Const(math.pi)
            if name in _UNARY or name in _BINARY:
                self.expect("(")
                args = [self.sum()]
                while self.peek().text == ",":
                    self.take()
                    args.append(self.sum())
                self.expect(")")
                cls = _UNARY.get(name) or _BINARY[name]
                if len(args) != cls.arity:
                    raise self.where(f"{name} takes {cls.arity} argument(s), got {len(args)}", tok.pos)
                return cls(*args)
            raise self.where(f"unknown function or name {tok.text!r}", tok.pos)
        if tok.text == "(":
            e = self.sum()
            self.expect(")")
            return e
        found = tok.text or "end of expression"
        raise self.where(f"unexpected token {found!r}", tok.pos)


def parse_expr(text: str, defs: dict | None = None) -> Expr:
    """Parse one parameter expression, e.g. ``"sqrt($0) + 0.5"``."""

    def where(message, pos):
        return ParseError(message, None, pos + 1)

    return _ExprParser(str(text), defs or {}, where).parse()


# -- document parsing -------------------------------------------------------------

_LOADER_CONSTRUCT = yaml.SafeLoader("")


def _value(node):
    return _LOADER_CONSTRUCT.construct_object(node, deep=True)


def _err(node, message, offset=0):
    mark = node.start_mark
    return ParseError(message, mark.line + 1, mark.column + 1 + offset)


def _mapping(node, what):
    if not isinstance(node, yaml.MappingNode):
        raise _err(node, f"{what} must be a mapping")
    out = {}
    for key, value in node.value:
        name = _value(key)
        if name in out:
            raise _err(key, f"duplicate key {name!r}")
        out[name] = value
    return out


def _sequence(node, what):
    if not isinstance(node, yaml.SequenceNode):
        raise _err(node, f"{what} must be a list")
    return node.value


def _int(node, what, minimum=0):
    value = _value(node)
    if isinstance(value, bool) or not isinstance(value, int) or value < minimum:
        raise _err(node, f"{what} must be an integer >= {minimum}, got {value!r}")
    return value


def _check_keys(node, allowed, what):
    for key, _ in node.value:
        if _value(key) not in allowed:
            raise _err(key, f"unknown {what} field {_value(key)!r}")


def _param(node, defs) -> Expr:
    if not isinstance(node, yaml.ScalarNode):
        raise _err(node, "a parameter must be a number or an expression string")
    value = _value(node)
    if isinstance(value, bool) or value is None:
        raise _err(node, f"bad parameter {value!r}")
    if isinstance(value, (int, float)):
        try:
            return Const(float(value))
        except QTapeError as exc:
            raise _err(node, str(exc)) from None
    offset = 1 if node.style in ("'", '"') else 0

    def where(message, pos):
        return _err(node, message, offset + pos)

    try:
        return _ExprParser(value, defs, where).parse()
    except ParseError:
        raise
    except QTapeError as exc:
        raise _err(node, str(exc)) from None


def _operation(node, defs, num_wires, num_inputs) -> Operation:
    fields = _mapping(node, "an operation")
    _check_keys(node, {"gate", "wires", "params", "adjoint"}, "operation")
    if "gate" not in fields:
        raise _err(node, "operation is missing 'gate'")
    gate_node = fields["gate"]
    name = str(_value(gate_node))
    kind = _GATES.get(name.lower())
    if kind is None:
        raise _err(gate_node, f"unknown gate {name!r}")
    if "wires" not in fields:
        raise _err(node, f"{name} is missing 'wires'")
    wires = []
    for w in _sequence(fields["wires"], "wires"):
        wire = _int(w, "a wire")
        if wire >= num_wires:
            raise _err(w, f"wire {wire} out of range for {num_wires} wires")
        wires.append(wire)
    params = [_param(p, defs) for p in _sequence(fields["params"], "params")] if "params" in fields else []
    adjoint = False
    if "adjoint" in fields:
        adjoint = _value(fields["adjoint"])
        if not isinstance(adjoint, bool):
            raise _err(fields["adjoint"], "adjoint must be true or false")
    try:
        op = Operation(kind, tuple(wires), tuple(params), adjoint)
    except QTapeError as exc:
        raise _err(node, str(exc)) from None
    for idx in sorted(op.inputs):
        if idx >= num_inputs:
            raise _err(node, f"input ${idx} out of range for {num_inputs} inputs")
    return op


def _word(node):
    try:
        return PauliWord.parse(str(_value(node)))
    except QTapeError as exc:
        raise _err(node, str(exc)) from None


def _measurement(node, num_wires):
    fields = _mapping(node, "a measurement")
    if "type" not in fields:
        raise _err(node, "measurement is missing 'type'")
    kind = str(_value(fields["type"])).lower()
    if kind == "expval":
        _check_keys(node, {"type", "observable"}, "measurement")
        if "observable" not in fields:
            raise _err(node, "expval needs an 'observable'")
        m = Expval(_word(fields["observable"]))
    elif kind == "hamiltonian":
        _check_keys(node, {"type", "terms"}, "measurement")
        if "terms" not in fields:
            raise _err(node, "hamiltonian needs 'terms'")
        terms = []
        for t in _sequence(fields["terms"], "terms"):
            tf = _mapping(t, "a Hamiltonian term")
            _check_keys(t, {"coeff", "word"}, "term")
            if "coeff" not in tf or "word" not in tf:
                raise _err(t, "a term needs 'coeff' and 'word'")
            coeff = _value(tf["coeff"])
            if isinstance(coeff, bool) or not isinstance(coeff, (int, float)):
                raise _err(tf["coeff"], f"coefficient must be a number, got {coeff!r}")
            terms.append((float(coeff), _word(tf["word"])))
        try:
            m = ExpvalHamiltonian(Hamiltonian(tuple(terms)))
        except QTapeError as exc:
            raise _err(node, str(exc)) from None
    elif kind == "probs":
        _check_keys(node, {"type", "wires"}, "measurement")
        if "wires" not in fields:
            raise _err(node, "probs needs 'wires'")
        try:
            m = Probs(tuple(_int(w, "a wire") for w in _sequence(fields["wires"], "wires")))
        except QTapeError as exc:
            raise _err(node, str(exc)) from None
    else:
        raise _err(fields["type"], f"unknown measurement type {kind!r}")
    if m.wires and max(m.wires) >= num_wires:
        raise _err(node, f"measurement wires {m.wires} out of range for {num_wires} wires")
    return m


def parse_circuit(text: str) -> Tape:
    """Read a circuit document into a :class:`Tape`.

    Raises :class:`ParseError` with the line and column of the offending entry.
    """
    try:
        root = yaml.compose(text, Loader=yaml.SafeLoader)
    except yaml.MarkedYAMLError as exc:
        mark = exc.problem_mark
        line = mark.line + 1 if mark else None
        column = mark.column + 1 if mark else None
        raise ParseError(f"invalid YAML: {exc.problem}", line, column) from None
    if root is None:
        raise ParseError("empty circuit file")
    fields = _mapping(root, "a circuit file")
    _check_keys(root, {"wires", "inputs", "defs", "ops", "measurements"}, "circuit")
    if "wires" not in fields:
        raise _err(root, "missing 'wires'")
    num_wires = _int(fields["wires"], "wires", minimum=1)
    num_inputs = _int(fields["inputs"], "inputs") if "inputs" in fields else 0

    defs: dict[str, Expr] = {}
    if "defs" in fields:
        for key, value in _mapping(fields["defs"], "defs").items():
            if not re.fullmatch(r"[A-Za-z_]\w*", str(key)):
                raise _err(fields["defs"], f"bad definition name {key!r}")
            defs[str(key)] = _param(value, defs)

    ops = [_operation(o, defs, num_wires, num_inputs) for o in _sequence(fields["ops"], "ops")] if "ops" in fields else []
    meas = []
    if "measurements" in fields:
        meas = [_measurement(m, num_wires) for m in _sequence(fields["measurements"], "measurements")]

    return Tape(num_wires, ops, meas, num_inputs)


def load_circuit(path) -> Tape:
    with open(path, encoding="utf-8") as fh:
        return parse_circuit(fh.read())


# -- serialization -----------------------------------------------------------------

def _number(value: float) -> str:
    return repr(float(value))


def format_expr(e: Expr, names: dict | None = None) -> str:
    """Fully parenthesized text that :func:`parse_expr` reads back to ``e``."""
    names = names or {}
    memo: dict[int, str] = {}
    for node in _topological([e]):
        if id(node) in names and node is not e:
            memo[id(node)] = "@" + names[id(node)]
            continue
        t = type(node)
        if t is Input:
            text = f"${node.value}"
        elif t is Const:
            text = _number(node.value)
        elif t is Neg:
            text = f"-({memo[id(node.args[0])]})"
        elif t in _INFIX:
            a, b = (memo[id(x)] for x in node.args)
            text = f"({a} {_INFIX[t]} {b})"
        else:
            text = f"{_FUNC_NAMES[t]}({', '.join(memo[id(x)] for x in node.args)})"
        memo[id(node)] = text
    return memo[id(e)]


def _shared_nodes(tape: Tape) -> list[Expr]:
    """Non-leaf nodes used more than once, children before parents."""
    roots = [p for op in tape.operations for p in op.params]
    uses: dict[int, int] = {}
    for p in roots:
        uses[id(p)] = uses.get(id(p), 0) + 1
    order = _topological(roots)
    for node in order:
        for a in node.args:
            uses[id(a)] = uses.get(id(a), 0) + 1
    return [n for n in order if n.args and uses.get(id(n), 0) > 1]


def _param_value(e: Expr, names):
    if type(e) is Const:
        return float(e.value)
    if id(e) in names:
        return "@" + names[id(e)]
    return format_expr(e, names)


def circuit_to_dict(tape: Tape) -> dict:
    shared = _shared_nodes(tape)
    names: dict[int, str] = {}
    defs = {}
    for k, node in enumerate(shared):
        defs[f"d{k}"] = format_expr(node, names)
        names[id(node)] = f"d{k}"
    doc: dict = {"wires": tape.num_wires, "inputs": tape.num_inputs}
    if defs:
        doc["defs"] = defs
    ops = []
    for op in tape.operations:
        entry: dict = {"gate": op.name, "wires": list(op.wires)}
        if op.params:
            entry["params"] = [_param_value(p, names) for p in op.params]
        if op.adjoint:
            entry["adjoint"] = True
        ops.append(entry)
    doc["ops"] = ops
    meas = []
    for m in tape.measurements:
        if isinstance(m, Expval):
            meas.append({"type": "expval", "observable": str(m.word)})
        elif isinstance(m, ExpvalHamiltonian):
            terms = [{"coeff": c, "word": str(w)} for c, w in m.hamiltonian.terms]
            meas.append({"type": "hamiltonian", "terms": terms})
        else:
            meas.append({"type": "probs", "wires": list(m.wires)})
    doc["measurements"] = meas
    return doc


class _Dumper(yaml.SafeDumper):
    pass


def _flow_lists(dumper, data):
    flow = all(not isinstance(x, (dict, list)) for x in data)
    return dumper.represent_sequence("tag:yaml.org,2002:seq", data, flow_style=flow)


_Dumper.add_representer(list, _flow_lists)


def serialize_circuit(tape: Tape) -> str:
    """YAML text for ``tape``; parsing it back yields an equal tape."""
    return yaml.dump(circuit_to_dict(tape), Dumper=_Dumper, sort_keys=False, width=100)


def save_circuit(tape: Tape, path) -> None:
    with open(path, "w", encoding="utf-8") as fh:
        fh.write(serialize_circuit(tape))
