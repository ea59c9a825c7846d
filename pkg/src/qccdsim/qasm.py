"""
Reader and writer for the small QASM dialect used by the toolkit.

Accepted statements::

    qreg q[N];
    h q[0];  x|y|z|s|sdg|t|tdg q[i];  rz(3*pi/4) q[i];
    cx q[i],q[j];  swap q[i],q[j];  mcx q[c1],...,q[ck],q[t];
    measure q[i];  barrier;

plus the native extensions ``gpi(phi)``, ``gpi2(phi)``, ``ms(phi0,phi1)`` and
``ntrz(level,sign)``. ``OPENQASM``/``include`` header lines and ``//``
comments are ignored.
"""

from __future__ import annotations

import ast
import math
import operator
import re
from dataclasses import dataclass

from .circuit import CircuitDag, Gate, GateKind

_TOKEN = re.compile(
    r"""
    (?P<ws>[ \t\r]+)
  | (?P<comment>//[^\n]*)
  | (?P<nl>\n)
  | (?P<num>(?:\d+\.\d*|\.\d+|\d+)(?:[eE][-+]?\d+)?)
  | (?P<ident>[A-Za-z_][A-Za-z0-9_]*)
  | (?P<string>"[^"\n]*")
  | (?P<sym>[\[\](),;*/+\-])
  """,
    re.VERBOSE,
)

_NAMES = {k.value: k for k in GateKind}
_N_PARAMS = {GateKind.RZ: 1, GateKind.GPI: 1, GateKind.GPI2: 1, GateKind.MS: 2, GateKind.NTRZ: 2}


class QasmError(ValueError):
    """Parse failure carrying a 1-based source position."""

    def __init__(self, message: str, line: int, col: int):
        super().__init__(f"line {line}, column {col}: {message}")
        self.line = line
        self.col = col


@dataclass(frozen=True)
class _Tok:
    kind: str
    text: str
    line: int
    col: int


def _tokenize(text: str) -> list[_Tok]:
    toks: list[_Tok] = []
    line, line_start, pos = 1, 0, 0
    while pos < len(text):
        m = _TOKEN.match(text, pos)
        if m is None:
            raise QasmError(f"unexpected character {text[pos]!r}", line, pos - line_start + 1)
        kind = m.lastgroup
        if kind == "nl":
            line += 1
            line_start = m.end()
        elif kind not in ("ws", "comment"):
            toks.append(_Tok(kind, m.group(), line, pos - line_start + 1))
        pos = m.end()
    return toks


_BINOPS = {ast.Add: operator.add, ast.Sub: operator.sub, ast.Mult: operator.mul, ast.Div: operator.truediv}


def _eval_expr(node: ast.AST) -> float:
    if isinstance(node, ast.Expression):
        return _eval_expr(node.body)
    if isinstance(node, ast.Constant) and isinstance(node.value, (int, float)):
        return float(node.value)
    if isinstance(node, ast.Name) and node.id == "pi":
        return math.pi
    if isinstance(node, ast.UnaryOp) and isinstance(node.op, (ast.USub, ast.UAdd)):
        v = _eval_expr(node.operand)
        return -v if isinstance(node.op, ast.USub) else v
    if isinstance(node, ast.BinOp) and type(node.op) in _BINOPS:
        return _BINOPS[type(node.op)](_eval_expr(node.left), _eval_expr(node.right))
    raise ValueError("unsupported expression")


class _Parser:
    def __init__(self, text: str):
        self.toks = _tokenize(text)
        self.i = 0
        self.reg: str | None = None
        self.width = 0
        self.gates: list[Gate] = []

    def peek(self) -> _Tok | None:
        return self.toks[self.i] if self.i < len(self.toks) else None

    def fail(self, msg: str, tok: _Tok | None = None) -> QasmError:
        tok = tok or self.peek() or (self.toks[-1] if self.toks else _Tok("eof", "", 1, 1))
        return QasmError(msg, tok.line, tok.col)

    def next(self) -> _Tok:
        tok = self.peek()
        if tok is None:
            raise self.fail("unexpected end of input")
        self.i += 1
        return tok

    def expect(self, text: str) -> _Tok:
        tok = self.next()
        if tok.text != text:
            raise self.fail(f"expected {text!r}, found {tok.text!r}", tok)
        return tok

    def skip_to_semicolon(self) -> None:
        while self.next().text != ";":
            pass

    def parse(self) -> CircuitDag:
        while self.peek() is not None:
            tok = self.next()
            if tok.kind != "ident":
                raise self.fail(f"expected statement, found {tok.text!r}", tok)
            if tok.text in ("OPENQASM", "include"):
                self.skip_to_semicolon()
            elif tok.text == "qreg":
                self.parse_qreg(tok)
            elif tok.text == "barrier":
                # Operand lists on barriers are accepted and ignored; barriers span all wires.
                self.skip_to_semicolon()
                self.gates.append(Gate(GateKind.BARRIER, ()))
            else:
                self.parse_gate(tok)
        if self.reg is None:
            raise QasmError("missing qreg declaration", 1, 1)
        return CircuitDag(self.width, tuple(self.gates))

    def parse_qreg(self, head: _Tok) -> None:
        if self.reg is not None:
            raise self.fail("only one qreg is supported", head)
        name = self.next()
        if name.kind != "ident":
            raise self.fail("expected register name", name)
        self.expect("[")
        size = self.next()
        if size.kind != "num" or not size.text.isdigit():
            raise self.fail("register size must be an integer", size)
        self.expect("]")
        self.expect(";")
        self.reg, self.width = name.text, int(size.text)

    def parse_params(self) -> list[float]:
        self.expect("(")
        params: list[float] = []
        while True:
            start = self.peek()
            parts: list[str] = []
            depth = 0
            while True:
                tok = self.next()
                if tok.text == "(":
                    depth += 1
                elif tok.text == ")" and depth == 0:
                    break
                elif tok.text == ")":
                    depth -= 1
                elif tok.text == "," and depth == 0:
                    break
                elif tok.text == ";":
                    raise self.fail("unterminated parameter list", tok)
                parts.append(tok.text)
            if not parts:
                raise self.fail("empty parameter", start)
            try:
                params.append(_eval_expr(ast.parse(" ".join(parts), mode="eval")))
            except (SyntaxError, ValueError, ZeroDivisionError):
                raise self.fail(f"invalid parameter expression {' '.join(parts)!r}", start) from None
            if tok.text == ")":
                return params

    def parse_operand(self) -> int:
        name = self.next()
        if name.kind != "ident":
            raise self.fail(f"expected qubit operand, found {name.text!r}", name)
        if self.reg is None:
            raise self.fail("qubit used before qreg declaration", name)
        if name.text != self.reg:
            raise self.fail(f"unknown register {name.text!r}", name)
        self.expect("[")
        idx = self.next()
        if idx.kind != "num" or not idx.text.isdigit():
            raise self.fail("qubit index must be an integer", idx)
        self.expect("]")
        q = int(idx.text)
        if q >= self.width:
            raise self.fail(f"qubit index {q} out of range for register of size {self.width}", idx)
        return q

    def parse_gate(self, head: _Tok) -> None:
        kind = _NAMES.get(head.text)
        if kind is None or kind is GateKind.BARRIER:
            raise self.fail(f"unknown gate {head.text!r}", head)
        params: list[float] = []
        if self.peek() is not None and self.peek().text == "(":
            params = self.parse_params()
        if len(params) != _N_PARAMS.get(kind, 0):
            raise self.fail(f"{kind.value} expects {_N_PARAMS.get(kind, 0)} parameter(s)", head)
        qubits = [self.parse_operand()]
        while self.peek() is not None and self.peek().text == ",":
            self.next()
            qubits.append(self.parse_operand())
        self.expect(";")
        try:
            self.gates.append(Gate(kind, tuple(qubits), tuple(params)))
        except ValueError as exc:
            raise self.fail(str(exc), head) from None


def parse_circuit(text: str) -> CircuitDag:
    """Parse QASM-subset text into a validated circuit."""
    return _Parser(text).parse()


def _fmt(p: float | int) -> str:
    return str(p) if isinstance(p, int) else repr(float(p))


def write_circuit(dag: CircuitDag) -> str:
    """Serialize a circuit; ``parse_circuit(write_circuit(c)) == c``."""
    lines = ["OPENQASM 2.0;", f"qreg q[{dag.num_qubits}];"]
    for g in dag.gates:
        if g.kind is GateKind.BARRIER:
            lines.append("barrier;")
            continue
        head = g.kind.value
        if g.params:
            head += "(" + ",".join(_fmt(p) for p in g.params) + ")"
        lines.append(f"{head} " + ",".join(f"q[{q}]" for q in g.qubits) + ";")
    return "\n".join(lines) + "\n"
