"""OpenQASM 2.0 subset used as the broker's circuit payload.

Accepted: the ``OPENQASM 2.0;`` header, ``include "qelib1.inc";`` (ignored),
one ``qreg``, at most one ``creg``, the gates x y z h s sdg rx ry rz cx rxx,
terminal ``measure q[i] -> c[j];`` and ``//`` comments.  Angle expressions
take numbers, ``pi``, parentheses, unary minus and + - * /.
Everything else is rejected with a line/column location.
"""

from __future__ import annotations

import math
import re
from dataclasses import dataclass

from .circuit import GATES, PARAMETRIC, TWO_QUBIT, Circuit, CircuitError, Gate


class QasmError(ValueError):
    def __init__(self, message: str, line: int, col: int):
        super().__init__(f"{line}:{col}: {message}")
        self.msg = message
        self.line = line
        self.col = col


@dataclass(frozen=True)
class Token:
    kind: str
    text: str
    line: int
    col: int


_TOKEN_RE = re.compile(r"""
    (?P<ws>[ \t\r\f\v]+)
  | (?P<nl>\n)
  | (?P<comment>//[^\n]*)
  | (?P<number>(?:\d+\.\d*|\.\d+|\d+)(?:[eE][-+]?\d+)?)
  | (?P<id>[A-Za-z_][A-Za-z0-9_]*)
  | (?P<string>"[^"\n]*")
  | (?P<arrow>->)
  | (?P<sym>[;,\[\]()+\-*/])
""", re.VERBOSE)


def tokenize(text: str) -> list[Token]:
    tokens = []
    pos, line, line_start = 0, 1, 0
    while pos < len(text):
        m = _TOKEN_RE.match(text, pos)
        col = pos - line_start + 1
        if m is None:
            raise QasmError(f"unexpected character {text[pos]!r}", line, col)
        kind = m.lastgroup
        if kind == "nl":
            line += 1
            line_start = m.end()
        elif kind not in ("ws", "comment"):
            tokens.append(Token(kind, m.group(), line, col))
        pos = m.end()
    tokens.append(Token("eof", "", line, pos - line_start + 1))
    return tokens


class _Parser:
    def __init__(self, text: str):
        self.tokens = tokenize(text)
        self.i = 0
        self.qreg: tuple[str, int] | None = None
        self.creg: tuple[str, int] | None = None
        self.gates: list[Gate] = []
        self.measurements: list[tuple[int, int]] = []
        self.measured_q: set[int] = set()
        self.used_c: set[int] = set()

    @property
    def tok(self) -> Token:
        return self.tokens[self.i]

    def error(self, message: str, tok: Token | None = None) -> QasmError:
        tok = tok or self.tok
        return QasmError(message, tok.line, tok.col)

    def advance(self) -> Token:
        tok = self.tok
        self.i += 1
        return tok

    def expect(self, text: str) -> Token:
        if self.tok.text != text or self.tok.kind == "string":
            found = self.tok.text or "end of input"
            raise self.error(f"expected {text!r}, found {found!r}")
        return self.advance()

    def expect_kind(self, kind: str, what: str) -> Token:
        if self.tok.kind != kind:
            found = self.tok.text or "end of input"
            raise self.error(f"expected {what}, found {found!r}")
        return self.advance()

    def parse(self) -> Circuit:
        head = self.tok
        if head.text != "OPENQASM":
            raise self.error("program must start with 'OPENQASM 2.0;'")
        self.advance()
        version = self.expect_kind("number", "version number")
        if version.text not in ("2.0", "2"):
            raise self.error(f"unsupported OpenQASM version {version.text}", version)
        self.expect(";")
        while self.tok.kind != "eof":
            self.statement()
        if self.qreg is None:
            raise self.error("missing qreg declaration")
        n_clbits = self.creg[1] if self.creg else 0
        return Circuit(self.qreg[1], tuple(self.gates), tuple(self.measurements), n_clbits)

    def statement(self) -> None:
        tok = self.tok
        if tok.kind != "id":
            raise self.error(f"unexpected {tok.text!r}")
        word = tok.text
        if word == "include":
            self.advance()
            path = self.expect_kind("string", "include path")
            if path.text != '"qelib1.inc"':
                raise self.error(f"only qelib1.inc may be included, got {path.text}", path)
            self.expect(";")
        elif word in ("qreg", "creg"):
            self.register(word)
        elif word == "measure":
            self.measure()
        elif word in GATES:
            self.gate()
        else:
            raise self.error(f"unsupported statement or gate {word!r}")

    def register(self, kind: str) -> None:
        kw = self.advance()
        if (kind == "qreg" and self.qreg) or (kind == "creg" and self.creg):
            raise self.error(f"only one {kind} is supported", kw)
        if kind == "creg" and self.qreg is None:
            raise self.error("creg must follow qreg", kw)
        name = self.expect_kind("id", "register name")
        if self.qreg and name.text == self.qreg[0]:
            raise self.error(f"register name {name.text!r} already used", name)
        self.expect("[")
        size_tok = self.expect_kind("number", "register size")
        if not size_tok.text.isdigit():
            raise self.error("register size must be an integer", size_tok)
        size = int(size_tok.text)
        if size < 1 and kind == "qreg":
            raise self.error("qreg needs at least one qubit", size_tok)
        self.expect("]")
        self.expect(";")
        if kind == "qreg":
            self.qreg = (name.text, size)
        else:
            self.creg = (name.text, size)

    def operand(self, reg: tuple[str, int] | None, kind: str) -> int:
        name = self.expect_kind("id", f"{kind} operand")
        if reg is None:
            raise self.error(f"{kind} used before declaration", name)
        if name.text != reg[0]:
            raise self.error(f"unknown register {name.text!r}", name)
        if self.tok.text != "[":
            raise self.error("whole-register operands are not supported; index a single bit")
        self.advance()
        idx_tok = self.expect_kind("number", "index")
        if not idx_tok.text.isdigit():
            raise self.error("index must be a non-negative integer", idx_tok)
        idx = int(idx_tok.text)
        if idx >= reg[1]:
            raise self.error(f"index {idx} out of range for {reg[0]}[{reg[1]}]", idx_tok)
        self.expect("]")
        return idx

    def gate(self) -> None:
        name_tok = self.advance()
        name = name_tok.text
        params: list[float] = []
        if self.tok.text == "(":
            self.advance()
            params.append(self.expr())
            while self.tok.text == ",":
                self.advance()
                params.append(self.expr())
            self.expect(")")
        n_params = 1 if name in PARAMETRIC else 0
        if len(params) != n_params:
            raise self.error(f"{name} takes {n_params} parameter(s), got {len(params)}", name_tok)
        if self.qreg is None:
            raise self.error("gate before qreg declaration", name_tok)
        qubits = [self.operand(self.qreg, "qubit")]
        while self.tok.text == ",":
            self.advance()
            qubits.append(self.operand(self.qreg, "qubit"))
        arity = 2 if name in TWO_QUBIT else 1
        if len(qubits) != arity:
            raise self.error(f"{name} takes {arity} qubit(s), got {len(qubits)}", name_tok)
        if arity == 2 and qubits[0] == qubits[1]:
            raise self.error(f"{name} needs two distinct qubits", name_tok)
        for q in qubits:
            if q in self.measured_q:
                raise self.error(f"gate on qubit {q} after its measurement", name_tok)
        self.expect(";")
        self.gates.append(Gate(name, tuple(qubits), tuple(params)))

    def measure(self) -> None:
        kw = self.advance()
        q = self.operand(self.qreg, "qubit")
        self.expect_kind("arrow", "'->'")
        if self.creg is None:
            raise self.error("measure without a creg", kw)
        c = self.operand(self.creg, "clbit")
        self.expect(";")
        if q in self.measured_q:
            raise self.error(f"qubit {q} measured twice", kw)
        if c in self.used_c:
            raise self.error(f"clbit {c} written twice", kw)
        self.measured_q.add(q)
        self.used_c.add(c)
        self.measurements.append((q, c))

    # Angle expressions

    def expr(self) -> float:
        value = self.term()
        while self.tok.text in ("+", "-"):
            op = self.advance().text
            rhs = self.term()
            value = value + rhs if op == "+" else value - rhs
        return value

    def term(self) -> float:
        value = self.unary()
        while self.tok.text in ("*", "/"):
            op = self.advance()
            rhs = self.unary()
            if op.text == "*":
                value *= rhs
            else:
                if rhs == 0:
                    raise self.error("division by zero", op)
                value /= rhs
        return value

    def unary(self) -> float:
        if self.tok.text == "-":
            self.advance()
            return -self.unary()
        if self.tok.text == "+":
            self.advance()
            return self.unary()
        return self.primary()

    def primary(self) -> float:
        tok = self.tok
        if tok.kind == "number":
            self.advance()
            value = float(tok.text)
            if not math.isfinite(value):
                raise self.error(f"number {tok.text} overflows", tok)
            return value
        if tok.kind == "id" and tok.text == "pi":
            self.advance()
            return math.pi
        if tok.text == "(":
            self.advance()
            value = self.expr()
            self.expect(")")
            return value
        found = tok.text or "end of input"
        raise self.error(f"expected angle expression, found {found!r}")


def parse_qasm(text: str) -> Circuit:
    parser = _Parser(text)
    try:
        return parser.parse()
    except CircuitError as exc:
        raise parser.error(str(exc)) from None


def _angle(v: float) -> str:
    if not math.isfinite(v):
        raise ValueError(f"cannot serialize non-finite angle {v}")
    return format(v, ".17g")


def serialize_qasm(c: Circuit) -> str:
    lines = ["OPENQASM 2.0;", 'include "qelib1.inc";', f"qreg q[{c.n_qubits}];"]
    if c.n_clbits:
        lines.append(f"creg c[{c.n_clbits}];")
    for g in c.gates:
        params = f"({','.join(_angle(p) for p in g.params)})" if g.params else ""
        args = ",".join(f"q[{q}]" for q in g.qubits)
        lines.append(f"{g.name}{params} {args};")
    lines.extend(f"measure q[{q}] -> c[{cb}];" for q, cb in c.measurements)
    return "\n".join(lines) + "\n"
