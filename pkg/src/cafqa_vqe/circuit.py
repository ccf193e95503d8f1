"""Gate-list circuit representation shared by the ansatz, QASM, transpiler and backends."""

from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Iterable, NamedTuple

ONE_QUBIT = frozenset({"x", "y", "z", "h", "s", "sdg", "rx", "ry", "rz"})
TWO_QUBIT = frozenset({"cx", "rxx"})
PARAMETRIC = frozenset({"rx", "ry", "rz", "rxx"})
GATES = ONE_QUBIT | TWO_QUBIT
NATIVE = frozenset({"rx", "ry", "rz", "rxx"})


class CircuitError(ValueError):
    pass


class Gate(NamedTuple):
    name: str
    qubits: tuple[int, ...]
    params: tuple[float, ...] = ()

    def __repr__(self) -> str:
        p = f"({', '.join(f'{v:.6g}' for v in self.params)})" if self.params else ""
        return f"{self.name}{p} {','.join(f'q{q}' for q in self.qubits)}"


def gate(name: str, *qubits: int, params: Iterable[float] = ()) -> Gate:
    return Gate(name, tuple(int(q) for q in qubits), tuple(float(p) for p in params))


@dataclass(frozen=True)
class Circuit:
    """Ordered gates followed by terminal measurements ``(qubit, clbit)``."""

    n_qubits: int
    gates: tuple[Gate, ...] = ()
    measurements: tuple[tuple[int, int], ...] = ()
    n_clbits: int = 0

    def __post_init__(self):
        if self.n_qubits < 1:
            raise CircuitError("circuit needs at least one qubit")
        if self.n_clbits < 0:
            raise CircuitError("negative clbit count")
        for g in self.gates:
            validate_gate(g, self.n_qubits)
        seen_q, seen_c = set(), set()
        for q, c in self.measurements:
            if not 0 <= q < self.n_qubits:
                raise CircuitError(f"measured qubit {q} out of range")
            if not 0 <= c < self.n_clbits:
                raise CircuitError(f"clbit {c} out of range")
            if q in seen_q or c in seen_c:
                raise CircuitError(f"qubit {q} or clbit {c} measured twice")
            seen_q.add(q)
            seen_c.add(c)

    def with_gates(self, gates: Iterable[Gate]) -> "Circuit":
        return Circuit(self.n_qubits, tuple(gates), self.measurements, self.n_clbits)

    def append(self, *gates: Gate) -> "Circuit":
        return self.with_gates(self.gates + tuple(gates))

    def measure_all(self) -> "Circuit":
        return Circuit(self.n_qubits, self.gates,
                       tuple((q, q) for q in range(self.n_qubits)), self.n_qubits)

    def without_measurements(self) -> "Circuit":
        return Circuit(self.n_qubits, self.gates)

    def count(self, name: str) -> int:
        return sum(g.name == name for g in self.gates)


def validate_gate(g: Gate, n_qubits: int) -> None:
    if g.name not in GATES:
        raise CircuitError(f"unsupported gate {g.name!r}")
    arity = 2 if g.name in TWO_QUBIT else 1
    if len(g.qubits) != arity:
        raise CircuitError(f"{g.name} acts on {arity} qubit(s), got {len(g.qubits)}")
    if any(not 0 <= q < n_qubits for q in g.qubits):
        raise CircuitError(f"{g.name} qubit index out of range in {g.qubits}")
    if arity == 2 and g.qubits[0] == g.qubits[1]:
        raise CircuitError(f"{g.name} needs two distinct qubits")
    n_params = 1 if g.name in PARAMETRIC else 0
    if len(g.params) != n_params:
        raise CircuitError(f"{g.name} takes {n_params} parameter(s), got {len(g.params)}")
    if any(not math.isfinite(v) for v in g.params):
        raise CircuitError(f"{g.name} has a non-finite parameter")
