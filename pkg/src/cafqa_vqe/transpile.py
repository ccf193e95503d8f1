"""Lowering to the trapped-ion native set {rx, ry, rz, rxx}.

CNOT becomes one XX(pi/2) plus single-qubit rotations; Clifford letters
become rotations; then consecutive same-axis rotations on a qubit are merged.
There is no Euler resynthesis.  Global phase is not tracked.
"""

from __future__ import annotations

import math

from .circuit import NATIVE, Circuit, CircuitError, Gate, gate

ZERO_TOL = 1e-12
_HALF = math.pi / 2


def normalize_angle(theta: float) -> float:
    """Map to (-pi, pi]."""
    t = math.remainder(theta, 2 * math.pi)
    return math.pi if t == -math.pi else t


def decompose_cnot(control: int, target: int) -> list[Gate]:
    """CNOT = Ry_c(pi/2) XX(pi/2) Rx_c(-pi/2) Rx_t(-pi/2) Ry_c(-pi/2), in time order."""
    if control == target:
        raise CircuitError("cx needs distinct qubits")
    return [
        gate("ry", control, params=(_HALF,)),
        gate("rxx", control, target, params=(_HALF,)),
        gate("rx", control, params=(-_HALF,)),
        gate("rx", target, params=(-_HALF,)),
        gate("ry", control, params=(-_HALF,)),
    ]


_ONE_QUBIT_RULES = {
    "h": (("rz", math.pi), ("ry", _HALF)),
    "s": (("rz", _HALF),),
    "sdg": (("rz", -_HALF),),
    "x": (("rx", math.pi),),
    "y": (("ry", math.pi),),
    "z": (("rz", math.pi),),
}


def lower(g: Gate) -> list[Gate]:
    """Rewrite one gate into native gates without merging."""
    if g.name in NATIVE:
        return [g]
    if g.name == "cx":
        return decompose_cnot(*g.qubits)
    if g.name in _ONE_QUBIT_RULES:
        return [gate(axis, g.qubits[0], params=(theta,)) for axis, theta in _ONE_QUBIT_RULES[g.name]]
    raise CircuitError(f"unsupported gate {g.name!r}")


def merge_rotations(n_qubits: int, gates: list[Gate]) -> list[Gate]:
    """Merge consecutive same-axis rotations per qubit; drop zero angles.

    A per-qubit stack of output positions lets a cancelled pair expose the
    gate before it, so ``rz(a) rx(t) rx(-t) rz(b)`` collapses to ``rz(a+b)``.
    """
    out: list[Gate | None] = []
    stacks: list[list[int]] = [[] for _ in range(n_qubits)]
    for g in gates:
        theta = normalize_angle(g.params[0])
        if abs(theta) <= ZERO_TOL:
            continue
        if g.name == "rxx":
            out.append(Gate("rxx", g.qubits, (theta,)))
            for q in g.qubits:
                stacks[q].append(len(out) - 1)
            continue
        q = g.qubits[0]
        top = stacks[q][-1] if stacks[q] else None
        if top is not None and out[top].name == g.name:
            merged = normalize_angle(out[top].params[0] + theta)
            if abs(merged) <= ZERO_TOL:
                out[top] = None
                stacks[q].pop()
            else:
                out[top] = Gate(g.name, (q,), (merged,))
        else:
            out.append(Gate(g.name, (q,), (theta,)))
            stacks[q].append(len(out) - 1)
    return [g for g in out if g is not None]


def transpile(c: Circuit) -> Circuit:
    lowered = [ng for g in c.gates for ng in lower(g)]
    return c.with_gates(merge_rotations(c.n_qubits, lowered))


def is_native(c: Circuit) -> bool:
    return all(g.name in NATIVE and (g.name != "rxx" or 0 < abs(g.params[0]) <= math.pi)
               for g in c.gates)
