"""Independent dense-matrix oracles and random generators shared by the tests.

Operators are built with explicit Kronecker products (qubit 0 is the most
significant factor), deliberately not reusing the backend's tensor code.
"""

from __future__ import annotations

import math
from functools import reduce

import numpy as np

from cafqa_vqe.circuit import Circuit, gate
from cafqa_vqe.pauli import PauliHamiltonian

I2 = np.eye(2, dtype=complex)
X = np.array([[0, 1], [1, 0]], dtype=complex)
Y = np.array([[0, -1j], [1j, 0]], dtype=complex)
Z = np.array([[1, 0], [0, -1]], dtype=complex)
H = np.array([[1, 1], [1, -1]], dtype=complex) / math.sqrt(2)
S = np.diag([1, 1j])
SDG = np.diag([1, -1j])
PAULI = {"I": I2, "X": X, "Y": Y, "Z": Z}
FIXED = {"h": H, "s": S, "sdg": SDG, "x": X, "y": Y, "z": Z}

CLIFFORD_1Q = ("h", "s", "sdg", "x", "y", "z", "rx", "ry", "rz")
ALL_GATES = CLIFFORD_1Q + ("cx", "rxx")
NON_NATIVE = ("h", "s", "sdg", "x", "y", "z", "rx", "ry", "rz", "cx")


def embed(n: int, ops: dict[int, np.ndarray]) -> np.ndarray:
    return reduce(np.kron, [ops.get(q, I2) for q in range(n)])


def pauli_matrix(ops: str) -> np.ndarray:
    return reduce(np.kron, [PAULI[c] for c in ops])


def rot(axis: str, theta: float) -> np.ndarray:
    p = PAULI[axis.upper()]
    return math.cos(theta / 2) * I2 - 1j * math.sin(theta / 2) * p


def gate_unitary(n: int, g) -> np.ndarray:
    name, qs, params = g
    if name in FIXED:
        return embed(n, {qs[0]: FIXED[name]})
    if name in ("rx", "ry", "rz"):
        return embed(n, {qs[0]: rot(name[1], params[0])})
    if name == "cx":
        a, b = qs
        p1 = np.diag([0, 1]).astype(complex)
        return np.eye(2 ** n) - embed(n, {a: p1, b: I2 - X})
    if name == "rxx":
        a, b = qs
        return math.cos(params[0] / 2) * np.eye(2 ** n) - 1j * math.sin(params[0] / 2) * embed(n, {a: X, b: X})
    raise ValueError(name)


def unitary(c: Circuit) -> np.ndarray:
    u = np.eye(2 ** c.n_qubits, dtype=complex)
    for g in c.gates:
        u = gate_unitary(c.n_qubits, g) @ u
    return u


def state(c: Circuit) -> np.ndarray:
    return unitary(c)[:, 0]


def expectation(psi: np.ndarray, ops: str) -> float:
    return float(np.real(np.vdot(psi, pauli_matrix(ops) @ psi)))


def distribution(c: Circuit) -> np.ndarray:
    """Probabilities over all qubits, index = bitstring with qubit 0 first."""
    return np.abs(state(c)) ** 2


def phase_distance(a: np.ndarray, b: np.ndarray) -> float:
    """Max elementwise deviation after aligning global phase."""
    idx = np.unravel_index(np.argmax(np.abs(b)), b.shape)
    phase = a[idx] / b[idx]
    return float(np.max(np.abs(a - phase * b)))


def random_clifford_circuit(rng: np.random.Generator, n: int, depth: int) -> Circuit:
    gates = []
    for _ in range(depth):
        name = ALL_GATES[rng.integers(len(ALL_GATES))] if n > 1 else CLIFFORD_1Q[rng.integers(len(CLIFFORD_1Q))]
        if name in ("cx", "rxx"):
            a, b = rng.choice(n, size=2, replace=False)
            params = (int(rng.integers(-4, 5)) * math.pi / 2,) if name == "rxx" else ()
            gates.append(gate(name, int(a), int(b), params=params))
        else:
            params = (int(rng.integers(-4, 5)) * math.pi / 2,) if name.startswith("r") else ()
            gates.append(gate(name, int(rng.integers(n)), params=params))
    return Circuit(n, tuple(gates))


def random_circuit(rng: np.random.Generator, n: int, depth: int, measure: bool = False) -> Circuit:
    gates = []
    for _ in range(depth):
        name = ALL_GATES[rng.integers(len(ALL_GATES))] if n > 1 else CLIFFORD_1Q[rng.integers(len(CLIFFORD_1Q))]
        if name in ("cx", "rxx"):
            a, b = rng.choice(n, size=2, replace=False)
            params = (float(rng.uniform(-2 * math.pi, 2 * math.pi)),) if name == "rxx" else ()
            gates.append(gate(name, int(a), int(b), params=params))
        else:
            params = (float(rng.uniform(-2 * math.pi, 2 * math.pi)),) if name.startswith("r") else ()
            gates.append(gate(name, int(rng.integers(n)), params=params))
    c = Circuit(n, tuple(gates))
    return c.measure_all() if measure else c


def random_pauli(rng: np.random.Generator, n: int, allow_identity: bool = True) -> str:
    while True:
        ops = "".join("IXYZ"[i] for i in rng.integers(4, size=n))
        if allow_identity or set(ops) != {"I"}:
            return ops


def random_hamiltonian(rng: np.random.Generator, n: int, n_terms: int, scale: float = 1.0) -> PauliHamiltonian:
    terms = [(float(rng.normal(0, scale)), random_pauli(rng, n)) for _ in range(n_terms)]
    return PauliHamiltonian.from_terms(terms, n)


def dense_hamiltonian(h: PauliHamiltonian) -> np.ndarray:
    m = h.identity_offset * np.eye(2 ** h.n_qubits, dtype=complex)
    for c, p in h.terms:
        m = m + c * pauli_matrix(p.ops)
    return m


def random_input(rng: np.random.Generator, n: int, depth: int) -> Circuit:
    """Random circuit over the non-native gate set, for the transpiler."""
    gates = []
    for _ in range(depth):
        name = NON_NATIVE[rng.integers(len(NON_NATIVE))] if n > 1 else NON_NATIVE[rng.integers(9)]
        if name == "cx":
            a, b = rng.choice(n, size=2, replace=False)
            gates.append(gate("cx", int(a), int(b)))
        elif name.startswith("r"):
            gates.append(gate(name, int(rng.integers(n)), params=[float(rng.uniform(-7, 7))]))
        else:
            gates.append(gate(name, int(rng.integers(n))))
    return Circuit(n, tuple(gates))


def random_measured(rng: np.random.Generator, n: int, depth: int) -> Circuit:
    """Random circuit with a random partial measurement map and classical register."""
    c = random_circuit(rng, n, depth)
    n_clbits = int(rng.integers(0, n + 2))
    k = int(rng.integers(0, min(n, n_clbits) + 1))
    qs = rng.choice(n, size=k, replace=False)
    cs = rng.choice(n_clbits, size=k, replace=False) if k else []
    return Circuit(n, c.gates, tuple((int(q), int(b)) for q, b in zip(qs, cs)), n_clbits)
