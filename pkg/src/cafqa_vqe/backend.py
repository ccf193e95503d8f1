"""Dense statevector execution with optional depolarizing and readout noise.

Stands in for the trapped-ion device.  Qubit ``q`` is tensor axis ``q`` and
character ``j`` of a returned bitstring is classical bit ``j``.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import Mapping

import numpy as np

from .circuit import Circuit, CircuitError, Gate
from .pauli import PauliHamiltonian, PauliString

MAX_QUBITS = 12

_I = np.eye(2, dtype=complex)
_X = np.array([[0, 1], [1, 0]], dtype=complex)
_Y = np.array([[0, -1j], [1j, 0]], dtype=complex)
_Z = np.diag([1, -1]).astype(complex)
_H = np.array([[1, 1], [1, -1]], dtype=complex) / math.sqrt(2)
_S = np.diag([1, 1j])
_SDG = np.diag([1, -1j])
_CX = np.array([[1, 0, 0, 0], [0, 1, 0, 0], [0, 0, 0, 1], [0, 0, 1, 0]], dtype=complex)
PAULI_MATRICES = {"I": _I, "X": _X, "Y": _Y, "Z": _Z}
_FIXED = {"x": _X, "y": _Y, "z": _Z, "h": _H, "s": _S, "sdg": _SDG, "cx": _CX}


class BackendError(RuntimeError):
    pass


@dataclass(frozen=True)
class NoiseModel:
    """Per-gate depolarizing probabilities and per-qubit readout flips.

    Defaults are the trapped-ion device figures read as ``p = 1 - fidelity``:
    single-qubit 99.7 %, two-qubit 98.9-99.3 % (midpoint taken), SPAM 0.27 %.
    """

    p1: float = 0.003
    p2: float = 0.009
    p_spam: float = 0.0027

    def __post_init__(self):
        for name in ("p1", "p2", "p_spam"):
            v = getattr(self, name)
            if not 0.0 <= v < 1.0:
                raise ValueError(f"{name}={v} outside [0, 1)")

    @property
    def is_noiseless(self) -> bool:
        return self.p1 == 0 and self.p2 == 0 and self.p_spam == 0


@dataclass(frozen=True)
class Histogram:
    counts: dict[str, int]
    shots: int

    def __post_init__(self):
        if sum(self.counts.values()) != self.shots:
            raise ValueError("counts do not sum to shots")

    def frequencies(self) -> dict[str, float]:
        return {k: v / self.shots for k, v in self.counts.items()}


def rotation(axis: str, theta: float) -> np.ndarray:
    c, s = math.cos(theta / 2), math.sin(theta / 2)
    return c * _I - 1j * s * PAULI_MATRICES[axis.upper()]


def gate_matrix(g: Gate) -> np.ndarray:
    if g.name in _FIXED:
        return _FIXED[g.name]
    if g.name in ("rx", "ry", "rz"):
        return rotation(g.name[1], g.params[0])
    if g.name == "rxx":
        t = g.params[0]
        return math.cos(t / 2) * np.eye(4) - 1j * math.sin(t / 2) * np.kron(_X, _X)
    raise CircuitError(f"unsupported gate {g.name!r}")


def _apply(state: np.ndarray, matrix: np.ndarray, qubits: tuple[int, ...]) -> np.ndarray:
    k = len(qubits)
    m = matrix.reshape((2,) * (2 * k))
    out = np.tensordot(m, state, axes=(list(range(k, 2 * k)), list(qubits)))
    return np.moveaxis(out, list(range(k)), list(qubits))


def zero_state(n_qubits: int) -> np.ndarray:
    state = np.zeros((2,) * n_qubits, dtype=complex)
    state[(0,) * n_qubits] = 1.0
    return state


def _check_size(c: Circuit) -> None:
    if c.n_qubits > MAX_QUBITS:
        raise BackendError(f"{c.n_qubits} qubits exceeds dense simulation bound {MAX_QUBITS}")


def statevector(c: Circuit, errors: Mapping[int, str] | None = None) -> np.ndarray:
    """Final state as an ``(2,)*n`` tensor.

    ``errors`` maps gate index to a Pauli label (one letter per gate qubit)
    injected right after that gate; used by the trajectory sampler.
    """
    _check_size(c)
    state = zero_state(c.n_qubits)
    for i, g in enumerate(c.gates):
        state = _apply(state, gate_matrix(g), g.qubits)
        if errors and i in errors:
            for q, letter in zip(g.qubits, errors[i]):
                if letter != "I":
                    state = _apply(state, PAULI_MATRICES[letter], (q,))
    return state


def _clbit_probabilities(c: Circuit, state: np.ndarray) -> np.ndarray:
    """Flat probability vector over classical registers (clbit 0 most significant)."""
    probs = np.abs(state) ** 2
    meas = sorted(c.measurements, key=lambda m: m[1])
    if not meas:
        raise BackendError("circuit has no measurements")
    measured = [q for q, _ in meas]
    unmeasured = tuple(q for q in range(c.n_qubits) if q not in measured)
    if unmeasured:
        probs = probs.sum(axis=unmeasured)
    kept = [q for q in range(c.n_qubits) if q not in unmeasured]
    probs = np.transpose(probs, [kept.index(q) for q in measured])
    full = np.zeros((2,) * c.n_clbits)
    clbits = {cb for _, cb in meas}
    index = tuple(slice(None) if j in clbits else 0 for j in range(c.n_clbits))
    full[index] = probs
    flat = full.reshape(-1)
    return flat / flat.sum()


def probabilities(c: Circuit) -> dict[str, float]:
    """Exact outcome distribution of a measured circuit (noiseless)."""
    flat = _clbit_probabilities(c, statevector(c))
    return {format(i, f"0{c.n_clbits}b"): float(p) for i, p in enumerate(flat) if p > 0}


def _to_histogram(outcomes: np.ndarray, n_clbits: int, shots: int) -> Histogram:
    values, counts = np.unique(outcomes, return_counts=True)
    return Histogram({format(int(v), f"0{n_clbits}b"): int(k) for v, k in zip(values, counts)}, shots)


_PAULI_1Q = "XYZ"
_PAULI_2Q = [a + b for a in "IXYZ" for b in "IXYZ"][1:]


def run(c: Circuit, shots: int, noise: NoiseModel | None = None, seed=None) -> Histogram:
    """Sample ``shots`` outcomes.

    Noise is applied by the trajectory method: each shot independently draws
    a Pauli error after every gate (depolarizing) and a flip per read bit.
    Shots sharing an error pattern share one simulation.
    """
    if shots < 1:
        raise BackendError("shots must be >= 1")
    if not c.measurements:
        raise BackendError("circuit has no measurements")
    _check_size(c)
    rng = np.random.default_rng(seed)
    dim = 2 ** c.n_clbits
    if noise is None or noise.is_noiseless:
        probs = _clbit_probabilities(c, statevector(c))
        counts = rng.multinomial(shots, probs)
        outcomes = np.repeat(np.arange(dim), counts)
        return _to_histogram(outcomes, c.n_clbits, shots)

    n_gates = len(c.gates)
    p_gate = np.array([noise.p2 if len(g.qubits) == 2 else noise.p1 for g in c.gates])
    two_q = np.array([len(g.qubits) == 2 for g in c.gates], dtype=bool)
    hit = rng.random((shots, n_gates)) < p_gate
    kind = np.where(two_q, rng.integers(0, 15, (shots, n_gates)), rng.integers(0, 3, (shots, n_gates)))

    patterns: dict[tuple, list[int]] = {}
    for shot in range(shots):
        idx = np.flatnonzero(hit[shot])
        key = tuple((int(i), int(kind[shot, i])) for i in idx)
        patterns.setdefault(key, []).append(shot)

    outcomes = np.empty(shots, dtype=np.int64)
    for key, members in patterns.items():
        errors = {i: (_PAULI_2Q[k] if two_q[i] else _PAULI_1Q[k]) for i, k in key}
        probs = _clbit_probabilities(c, statevector(c, errors))
        outcomes[members] = rng.choice(dim, size=len(members), p=probs)

    if noise.p_spam > 0:
        flips = rng.random((shots, c.n_clbits)) < noise.p_spam
        weights = 1 << np.arange(c.n_clbits - 1, -1, -1)
        outcomes ^= flips.astype(np.int64) @ weights
    return _to_histogram(outcomes, c.n_clbits, shots)


def apply_pauli(state: np.ndarray, p: PauliString) -> np.ndarray:
    out = state
    for q, letter in enumerate(p.ops):
        if letter != "I":
            out = _apply(out, PAULI_MATRICES[letter], (q,))
    return out


def pauli_expectation(state: np.ndarray, p: PauliString) -> float:
    return float(np.vdot(state, apply_pauli(state, p)).real)


def state_energy(state: np.ndarray, h: PauliHamiltonian) -> float:
    return h.identity_offset + sum(c * pauli_expectation(state, p) for c, p in h.terms)


def exact_expectation(c: Circuit, h: PauliHamiltonian) -> float:
    """<psi|H|psi> for the state a measurement-free circuit prepares."""
    if c.measurements:
        raise BackendError("exact_expectation needs a measurement-free circuit")
    if c.n_qubits != h.n_qubits:
        raise BackendError(f"circuit has {c.n_qubits} qubits, Hamiltonian {h.n_qubits}")
    return state_energy(statevector(c), h)


@dataclass(frozen=True)
class StatevectorBackend:
    """Backend object selected by the ``sim`` / ``sim-noisy`` config strings."""

    noise: NoiseModel | None = None
    name: str = field(default="sim")

    def run(self, c: Circuit, shots: int, seed=None) -> Histogram:
        return run(c, shots, self.noise, seed)


def make_backend(selector: str, noise: NoiseModel | None = None) -> StatevectorBackend:
    if selector == "sim":
        return StatevectorBackend(None, "sim")
    if selector == "sim-noisy":
        return StatevectorBackend(noise or NoiseModel(), "sim-noisy")
    raise ValueError(f"unknown simulator backend {selector!r}")
