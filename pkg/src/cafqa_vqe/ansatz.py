"""Hardware-efficient ansatz whose quarter-turn points are Clifford circuits.

Layout: X on the occupied qubits, then ``n_layers`` blocks of per-qubit
rotations (one per axis in ``rotation_axes``) followed by the entangler
CNOTs, optionally closed by one more rotation block.  All parameters zero
gives the Hartree-Fock occupation state.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import Sequence

import numpy as np

from .circuit import Circuit, Gate, gate

QUARTER_TURN = math.pi / 2
GRID_TOL = 1e-9
_AXES = ("rx", "ry", "rz")


@dataclass(frozen=True)
class AnsatzSpec:
    n_qubits: int
    n_occupied: int = 0
    n_layers: int = 2
    rotation_axes: tuple[str, ...] = ("ry", "rz")
    entangler: tuple[tuple[int, int], ...] | None = None
    final_rotation: bool = False

    def __post_init__(self):
        if self.n_qubits < 1:
            raise ValueError("n_qubits must be positive")
        if not 0 <= self.n_occupied <= self.n_qubits:
            raise ValueError(f"n_occupied={self.n_occupied} outside [0, {self.n_qubits}]")
        if self.n_layers < 0:
            raise ValueError("n_layers must be non-negative")
        axes = tuple(a.lower() for a in self.rotation_axes)
        if not axes or any(a not in _AXES for a in axes):
            raise ValueError(f"rotation axes must be drawn from {_AXES}, got {self.rotation_axes}")
        object.__setattr__(self, "rotation_axes", axes)
        if self.entangler is None:
            chain = tuple((q, q + 1) for q in range(self.n_qubits - 1))
            object.__setattr__(self, "entangler", chain)
        else:
            pairs = tuple((int(a), int(b)) for a, b in self.entangler)
            for a, b in pairs:
                if a == b or not (0 <= a < self.n_qubits and 0 <= b < self.n_qubits):
                    raise ValueError(f"bad entangler pair {(a, b)}")
            object.__setattr__(self, "entangler", pairs)

    @property
    def rotation_blocks(self) -> int:
        return self.n_layers + (1 if self.final_rotation else 0)

    def param_count(self) -> int:
        return self.rotation_blocks * self.n_qubits * len(self.rotation_axes)


def is_clifford(values: Sequence[float], tol: float = GRID_TOL) -> bool:
    return all(abs(v - round(v / QUARTER_TURN) * QUARTER_TURN) <= tol for v in values)


def build_circuit(spec: AnsatzSpec, params: Sequence[float]) -> Circuit:
    values = [float(v) for v in params]
    if len(values) != spec.param_count():
        raise ValueError(f"expected {spec.param_count()} parameters, got {len(values)}")
    gates: list[Gate] = [gate("x", q) for q in range(spec.n_occupied)]
    it = iter(values)

    def rotations():
        for q in range(spec.n_qubits):
            for axis in spec.rotation_axes:
                gates.append(gate(axis, q, params=(next(it),)))

    for _ in range(spec.n_layers):
        rotations()
        gates.extend(gate("cx", a, b) for a, b in spec.entangler)
    if spec.final_rotation:
        rotations()
    return Circuit(spec.n_qubits, tuple(gates))


def hf_point(spec: AnsatzSpec) -> np.ndarray:
    return np.zeros(spec.param_count())


def snap_to_grid(params: Sequence[float]) -> tuple[int, ...]:
    """Quarter-turn indices in {0, 1, 2, 3} for a Clifford parameter point."""
    if not is_clifford(params):
        raise ValueError(f"parameter point is not on the Clifford grid: {list(params)}")
    return tuple(int(round(v / QUARTER_TURN)) % 4 for v in params)


def grid_to_params(indices: Sequence[int]) -> np.ndarray:
    return np.array([int(i) * QUARTER_TURN for i in indices], dtype=float)
