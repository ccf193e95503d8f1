"""Discrete search over the Clifford parameter grid {0, 1, 2, 3}^k.

Every strategy evaluates the Hartree-Fock point (all zeros) first, so the
result is never worse than HF.  Energies are exact stabilizer expectations;
repeated visits are served from a cache and do not consume budget.
"""

from __future__ import annotations

import itertools
import logging
from dataclasses import dataclass, field
from typing import Callable

import numpy as np

from .ansatz import AnsatzSpec, build_circuit, grid_to_params
from .pauli import PauliHamiltonian
from .circuit import Gate
from .stabilizer import StabilizerTableau, clifford_energy, pauli_bits, simulate

logger = logging.getLogger(__name__)

STRATEGIES = ("exhaustive", "multistart_hillclimb", "random")
TIE_TOL = 1e-12

GridPoint = tuple[int, ...]


@dataclass(frozen=True)
class SearchBudget:
    max_evaluations: int = 1000
    seed: int | None = 0
    strategy: str = "multistart_hillclimb"

    def __post_init__(self):
        if self.max_evaluations < 1:
            raise ValueError("max_evaluations must be >= 1")
        if self.strategy not in STRATEGIES:
            raise ValueError(f"unknown strategy {self.strategy!r}; choose from {STRATEGIES}")


@dataclass
class SearchResult:
    best_point: GridPoint
    best_energy: float
    evaluations_used: int
    trace: list[tuple[int, float]] = field(default_factory=list)


def grid_energy(spec: AnsatzSpec, h: PauliHamiltonian, point: GridPoint) -> float:
    circuit = build_circuit(spec, grid_to_params(point))
    return clifford_energy(simulate(circuit), h)


class CliffordObjective:
    """Exact grid-point energy with the ansatz gate list and term bits prepared once.

    Equal to :func:`grid_energy`, minus the per-point circuit construction.
    """

    def __init__(self, spec: AnsatzSpec, h: PauliHamiltonian):
        self.n = spec.n_qubits
        self.offset = h.identity_offset
        self.px, self.pz, self.coeffs = pauli_bits(h)
        self.ops: list[tuple[Gate, int]] = []
        slot = 0
        for g in build_circuit(spec, np.zeros(spec.param_count())).gates:
            if g.params:
                self.ops.append((g, slot))
                slot += 1
            else:
                self.ops.append((g, -1))

    def __call__(self, point: GridPoint) -> float:
        t = StabilizerTableau(self.n)
        for g, slot in self.ops:
            if slot < 0:
                t.apply(g)
            else:
                t.quarter_rotation(g.name, g.qubits[0], point[slot])
        if not len(self.coeffs):
            return self.offset
        return self.offset + float(self.coeffs @ t.expect_many(self.px, self.pz))


class _Evaluator:
    """Budgeted, cached objective with a deterministic best-so-far record."""

    def __init__(self, objective: Callable[[GridPoint], float], budget: int):
        self.objective = objective
        self.budget = budget
        self.cache: dict[GridPoint, float] = {}
        self.best_point: GridPoint | None = None
        self.best_energy = float("inf")
        self.trace: list[tuple[int, float]] = []

    @property
    def exhausted(self) -> bool:
        return len(self.cache) >= self.budget

    def __call__(self, point: GridPoint) -> float | None:
        """Energy of ``point``, or None when it would exceed the budget."""
        if point in self.cache:
            return self.cache[point]
        if self.exhausted:
            return None
        energy = self.objective(point)
        self.cache[point] = energy
        if (energy < self.best_energy - TIE_TOL
                or (abs(energy - self.best_energy) <= TIE_TOL and point < self.best_point)):
            self.best_point, self.best_energy = point, energy
        self.trace.append((len(self.cache), self.best_energy))
        return energy


def _exhaustive(ev: _Evaluator, k: int, rng: np.random.Generator) -> None:
    if 4 ** k > ev.budget:
        logger.warning("grid has %d points but budget is %d; enumeration truncated", 4 ** k, ev.budget)
    for point in itertools.product(range(4), repeat=k):
        if ev(point) is None:
            return


def _random_unvisited(ev: _Evaluator, k: int, rng: np.random.Generator) -> GridPoint | None:
    size = 4 ** k
    if len(ev.cache) >= size:
        return None
    if size <= 4096 and len(ev.cache) > size // 2:
        free = [p for p in itertools.product(range(4), repeat=k) if p not in ev.cache]
        return free[int(rng.integers(len(free)))]
    while True:
        point = tuple(int(v) for v in rng.integers(0, 4, size=k))
        if point not in ev.cache:
            return point


def _random(ev: _Evaluator, k: int, rng: np.random.Generator) -> None:
    while not ev.exhausted:
        point = _random_unvisited(ev, k, rng)
        if point is None:
            return
        ev(point)


def _hillclimb(ev: _Evaluator, k: int, rng: np.random.Generator) -> None:
    start: GridPoint | None = (0,) * k
    while start is not None and not ev.exhausted:
        current = start
        energy = ev(current)
        if energy is None:
            return
        while True:
            improving = []
            for i in range(k):
                for step in (1, -1):
                    nb = current[:i] + ((current[i] + step) % 4,) + current[i + 1:]
                    e = ev(nb)
                    if e is None:
                        return
                    if e < energy - TIE_TOL:
                        improving.append((e, nb))
            if not improving:
                break
            low = min(e for e, _ in improving)
            current = min(nb for e, nb in improving if e <= low + TIE_TOL)
            energy = ev(current)
        start = _random_unvisited(ev, k, rng)


_RUNNERS = {"exhaustive": _exhaustive, "random": _random, "multistart_hillclimb": _hillclimb}


def cafqa_search(spec: AnsatzSpec, h: PauliHamiltonian, budget: SearchBudget,
                 objective: Callable[[GridPoint], float] | None = None) -> SearchResult:
    """Minimize the exact Clifford energy over the quarter-turn grid."""
    k = spec.param_count()
    if k < 1:
        raise ValueError("ansatz has no parameters to search")
    if h.n_qubits != spec.n_qubits:
        raise ValueError(f"Hamiltonian has {h.n_qubits} qubits, ansatz {spec.n_qubits}")
    if objective is None:
        objective = CliffordObjective(spec, h)
    ev = _Evaluator(objective, budget.max_evaluations)
    rng = np.random.default_rng(budget.seed)
    ev((0,) * k)
    _RUNNERS[budget.strategy](ev, k, rng)
    logger.info("CAFQA %s: best %.10f at %s after %d evaluations",
                budget.strategy, ev.best_energy, ev.best_point, len(ev.cache))
    return SearchResult(ev.best_point, ev.best_energy, len(ev.cache), ev.trace)


def to_vqe_init(result: SearchResult) -> np.ndarray:
    return grid_to_params(result.best_point)


def result_record(result: SearchResult, budget: SearchBudget) -> dict:
    """Flat key-value view for the run directory."""
    return {
        "strategy": budget.strategy,
        "max_evaluations": budget.max_evaluations,
        "seed": budget.seed,
        "best_energy": result.best_energy,
        "best_point": ",".join(str(i) for i in result.best_point),
        "evaluations_used": result.evaluations_used,
    }
