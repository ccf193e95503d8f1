"""Shot-based VQE energy evaluation and the CAFQA/HF experiment driver.

Each energy evaluation builds one circuit per measurement group (ansatz,
basis pre-rotations, measure all, lower to native gates) and hands the batch
to an executor: either a backend called in-process or the file broker.
Every circuit gets a seed derived from (run seed, stream, evaluation,
group), so both executors produce identical histograms.
"""

from __future__ import annotations

import csv
import logging
import time
from dataclasses import dataclass, field
from pathlib import Path
from typing import Mapping, Protocol, Sequence

import numpy as np

from . import backend as sim
from .ansatz import AnsatzSpec, build_circuit
from .broker.client import BrokerClient
from .circuit import Circuit, gate
from .pauli import MeasurementGroup, PauliHamiltonian, energy_from_counts, group_qubitwise_commuting
from .qasm import serialize_qasm
from .spsa import SpsaAborted, SpsaConfig, SpsaTrace, run as spsa_run
from .transpile import transpile

logger = logging.getLogger(__name__)

EXPECTED_PROB_FLOOR = 1e-12


class ExecutionError(RuntimeError):
    pass


@dataclass(frozen=True)
class CircuitTask:
    circuit: Circuit
    shots: int
    seed: int
    metadata: Mapping[str, object] = field(default_factory=dict)


class Executor(Protocol):
    def execute(self, tasks: Sequence[CircuitTask]) -> list[dict[str, int]]: ...


class DirectExecutor:
    def __init__(self, backend):
        self.backend = backend

    def execute(self, tasks: Sequence[CircuitTask]) -> list[dict[str, int]]:
        return [dict(self.backend.run(t.circuit, t.shots, seed=t.seed).counts) for t in tasks]


class BrokerExecutor:
    """Submit each batch through the file broker and block until it returns.

    The exact noiseless distribution rides along as ``expected_distribution``
    so the host can apply its return criteria.
    """

    def __init__(self, session_dir: Path | str, timeout: float | None = None,
                 poll_interval: float = 0.2, send_expected: bool = True):
        self.client = BrokerClient(session_dir, poll_interval)
        self.timeout = timeout
        self.send_expected = send_expected

    def execute(self, tasks: Sequence[CircuitTask]) -> list[dict[str, int]]:
        payloads = []
        for t in tasks:
            expected = None
            if self.send_expected:
                probs = sim.probabilities(t.circuit)
                kept = {k: p for k, p in probs.items() if p > EXPECTED_PROB_FLOOR}
                norm = sum(kept.values())
                expected = {k: p / norm for k, p in kept.items()}
            meta = dict(t.metadata)
            meta["seed"] = t.seed
            payloads.append((serialize_qasm(t.circuit), t.shots, expected, meta))
        jobs = self.client.make_jobs(payloads)
        ids = self.client.submit(jobs)
        results = self.client.wait(ids, timeout=self.timeout)
        bad = [r for r in results if r.status != "ok"]
        if bad:
            raise ExecutionError(f"job {bad[0].job_id} returned status {bad[0].status}")
        return [dict(r.counts) for r in results]


def basis_rotation(basis: str) -> list:
    """Pre-rotations mapping each qubit's X/Y measurement onto Z."""
    gates = []
    for q, letter in enumerate(basis):
        if letter == "X":
            gates.append(gate("h", q))
        elif letter == "Y":
            gates.extend([gate("sdg", q), gate("h", q)])
    return gates


def measurement_circuit(state_prep: Circuit, group: MeasurementGroup, lower: bool = True) -> Circuit:
    c = state_prep.append(*basis_rotation(group.basis)).measure_all()
    return transpile(c) if lower else c


def circuit_seed(seed: int, stream: int, evaluation: int, group: int) -> int:
    return int(np.random.SeedSequence([seed, stream, evaluation, group]).generate_state(1)[0])


class EnergyEvaluator:
    """Callable energy estimate for a parameter vector; counts circuits issued."""

    def __init__(self, spec: AnsatzSpec, h: PauliHamiltonian, executor: Executor, shots: int = 300,
                 seed: int = 0, stream: int = 0, run_id: str = "run"):
        if shots < 1:
            raise ValueError("shots must be >= 1")
        self.spec, self.h, self.executor = spec, h, executor
        self.shots, self.seed, self.stream, self.run_id = shots, seed, stream, run_id
        self.groups = group_qubitwise_commuting(h)
        self.evaluations = 0
        self.circuits_issued = 0

    def tasks(self, theta: Sequence[float]) -> list[CircuitTask]:
        prep = build_circuit(self.spec, theta)
        index = self.evaluations
        return [CircuitTask(measurement_circuit(prep, g), self.shots,
                            circuit_seed(self.seed, self.stream, index, gi),
                            {"run_id": self.run_id, "eval_index": index, "group": g.basis})
                for gi, g in enumerate(self.groups)]

    def __call__(self, theta: Sequence[float]) -> float:
        tasks = self.tasks(theta)
        if not tasks:
            self.evaluations += 1
            return self.h.identity_offset
        histograms = self.executor.execute(tasks)
        self.evaluations += 1
        self.circuits_issued += len(tasks)
        return energy_from_counts(self.h, self.groups, histograms)


def csv_header(k: int) -> list[str]:
    return ["eval_index", "energy_hartree"] + [f"theta_{i}" for i in range(k)] + ["wallclock_ms"]


class ConvergenceWriter:
    """Streams one row per energy evaluation, flushed so a killed run leaves a valid prefix."""

    def __init__(self, path: Path, k: int, record_wallclock: bool = True):
        self.path = Path(path)
        self.fh = open(self.path, "w", newline="", encoding="utf-8")
        self.writer = csv.writer(self.fh, lineterminator="\n")
        self.writer.writerow(csv_header(k))
        self.fh.flush()
        self.record_wallclock = record_wallclock
        self.t0 = time.monotonic()

    def __call__(self, index: int, theta: np.ndarray, energy: float) -> None:
        wall = round((time.monotonic() - self.t0) * 1000.0, 3) if self.record_wallclock else 0
        self.writer.writerow([index, repr(float(energy))] + [repr(float(v)) for v in theta] + [wall])
        self.fh.flush()

    def close(self) -> None:
        self.fh.close()


def write_angles(path: Path, trace: SpsaTrace) -> None:
    k = len(trace.iterates[0]) if trace.iterates else 0
    with open(path, "w", newline="", encoding="utf-8") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(["iteration"] + [f"theta_{i}" for i in range(k)])
        for j, theta in enumerate(trace.iterates):
            w.writerow([j] + [repr(float(v)) for v in theta])
        if trace.final_point is not None:
            w.writerow(["final"] + [repr(float(v)) for v in trace.final_point])


@dataclass
class VqeOutcome:
    label: str
    init: np.ndarray
    trace: SpsaTrace
    final_point: np.ndarray
    init_energy_exact: float
    final_energy_exact: float
    circuits_issued: int


def run_vqe(label: str, init: Sequence[float], spec: AnsatzSpec, h: PauliHamiltonian, executor: Executor,
            spsa_cfg: SpsaConfig, shots: int, seed: int, stream: int, out_dir: Path | None = None,
            record_wallclock: bool = True) -> VqeOutcome:
    """One SPSA optimization from ``init``; CSVs go to ``out_dir`` if given."""
    evaluator = EnergyEvaluator(spec, h, executor, shots, seed, stream, run_id=label)
    k = spec.param_count()
    writer = ConvergenceWriter(Path(out_dir) / f"convergence_{label}.csv", k, record_wallclock) if out_dir else None
    try:
        trace = spsa_run(init, evaluator, spsa_cfg, callback=writer)
    finally:
        if writer is not None:
            writer.close()
    if out_dir:
        write_angles(Path(out_dir) / f"angles_{label}.csv", trace)
    final = trace.final_point
    return VqeOutcome(
        label=label,
        init=np.asarray(init, dtype=float),
        trace=trace,
        final_point=final,
        init_energy_exact=sim.exact_expectation(build_circuit(spec, init), h),
        final_energy_exact=sim.exact_expectation(build_circuit(spec, final), h),
        circuits_issued=evaluator.circuits_issued,
    )


def ground_energy(h: PauliHamiltonian) -> float:
    """Lowest eigenvalue by dense diagonalization (reference only)."""
    dim = 2 ** h.n_qubits
    mat = np.eye(dim, dtype=complex) * h.identity_offset
    for coeff, p in h.terms:
        term = np.ones((1, 1), dtype=complex)
        for letter in p.ops:
            term = np.kron(term, sim.PAULI_MATRICES[letter])
        mat += coeff * term
    return float(np.linalg.eigvalsh(mat)[0])


def count_circuits(bases: int, calibration_pairs: int, iterations: int, inits: int) -> int:
    """Circuits an experiment issues: every evaluation runs every basis once."""
    for name, v in (("bases", bases), ("calibration_pairs", calibration_pairs),
                    ("iterations", iterations), ("inits", inits)):
        if v < 0:
            raise ValueError(f"{name} must be non-negative")
    return bases * inits * (2 * calibration_pairs + 2 * iterations)


__all__ = [
    "BrokerExecutor", "CircuitTask", "DirectExecutor", "EnergyEvaluator", "ExecutionError",
    "SpsaAborted", "VqeOutcome", "count_circuits", "ground_energy", "measurement_circuit", "run_vqe",
]
