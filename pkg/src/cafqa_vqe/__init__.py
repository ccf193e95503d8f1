"""CAFQA-initialized VQE: Clifford-grid search, SPSA refinement, QWC measurement,
trapped-ion transpilation and a file-based circuit broker."""

from .ansatz import AnsatzSpec, build_circuit, hf_point, snap_to_grid
from .cafqa import SearchBudget, SearchResult, cafqa_search, to_vqe_init
from .circuit import Circuit, Gate, gate
from .pauli import (MeasurementGroup, PauliHamiltonian, PauliString, energy_from_counts,
                    group_qubitwise_commuting, parse_hamiltonian)
from .spsa import SpsaConfig, SpsaTrace

__version__ = "0.1.0"
