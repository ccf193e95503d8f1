import itertools
import math

import numpy as np
import pytest

from cafqa_vqe.circuit import Circuit, gate
from cafqa_vqe.pauli import PauliHamiltonian, PauliString
from cafqa_vqe.stabilizer import (NonCliffordError, StabilizerTableau, apply_clifford_gate, clifford_energy,
                                  expect_pauli, new_zero_state, quarter_turns, simulate)

import helpers
from helpers import phase_distance, random_clifford_circuit, random_pauli

Q = math.pi / 2


class TestZeroState:
    def test_one_qubit(self):
        t = new_zero_state(1)
        assert t.stabilizers() == ["+Z"]
        assert expect_pauli(t, "Z") == 1

    def test_three_qubits(self):
        assert new_zero_state(3).stabilizers() == ["+ZII", "+IZI", "+IIZ"]

    def test_zero_qubits_rejected(self):
        with pytest.raises(ValueError):
            new_zero_state(0)


class TestGates:
    def test_hadamard(self):
        t = apply_clifford_gate(new_zero_state(1), gate("h", 0))
        assert t.stabilizers() == ["+X"]

    def test_bell(self):
        t = simulate(Circuit(2, (gate("h", 0), gate("cx", 0, 1))))
        products = {expect_pauli(t, p) for p in ("XX", "ZZ")}
        assert products == {1}
        assert expect_pauli(t, "ZI") == 0
        assert expect_pauli(t, "YY") == -1

    def test_ry_quarter(self):
        t = simulate(Circuit(1, (gate("ry", 0, params=[Q]),)))
        assert expect_pauli(t, "X") == 1
        assert expect_pauli(t, "Z") == 0

    def test_non_clifford_angle(self):
        with pytest.raises(NonCliffordError):
            apply_clifford_gate(new_zero_state(1), gate("rz", 0, params=[0.3]))

    def test_quarter_turns(self):
        assert quarter_turns(-Q) == 3
        assert quarter_turns(2 * math.pi) == 0
        assert quarter_turns(5 * Q + 1e-13) == 1
        with pytest.raises(NonCliffordError):
            quarter_turns(Q + 1e-9)

    def test_out_of_range(self):
        with pytest.raises(IndexError):
            new_zero_state(2).h(2)

    def test_length_mismatch(self):
        with pytest.raises(ValueError):
            expect_pauli(new_zero_state(2), "Z")


class TestDecompositionOracles:
    """The fixed H/S/Z compositions behind each quarter-turn rotation equal the rotation up to phase."""

    @pytest.mark.parametrize("k", range(4))
    def test_rz(self, k):
        assert phase_distance(helpers.rot("z", k * Q), np.linalg.matrix_power(helpers.S, k)) < 1e-12

    @pytest.mark.parametrize("k", range(4))
    def test_rx(self, k):
        comp = helpers.H @ np.linalg.matrix_power(helpers.S, k) @ helpers.H
        assert phase_distance(helpers.rot("x", k * Q), comp) < 1e-12

    @pytest.mark.parametrize("k", range(4))
    def test_ry(self, k):
        comp = np.linalg.matrix_power(helpers.H @ helpers.Z, k)
        assert phase_distance(helpers.rot("y", k * Q), comp) < 1e-12

    @pytest.mark.parametrize("k", range(4))
    def test_rxx(self, k):
        hh = np.kron(helpers.H, helpers.H)
        cx = helpers.gate_unitary(2, gate("cx", 0, 1))
        sb = np.kron(helpers.I2, np.linalg.matrix_power(helpers.S, k))
        comp = hh @ cx @ sb @ cx @ hh
        target = helpers.gate_unitary(2, gate("rxx", 0, 1, params=[k * Q]))
        assert phase_distance(target, comp) < 1e-12

    def test_sdg(self):
        assert phase_distance(helpers.SDG, helpers.S @ helpers.Z) < 1e-12


class TestOracleEquivalence:
    def test_random_circuits(self):
        rng = np.random.default_rng(5)
        for _ in range(200):
            n = int(rng.integers(1, 5))
            c = random_clifford_circuit(rng, n, int(rng.integers(0, 30)))
            t = simulate(c)
            psi = helpers.state(c)
            for _ in range(5):
                ops = random_pauli(rng, n)
                assert expect_pauli(t, ops) == pytest.approx(helpers.expectation(psi, ops), abs=1e-9)

    def test_all_paulis_two_qubits(self):
        rng = np.random.default_rng(6)
        c = random_clifford_circuit(rng, 2, 25)
        t = simulate(c)
        psi = helpers.state(c)
        for ops in map("".join, itertools.product("IXYZ", repeat=2)):
            assert expect_pauli(t, ops) == pytest.approx(helpers.expectation(psi, ops), abs=1e-9)


class TestInvariants:
    def test_after_every_gate(self):
        rng = np.random.default_rng(7)
        for _ in range(30):
            n = int(rng.integers(1, 6))
            c = random_clifford_circuit(rng, n, 40)
            t = new_zero_state(n)
            for g in c.gates:
                t.apply(g)
                assert t.check_invariants()

    def test_gate_then_inverse(self):
        rng = np.random.default_rng(8)
        inverse = {"h": "h", "s": "sdg", "sdg": "s", "x": "x", "y": "y", "z": "z", "cx": "cx"}
        for _ in range(50):
            n = int(rng.integers(2, 5))
            t = simulate(random_clifford_circuit(rng, n, 20))
            before = t.copy()
            for g in random_clifford_circuit(rng, n, 1).gates:
                t.apply(g)
                if g.name in inverse:
                    t.apply(gate(inverse[g.name], *g.qubits))
                else:
                    t.apply(gate(g.name, *g.qubits, params=[-g.params[0]]))
            assert t == before


class TestCost:
    @pytest.mark.parametrize("n", [2, 8, 32])
    def test_gate_row_ops_linear(self, n):
        t = new_zero_state(n)
        for name in ("h", "s", "sdg", "x", "y", "z"):
            t.row_ops = 0
            t.apply(gate(name, 0))
            assert t.row_ops <= 4 * n
        t.row_ops = 0
        t.apply(gate("cx", 0, n - 1))
        assert t.row_ops <= 2 * n

    @pytest.mark.parametrize("n", [2, 8, 32])
    def test_expect_bounded(self, n):
        rng = np.random.default_rng(n)
        t = simulate(random_clifford_circuit(rng, n, 10 * n))
        for _ in range(10):
            t.row_ops = 0
            t.expect(PauliString(random_pauli(rng, n)))
            # at most n rowsums of O(n) bits each plus two commutation sweeps
            assert t.row_ops <= 3 * n


class TestCliffordEnergy:
    def test_product_state(self):
        h = PauliHamiltonian.from_terms([(-1, "ZI"), (-1, "IZ")])
        assert clifford_energy(new_zero_state(2), h) == -2.0

    def test_bell(self):
        t = simulate(Circuit(2, (gate("h", 0), gate("cx", 0, 1))))
        h = PauliHamiltonian.from_terms([(1, "XX"), (1, "ZZ"), (1, "YY")])
        assert clifford_energy(t, h) == pytest.approx(1.0)

    def test_zero_expectation(self):
        assert clifford_energy(new_zero_state(1), PauliHamiltonian.from_terms([(0.7, "X")])) == 0.0

    def test_dimension_mismatch(self):
        with pytest.raises(ValueError):
            clifford_energy(new_zero_state(1), PauliHamiltonian.from_terms([(1, "ZZ")]))

    def test_expect_many_matches_expect(self):
        rng = np.random.default_rng(12)
        for _ in range(100):
            n = int(rng.integers(1, 6))
            t = simulate(helpers.random_clifford_circuit(rng, n, 30))
            paulis = [random_pauli(rng, n) for _ in range(12)]
            px = np.array([[c in "XY" for c in p] for p in paulis], dtype=np.uint8)
            pz = np.array([[c in "ZY" for c in p] for p in paulis], dtype=np.uint8)
            assert list(t.expect_many(px, pz)) == [expect_pauli(t, p) for p in paulis]

    def test_expect_many_shape_checked(self):
        with pytest.raises(ValueError):
            new_zero_state(2).expect_many(np.zeros((3, 3)), np.zeros((3, 3)))

    def test_energy_matches_dense(self):
        rng = np.random.default_rng(13)
        for _ in range(50):
            n = int(rng.integers(1, 5))
            c = helpers.random_clifford_circuit(rng, n, 25)
            h = helpers.random_hamiltonian(rng, n, 8)
            psi = helpers.state(c)
            dense = float(np.real(psi.conj() @ helpers.dense_hamiltonian(h) @ psi))
            assert clifford_energy(simulate(c), h) == pytest.approx(dense, abs=1e-9)

    def test_tableau_copy_independent(self):
        t = StabilizerTableau(2)
        u = t.copy()
        u.h(0)
        assert t != u
