import math

import numpy as np
import pytest

from cafqa_vqe.circuit import Circuit, CircuitError, Gate, gate
from cafqa_vqe.transpile import decompose_cnot, is_native, lower, merge_rotations, normalize_angle, transpile

import helpers
from helpers import phase_distance, random_circuit, random_input

class TestDecomposeCnot:
    def test_truth_table(self):
        u = helpers.unitary(Circuit(2, tuple(decompose_cnot(0, 1))))
        for inp, out in ((0b00, 0b00), (0b01, 0b01), (0b10, 0b11), (0b11, 0b10)):
            col = u[:, inp]
            assert abs(col[out]) == pytest.approx(1.0, abs=1e-12)

    def test_single_rxx(self):
        seq = decompose_cnot(1, 0)
        assert [g.name for g in seq].count("rxx") == 1
        assert all(g.name in ("rx", "ry", "rz", "rxx") for g in seq)

    @pytest.mark.parametrize("c, t", [(0, 1), (1, 0)])
    def test_unitary_oracle(self, c, t):
        u = helpers.unitary(Circuit(2, tuple(decompose_cnot(c, t))))
        target = helpers.gate_unitary(2, gate("cx", c, t))
        assert phase_distance(u, target) <= 1e-12

    def test_non_adjacent(self):
        u = helpers.unitary(Circuit(4, tuple(decompose_cnot(3, 0))))
        assert phase_distance(u, helpers.gate_unitary(4, gate("cx", 3, 0))) <= 1e-12

    def test_same_qubit(self):
        with pytest.raises(CircuitError):
            decompose_cnot(1, 1)


class TestOneQubitRules:
    @pytest.mark.parametrize("name", ["h", "s", "sdg", "x", "y", "z"])
    def test_rule_matches_gate(self, name):
        u = helpers.unitary(Circuit(1, tuple(lower(gate(name, 0)))))
        assert phase_distance(u, helpers.FIXED[name]) <= 1e-12


class TestMerge:
    def test_same_axis(self):
        out = transpile(Circuit(1, (gate("rz", 0, params=[0.3]), gate("rz", 0, params=[0.4]))))
        assert out.gates == (Gate("rz", (0,), (pytest.approx(0.7),)),)

    def test_x_x_cancels(self):
        assert transpile(Circuit(1, (gate("x", 0), gate("x", 0)))).gates == ()

    def test_cancel_exposes_previous(self):
        gates = [gate("rz", 0, params=[0.2]), gate("rx", 0, params=[0.5]), gate("rx", 0, params=[-0.5]),
                 gate("rz", 0, params=[0.1])]
        out = merge_rotations(1, gates)
        assert len(out) == 1 and out[0].name == "rz" and out[0].params[0] == pytest.approx(0.3)

    def test_rxx_blocks_merge(self):
        gates = [gate("rz", 0, params=[0.2]), gate("rxx", 0, 1, params=[0.4]), gate("rz", 0, params=[0.1])]
        assert [g.name for g in merge_rotations(2, gates)] == ["rz", "rxx", "rz"]

    def test_other_qubit_does_not_block(self):
        gates = [gate("ry", 0, params=[0.2]), gate("rx", 1, params=[0.4]), gate("ry", 0, params=[0.1])]
        out = merge_rotations(2, gates)
        assert len(out) == 2

    def test_normalize(self):
        assert normalize_angle(3 * math.pi) == pytest.approx(math.pi)
        assert normalize_angle(-math.pi) == math.pi
        assert normalize_angle(2 * math.pi) == 0.0


class TestTranspile:
    def test_bell(self):
        bell = Circuit(2, (gate("h", 0), gate("cx", 0, 1)))
        out = transpile(bell)
        assert out.count("rxx") == 1 and is_native(out)
        fidelity = abs(np.vdot(helpers.state(bell), helpers.state(out))) ** 2
        assert fidelity == pytest.approx(1.0, abs=1e-9)

    def test_measurements_preserved(self):
        c = Circuit(2, (gate("h", 0), gate("cx", 0, 1))).measure_all()
        assert transpile(c).measurements == c.measurements

    def test_semantics_random(self):
        rng = np.random.default_rng(3)
        for _ in range(200):
            n = int(rng.integers(1, 5))
            c = random_input(rng, n, int(rng.integers(0, 31)))
            out = transpile(c)
            assert is_native(out)
            assert out.count("rxx") == c.count("cx")
            tv = 0.5 * np.abs(helpers.distribution(c) - helpers.distribution(out)).sum()
            assert tv <= 1e-9
            assert phase_distance(helpers.unitary(out), helpers.unitary(c)) <= 1e-9

    def test_idempotent(self):
        rng = np.random.default_rng(4)
        for _ in range(100):
            out = transpile(random_circuit(rng, 3, 25))
            assert transpile(out) == out

    def test_native_input_passes(self):
        c = Circuit(2, (gate("rxx", 0, 1, params=[0.3]),))
        assert transpile(c) == c
