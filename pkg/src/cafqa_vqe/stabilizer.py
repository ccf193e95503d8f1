"""Aaronson-Gottesman stabilizer tableau with destabilizers.

Rows ``0..n-1`` are destabilizers, rows ``n..2n-1`` stabilizers.  Each row is
``(-1)^r`` times a Pauli string whose letter on qubit ``j`` is given by the
bits ``(x[j], z[j])`` with ``(1, 1)`` meaning Y.  Global phase is dropped.
"""

from __future__ import annotations

import math
from typing import Sequence

import numpy as np

from .circuit import Circuit, Gate
from .pauli import PauliHamiltonian, PauliString

_QUARTER = math.pi / 2
ANGLE_TOL = 1e-12


class NonCliffordError(ValueError):
    """Rotation angle off the quarter-turn grid; use the statevector backend."""


def quarter_turns(theta: float, tol: float = ANGLE_TOL) -> int:
    """Number of quarter turns (mod 4) in ``theta``; raises if off-grid."""
    k = round(theta / _QUARTER)
    if abs(theta - k * _QUARTER) > tol:
        raise NonCliffordError(f"angle {theta!r} is not a multiple of pi/2")
    return k % 4


class StabilizerTableau:
    """Mutable n-qubit stabilizer state.

    ``row_ops`` counts row-level updates (one per row touched by a gate, one
    per rowsum) so tests can check cost scaling without timing anything.
    """

    def __init__(self, n: int):
        if n < 1:
            raise ValueError("tableau needs at least one qubit")
        self.n = n
        self.x = np.zeros((2 * n, n), dtype=np.uint8)
        self.z = np.zeros((2 * n, n), dtype=np.uint8)
        self.r = np.zeros(2 * n, dtype=np.uint8)
        idx = np.arange(n)
        self.x[idx, idx] = 1
        self.z[n + idx, idx] = 1
        self.row_ops = 0

    def copy(self) -> "StabilizerTableau":
        t = StabilizerTableau.__new__(StabilizerTableau)
        t.n = self.n
        t.x, t.z, t.r = self.x.copy(), self.z.copy(), self.r.copy()
        t.row_ops = 0
        return t

    def __eq__(self, other) -> bool:
        return (isinstance(other, StabilizerTableau) and self.n == other.n
                and np.array_equal(self.x, other.x) and np.array_equal(self.z, other.z)
                and np.array_equal(self.r, other.r))

    def _check(self, *qubits: int) -> None:
        for q in qubits:
            if not 0 <= q < self.n:
                raise IndexError(f"qubit {q} out of range for {self.n} qubits")

    # Clifford generators; each touches every row once (O(n) row updates).

    def h(self, a: int) -> None:
        self._check(a)
        xa, za = self.x[:, a].copy(), self.z[:, a].copy()
        self.r ^= xa & za
        self.x[:, a], self.z[:, a] = za, xa
        self.row_ops += 2 * self.n

    def s(self, a: int) -> None:
        self._check(a)
        self.r ^= self.x[:, a] & self.z[:, a]
        self.z[:, a] ^= self.x[:, a]
        self.row_ops += 2 * self.n

    def sdg(self, a: int) -> None:
        self.z_(a)
        self.s(a)

    def x_(self, a: int) -> None:
        self._check(a)
        self.r ^= self.z[:, a]
        self.row_ops += 2 * self.n

    def y_(self, a: int) -> None:
        self._check(a)
        self.r ^= self.x[:, a] ^ self.z[:, a]
        self.row_ops += 2 * self.n

    def z_(self, a: int) -> None:
        self._check(a)
        self.r ^= self.x[:, a]
        self.row_ops += 2 * self.n

    def cx(self, a: int, b: int) -> None:
        self._check(a, b)
        if a == b:
            raise ValueError("cx needs distinct qubits")
        xa, zb = self.x[:, a], self.z[:, b]
        self.r ^= xa & zb & (self.x[:, b] ^ self.z[:, a] ^ 1)
        self.x[:, b] ^= xa
        self.z[:, a] ^= zb
        self.row_ops += 2 * self.n

    # Quarter-turn rotations, exact up to global phase:
    #   Rz(pi/2) = S,  Rx(pi/2) = H S H,  Ry(pi/2) = H Z (Z applied first).

    def quarter_rotation(self, axis: str, a: int, k: int) -> None:
        """Apply ``R_axis(k * pi/2)`` for an integer ``k``."""
        k %= 4
        if not k:
            return
        if axis == "rz":
            for _ in range(k):
                self.s(a)
        elif axis == "rx":
            self.h(a)
            for _ in range(k):
                self.s(a)
            self.h(a)
        elif axis == "ry":
            for _ in range(k):
                self.z_(a)
                self.h(a)
        else:
            raise ValueError(f"unknown rotation axis {axis!r}")

    def rz(self, a: int, theta: float) -> None:
        self.quarter_rotation("rz", a, quarter_turns(theta))

    def rx(self, a: int, theta: float) -> None:
        self.quarter_rotation("rx", a, quarter_turns(theta))

    def ry(self, a: int, theta: float) -> None:
        self.quarter_rotation("ry", a, quarter_turns(theta))

    def rxx(self, a: int, b: int, theta: float) -> None:
        # XX(t) = (H x H) CX Rz_b(t) CX (H x H)
        k = quarter_turns(theta)
        if k:
            self.h(a)
            self.h(b)
            self.cx(a, b)
            for _ in range(k):
                self.s(b)
            self.cx(a, b)
            self.h(a)
            self.h(b)

    def apply(self, g: Gate) -> None:
        name, qs = g.name, g.qubits
        if name in ("rx", "ry", "rz"):
            getattr(self, name)(qs[0], g.params[0])
        elif name == "rxx":
            self.rxx(qs[0], qs[1], g.params[0])
        elif name in ("x", "y", "z"):
            getattr(self, name + "_")(qs[0])
        elif name in ("h", "s", "sdg"):
            getattr(self, name)(qs[0])
        elif name == "cx":
            self.cx(qs[0], qs[1])
        else:
            raise ValueError(f"gate {name!r} has no tableau rule")

    # Row algebra

    def _rowsum_into(self, hx, hz, hr, i: int):
        """Multiply scratch row (hx, hz, hr) by row ``i``; returns the product."""
        x1, z1 = self.x[i].astype(np.int64), self.z[i].astype(np.int64)
        x2, z2 = hx.astype(np.int64), hz.astype(np.int64)
        g = np.where(
            (x1 == 1) & (z1 == 1), z2 - x2,
            np.where((x1 == 1) & (z1 == 0), z2 * (2 * x2 - 1),
                     np.where((x1 == 0) & (z1 == 1), x2 * (1 - 2 * z2), 0)))
        total = (2 * int(hr) + 2 * int(self.r[i]) + int(g.sum())) % 4
        self.row_ops += 1
        return hx ^ self.x[i], hz ^ self.z[i], 1 if total == 2 else 0

    def stabilizers(self) -> list[str]:
        out = []
        for i in range(self.n, 2 * self.n):
            letters = "".join("IZXY"[2 * int(xb) + int(zb)] for xb, zb in zip(self.x[i], self.z[i]))
            out.append(("-" if self.r[i] else "+") + letters)
        return out

    def expect(self, p: PauliString) -> int:
        """Exact expectation of a Pauli string: -1, 0 or +1."""
        if p.n_qubits != self.n:
            raise ValueError(f"Pauli {p} has {p.n_qubits} qubits, tableau has {self.n}")
        px = np.array([c in "XY" for c in p.ops], dtype=np.uint8)
        pz = np.array([c in "ZY" for c in p.ops], dtype=np.uint8)
        n = self.n
        stab_anti = ((self.x[n:] & pz) ^ (self.z[n:] & px)).sum(axis=1) % 2
        self.row_ops += n
        if stab_anti.any():
            return 0
        # p commutes with the stabilizer group, so +-p is the product of the
        # stabilizers whose paired destabilizer anticommutes with p.
        destab_anti = ((self.x[:n] & pz) ^ (self.z[:n] & px)).sum(axis=1) % 2
        self.row_ops += n
        hx = np.zeros(n, dtype=np.uint8)
        hz = np.zeros(n, dtype=np.uint8)
        hr = 0
        for i in np.flatnonzero(destab_anti):
            hx, hz, hr = self._rowsum_into(hx, hz, hr, n + int(i))
        # Y in a row is the Hermitian Y (not XZ), so the accumulated sign is exact.
        assert np.array_equal(hx, px) and np.array_equal(hz, pz)
        return -1 if hr else 1

    def expect_many(self, px: np.ndarray, pz: np.ndarray) -> np.ndarray:
        """Vectorized :meth:`expect` for the Paulis given as rows of bit matrices.

        Same algorithm, but the rowsum loop runs over the n stabilizer rows
        with all commuting Paulis updated together.
        """
        n = self.n
        px, pz = np.asarray(px, dtype=np.uint8), np.asarray(pz, dtype=np.uint8)
        if px.ndim != 2 or px.shape[1] != n or pz.shape != px.shape:
            raise ValueError(f"expected (m, {n}) bit matrices, got {px.shape} and {pz.shape}")
        xs, zs = self.x[n:].astype(np.int64), self.z[n:].astype(np.int64)
        xd, zd = self.x[:n].astype(np.int64), self.z[:n].astype(np.int64)
        px64, pz64 = px.astype(np.int64), pz.astype(np.int64)
        commutes = ~(((xs @ pz64.T) + (zs @ px64.T)) % 2).any(axis=0)
        out = np.zeros(len(px), dtype=np.int64)
        sel = np.flatnonzero(commutes)
        self.row_ops += n * (len(px) + len(sel))
        if not len(sel):
            return out
        use = (((xd @ pz64[sel].T) + (zd @ px64[sel].T)) % 2).astype(bool)  # (n, m')
        hx = np.zeros((len(sel), n), dtype=np.int64)
        hz = np.zeros((len(sel), n), dtype=np.int64)
        phase = np.zeros(len(sel), dtype=np.int64)
        for i in range(n):
            rows = np.flatnonzero(use[i])
            if not len(rows):
                continue
            x1, z1 = xs[i], zs[i]
            x2, z2 = hx[rows], hz[rows]
            g = np.where((x1 == 1) & (z1 == 1), z2 - x2,
                         np.where((x1 == 1) & (z1 == 0), z2 * (2 * x2 - 1),
                                  np.where((x1 == 0) & (z1 == 1), x2 * (1 - 2 * z2), 0)))
            phase[rows] = (phase[rows] + 2 * int(self.r[n + i]) + g.sum(axis=1)) % 4
            hx[rows] ^= x1
            hz[rows] ^= z1
            self.row_ops += len(rows)
        assert np.array_equal(hx, px64[sel]) and np.array_equal(hz, pz64[sel])
        out[sel] = np.where(phase == 2, -1, 1)
        return out

    def check_invariants(self) -> bool:
        """Symplectic form is the standard one and the rows are independent."""
        n = self.n
        x, z = self.x.astype(np.int64), self.z.astype(np.int64)
        form = (x @ z.T + z @ x.T) % 2
        expected = np.zeros((2 * n, 2 * n), dtype=np.int64)
        idx = np.arange(n)
        expected[idx, n + idx] = 1
        expected[n + idx, idx] = 1
        return bool(np.array_equal(form, expected))


def new_zero_state(n: int) -> StabilizerTableau:
    return StabilizerTableau(n)


def apply_clifford_gate(t: StabilizerTableau, g: Gate) -> StabilizerTableau:
    t.apply(g)
    return t


def expect_pauli(t: StabilizerTableau, p: PauliString | str) -> int:
    return t.expect(p if isinstance(p, PauliString) else PauliString(p))


def simulate(c: Circuit | Sequence[Gate], n_qubits: int | None = None) -> StabilizerTableau:
    """Run a Clifford gate list from |0...0>."""
    if isinstance(c, Circuit):
        gates, n_qubits = c.gates, c.n_qubits
    else:
        gates = c
    t = StabilizerTableau(n_qubits)
    for g in gates:
        t.apply(g)
    return t


def clifford_energy(t: StabilizerTableau, h: PauliHamiltonian) -> float:
    if h.n_qubits != t.n:
        raise ValueError(f"Hamiltonian has {h.n_qubits} qubits, tableau has {t.n}")
    if not h.terms:
        return h.identity_offset
    px, pz, coeffs = pauli_bits(h)
    return h.identity_offset + float(coeffs @ t.expect_many(px, pz))


def pauli_bits(h: PauliHamiltonian) -> tuple[np.ndarray, np.ndarray, np.ndarray]:
    """X bits, Z bits (one row per term) and coefficients of a Hamiltonian."""
    px = np.array([[c in "XY" for c in p.ops] for _, p in h.terms], dtype=np.uint8).reshape(-1, h.n_qubits)
    pz = np.array([[c in "ZY" for c in p.ops] for _, p in h.terms], dtype=np.uint8).reshape(-1, h.n_qubits)
    return px, pz, np.array([c for c, _ in h.terms], dtype=float)
