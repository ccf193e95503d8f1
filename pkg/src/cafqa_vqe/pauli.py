"""Pauli strings, qubit Hamiltonians and qubit-wise-commuting measurement groups.

Character ``q`` of a Pauli string acts on qubit ``q``; character ``q`` of a
measured bitstring is the outcome of qubit ``q``.  Internally a string is a
pair of bitmasks with bit ``q`` set in ``x`` for X/Y and in ``z`` for Z/Y.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import Iterable, Mapping, Sequence

_LETTERS = "IXYZ"


@dataclass(frozen=True, order=True)
class PauliString:
    ops: str

    def __post_init__(self):
        if not self.ops:
            raise ValueError("empty Pauli string")
        bad = set(self.ops) - set(_LETTERS)
        if bad:
            raise ValueError(f"invalid Pauli letters {sorted(bad)} in {self.ops!r}")

    @classmethod
    def from_masks(cls, x: int, z: int, n_qubits: int) -> "PauliString":
        letters = []
        for q in range(n_qubits):
            xb, zb = (x >> q) & 1, (z >> q) & 1
            letters.append("IZXY"[xb * 2 + zb])
        return cls("".join(letters))

    @property
    def n_qubits(self) -> int:
        return len(self.ops)

    @property
    def x_mask(self) -> int:
        return sum(1 << q for q, c in enumerate(self.ops) if c in "XY")

    @property
    def z_mask(self) -> int:
        return sum(1 << q for q, c in enumerate(self.ops) if c in "ZY")

    @property
    def support(self) -> tuple[int, ...]:
        return tuple(q for q, c in enumerate(self.ops) if c != "I")

    def is_identity(self) -> bool:
        return self.x_mask == 0 and self.z_mask == 0

    def commutes_with(self, other: "PauliString") -> bool:
        anti = (self.x_mask & other.z_mask) ^ (self.z_mask & other.x_mask)
        return bin(anti).count("1") % 2 == 0

    def qubitwise_compatible(self, basis: Sequence[str]) -> bool:
        """True when every non-identity letter equals the basis letter there."""
        return all(c == "I" or c == b for c, b in zip(self.ops, basis))

    def __str__(self) -> str:
        return self.ops


@dataclass(frozen=True)
class PauliHamiltonian:
    """Weighted sum of non-identity Pauli strings plus a scalar offset (Hartree)."""

    n_qubits: int
    terms: tuple[tuple[float, PauliString], ...]
    identity_offset: float = 0.0

    def __post_init__(self):
        if self.n_qubits < 1:
            raise ValueError("n_qubits must be positive")
        if not math.isfinite(self.identity_offset):
            raise ValueError("identity offset is not finite")
        seen = set()
        for coeff, p in self.terms:
            if p.n_qubits != self.n_qubits:
                raise ValueError(f"term {p} has {p.n_qubits} qubits, expected {self.n_qubits}")
            if p.is_identity():
                raise ValueError("identity term must be given as identity_offset")
            if not math.isfinite(coeff):
                raise ValueError(f"coefficient of {p} is not finite")
            if p in seen:
                raise ValueError(f"duplicate term {p}")
            seen.add(p)

    @classmethod
    def from_terms(cls, terms: Iterable[tuple[float, str | PauliString]],
                   n_qubits: int | None = None) -> "PauliHamiltonian":
        """Build a normalized Hamiltonian; duplicates are summed, identities folded."""
        merged: dict[PauliString, float] = {}
        offset = 0.0
        for coeff, p in terms:
            p = p if isinstance(p, PauliString) else PauliString(p)
            if n_qubits is None:
                n_qubits = p.n_qubits
            elif p.n_qubits != n_qubits:
                raise ValueError(f"term {p} has {p.n_qubits} qubits, expected {n_qubits}")
            coeff = float(coeff)
            if not math.isfinite(coeff):
                raise ValueError(f"coefficient of {p} is not finite")
            if p.is_identity():
                offset += coeff
            else:
                merged[p] = merged.get(p, 0.0) + coeff
        if n_qubits is None:
            raise ValueError("cannot infer qubit count from an empty term list")
        return cls(n_qubits, tuple((c, p) for p, c in merged.items()), offset)

    def as_dict(self) -> dict[str, float]:
        return {p.ops: c for c, p in self.terms}

    def __len__(self) -> int:
        return len(self.terms)


class HamiltonianFormatError(ValueError):
    def __init__(self, message: str, line: int):
        super().__init__(f"line {line}: {message}")
        self.line = line


def parse_hamiltonian(text: str) -> PauliHamiltonian:
    """Read the plain-text Hamiltonian format.

    Line 1 holds the qubit count; every other non-empty line that does not
    start with ``#`` is ``<coefficient> <pauli-string>``.
    """
    n_qubits = None
    terms = []
    for lineno, raw in enumerate(text.splitlines(), start=1):
        line = raw.strip()
        if not line or line.startswith("#"):
            continue
        if n_qubits is None:
            try:
                n_qubits = int(line)
            except ValueError:
                raise HamiltonianFormatError(f"expected qubit count, got {line!r}", lineno) from None
            if n_qubits < 1:
                raise HamiltonianFormatError("qubit count must be positive", lineno)
            continue
        fields = line.split()
        if len(fields) != 2:
            raise HamiltonianFormatError(f"expected '<coefficient> <pauli>', got {line!r}", lineno)
        try:
            coeff = float(fields[0])
        except ValueError:
            raise HamiltonianFormatError(f"bad coefficient {fields[0]!r}", lineno) from None
        if not math.isfinite(coeff):
            raise HamiltonianFormatError(f"non-finite coefficient {fields[0]!r}", lineno)
        ops = fields[1].upper()
        if set(ops) - set(_LETTERS):
            raise HamiltonianFormatError(f"bad Pauli string {fields[1]!r}", lineno)
        if len(ops) != n_qubits:
            raise HamiltonianFormatError(
                f"string length {len(ops)} != declared {n_qubits}", lineno)
        terms.append((coeff, ops))
    if n_qubits is None:
        raise HamiltonianFormatError("missing qubit count", 1)
    return PauliHamiltonian.from_terms(terms, n_qubits)


def serialize_hamiltonian(h: PauliHamiltonian) -> str:
    lines = [str(h.n_qubits)]
    if h.identity_offset != 0.0:
        lines.append(f"{h.identity_offset!r} {'I' * h.n_qubits}")
    lines.extend(f"{c!r} {p.ops}" for c, p in h.terms)
    return "\n".join(lines) + "\n"


def load_hamiltonian(path) -> PauliHamiltonian:
    with open(path, encoding="utf-8") as fh:
        return parse_hamiltonian(fh.read())


@dataclass(frozen=True)
class MeasurementGroup:
    """One measurement setting: a per-qubit basis letter and the terms it covers.

    ``basis`` letters are X, Y or Z; qubits no member touches are measured in Z.
    """

    basis: str
    members: tuple[int, ...] = field(default_factory=tuple)


def _join(basis: list[str], p: PauliString) -> bool:
    for q, c in enumerate(p.ops):
        if c != "I" and basis[q] not in ("I", c):
            return False
    for q, c in enumerate(p.ops):
        if c != "I":
            basis[q] = c
    return True


def grouping_order(h: PauliHamiltonian) -> list[int]:
    """Term indices by descending |coefficient|, ties broken by the string."""
    return sorted(range(len(h.terms)), key=lambda i: (-abs(h.terms[i][0]), h.terms[i][1].ops))


def group_qubitwise_commuting(h: PauliHamiltonian) -> list[MeasurementGroup]:
    """Greedy first-fit partition of the non-identity terms into QWC groups."""
    bases: list[list[str]] = []
    members: list[list[int]] = []
    for idx in grouping_order(h):
        p = h.terms[idx][1]
        for basis, mem in zip(bases, members):
            if _join(basis, p):
                mem.append(idx)
                break
        else:
            basis = ["I"] * h.n_qubits
            _join(basis, p)
            bases.append(basis)
            members.append([idx])
    return [MeasurementGroup("".join(b).replace("I", "Z"), tuple(m))
            for b, m in zip(bases, members)]


def parity_expectation(histogram: Mapping[str, float], support: Sequence[int]) -> float:
    """Signed average of (-1)^(sum of outcome bits on ``support``)."""
    total = 0.0
    acc = 0.0
    for bits, count in histogram.items():
        total += count
        ones = sum(bits[q] == "1" for q in support)
        acc += -count if ones % 2 else count
    if total <= 0:
        raise ValueError("histogram has no counts")
    return acc / total


def energy_from_counts(h: PauliHamiltonian, groups: Sequence[MeasurementGroup],
                       histograms: Sequence[Mapping[str, float]]) -> float:
    """Energy estimate from one histogram per measurement group.

    Counts may be fractional, e.g. exact probabilities for an infinite-shot check.
    """
    if len(histograms) != len(groups):
        raise ValueError(f"{len(groups)} groups but {len(histograms)} histograms")
    energy = h.identity_offset
    for g, (group, hist) in enumerate(zip(groups, histograms)):
        if not group.members:
            continue
        if not hist or sum(hist.values()) <= 0:
            raise ValueError(f"empty histogram for group {g} ({group.basis})")
        for bits in hist:
            if len(bits) != h.n_qubits:
                raise ValueError(f"bitstring {bits!r} has wrong length for {h.n_qubits} qubits")
        for idx in group.members:
            coeff, p = h.terms[idx]
            energy += coeff * parity_expectation(hist, p.support)
    return energy
