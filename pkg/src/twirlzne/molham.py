"""Molecular qubit Hamiltonians.

Integral file format (plain text, 0-based spin-orbital indices, Hartree)::

    norb <N> nelec <M> enuc <E>
    0 <value>                      # scalar term
    1 p q <value>                  # h_pq   a_p a_q^+
    2 p q r s <value>              # h_pqrs a_p a_q a_r^+ a_s^+

Operators are assembled exactly in the written order (annihilators first).
Lines starting with ``#`` are comments.  Qubit ``i`` holds spin-orbital ``i``
(even = alpha, odd = beta); an occupied orbital is ``|1>``.
"""

from __future__ import annotations

import json
from dataclasses import dataclass
from functools import lru_cache
from importlib import resources
from pathlib import Path
from typing import Mapping

import numpy as np

from .pauli import DenseState, PauliString, PauliSum

Ladder = tuple[tuple[int, bool], ...]


class IntegralParseError(ValueError):
    pass


@dataclass(frozen=True)
class MoleculeSpec:
    name: str
    geometry: float
    n_electrons: int
    n_spin_orbitals: int
    nuclear_repulsion: float = 0.0

    def __post_init__(self):
        if self.n_spin_orbitals < 1:
            raise ValueError("need at least one spin-orbital")
        if not 0 <= self.n_electrons <= self.n_spin_orbitals:
            raise ValueError("n_electrons must lie in [0, n_spin_orbitals]")


class FermionOperator:
    """Sum of products of ladder operators, stored exactly as written."""

    def __init__(self, n_orbitals: int, terms: Mapping[Ladder, complex] | None = None):
        if n_orbitals < 1:
            raise ValueError("n_orbitals must be positive")
        acc: dict[Ladder, complex] = {}
        for key, c in (terms or {}).items():
            key = tuple((int(i), bool(dag)) for i, dag in key)
            for i, _ in key:
                if not 0 <= i < n_orbitals:
                    raise IndexError(f"orbital {i} out of range for {n_orbitals} orbitals")
            acc[key] = acc.get(key, 0) + complex(c)
        self.n_orbitals = n_orbitals
        self.terms = acc

    @classmethod
    def ladder(cls, n_orbitals: int, *ops: tuple[int, bool], coeff: complex = 1.0) -> "FermionOperator":
        return cls(n_orbitals, {tuple(ops): coeff})

    def __add__(self, other: "FermionOperator") -> "FermionOperator":
        if other.n_orbitals != self.n_orbitals:
            raise ValueError("orbital count mismatch")
        out = FermionOperator(self.n_orbitals, self.terms)
        for k, c in other.terms.items():
            out.terms[k] = out.terms.get(k, 0) + c
        return out

    def __sub__(self, other: "FermionOperator") -> "FermionOperator":
        return self + other * -1

    def __mul__(self, scalar: complex) -> "FermionOperator":
        return FermionOperator(self.n_orbitals, {k: c * scalar for k, c in self.terms.items()})

    __rmul__ = __mul__

    def adjoint(self) -> "FermionOperator":
        return FermionOperator(
            self.n_orbitals,
            {tuple((i, not dag) for i, dag in reversed(k)): c.conjugate() for k, c in self.terms.items()},
        )


@lru_cache(maxsize=None)
def _jw_ladder(n: int, index: int, creation: bool) -> PauliSum:
    zs = "Z" * index
    rest = "I" * (n - index - 1)
    x = PauliString.from_label(zs + "X" + rest)
    y = PauliString.from_label(zs + "Y" + rest)
    sign = -1j if creation else 1j
    return PauliSum(n, {x: 0.5, y: 0.5 * sign})


def jordan_wigner(f: FermionOperator) -> PauliSum:
    n = f.n_orbitals
    ident = PauliSum(n, {PauliString.identity(n): 1.0})
    total = PauliSum(n)
    for key, c in f.terms.items():
        prod = ident
        for i, dag in key:
            prod = prod @ _jw_ladder(n, i, dag)
        total = total + c * prod
    return total


def number_operator(n_orbitals: int) -> FermionOperator:
    return FermionOperator(n_orbitals, {((i, True), (i, False)): 1.0 for i in range(n_orbitals)})


def _parse_header(line: str, source: str) -> dict[str, float]:
    parts = line.split()
    if len(parts) != 6 or parts[0::2] != ["norb", "nelec", "enuc"]:
        raise IntegralParseError(f"{source}:1: header must be 'norb <N> nelec <M> enuc <E>', got {line!r}")
    try:
        return {"norb": int(parts[1]), "nelec": int(parts[3]), "enuc": float(parts[5])}
    except ValueError:
        raise IntegralParseError(f"{source}:1: bad header values in {line!r}") from None


def parse_integrals(text: str, name: str = "molecule", geometry: float = float("nan"),
                    source: str = "<string>") -> tuple[MoleculeSpec, FermionOperator]:
    header = None
    terms: dict[Ladder, complex] = {}
    for lineno, raw in enumerate(text.splitlines(), start=1):
        line = raw.split("#", 1)[0].strip()
        if not line:
            continue
        if header is None:
            header = _parse_header(line, source)
            norb = header["norb"]
            continue
        parts = line.split()
        try:
            order = int(parts[0])
            expected = {0: 2, 1: 4, 2: 6}.get(order)
            if expected is None or len(parts) != expected:
                raise ValueError
            idx = [int(v) for v in parts[1:-1]]
            value = float(parts[-1])
        except ValueError:
            raise IntegralParseError(f"{source}:{lineno}: malformed integral line {raw!r}") from None
        if any(not 0 <= i < norb for i in idx):
            raise IntegralParseError(f"{source}:{lineno}: orbital index out of range for norb={norb}")
        if order == 0:
            key: Ladder = ()
        elif order == 1:
            key = ((idx[0], False), (idx[1], True))
        else:
            key = ((idx[0], False), (idx[1], False), (idx[2], True), (idx[3], True))
        terms[key] = terms.get(key, 0) + value
    if header is None:
        raise IntegralParseError(f"{source}: missing header")
    if header["nelec"] > header["norb"]:
        raise IntegralParseError(f"{source}: nelec {header['nelec']} exceeds norb {header['norb']}")
    spec = MoleculeSpec(name, geometry, header["nelec"], header["norb"], header["enuc"])
    return spec, FermionOperator(header["norb"], terms)


def load_integrals(path) -> tuple[MoleculeSpec, FermionOperator]:
    path = Path(path)
    stem = path.stem
    name, _, geo = stem.partition("_")
    try:
        geometry = float(geo)
    except ValueError:
        geometry = float("nan")
    return parse_integrals(path.read_text(), name=name, geometry=geometry, source=str(path))


def load_pauli_sum(path) -> PauliSum:
    path = Path(path)
    return PauliSum.from_text(path.read_text(), source=str(path))


def write_pauli_sum(h: PauliSum, path) -> None:
    Path(path).write_text(h.to_text())


def hartree_fock_state(spec: MoleculeSpec) -> DenseState:
    bits = [1] * spec.n_electrons + [0] * (spec.n_spin_orbitals - spec.n_electrons)
    return DenseState.basis(bits)


def hartree_fock_bits(spec: MoleculeSpec) -> int:
    n = spec.n_spin_orbitals
    return sum(1 << (n - 1 - i) for i in range(spec.n_electrons))


@dataclass(frozen=True)
class Problem:
    """Everything a VQE run needs about the molecule."""

    spec: MoleculeSpec
    hamiltonian: PauliSum
    reference: Mapping[str, float] | None = None

    @property
    def n_qubits(self) -> int:
        return self.hamiltonian.n_qubits


def data_path(name: str) -> Path:
    return Path(str(resources.files("twirlzne") / "data" / name))


def fixture_references() -> dict:
    return json.loads(data_path("references.json").read_text())


def h2_geometries() -> list[float]:
    return sorted(float(k) for k in fixture_references()["h2"])


def load_problem(path, name: str | None = None) -> Problem:
    """Build a :class:`Problem` from an integral file."""
    path = Path(path)
    spec, ferm = load_integrals(path)
    ham = jordan_wigner(ferm)
    ham = PauliSum(ham.n_qubits, {p: c.real for p, c in ham.items()}) if ham.is_hermitian(1e-10) else ham
    refs = fixture_references().get(spec.name, {})
    ref = refs.get(f"{spec.geometry:g}") if refs else None
    return Problem(spec, ham, ref)


def load_h2(bond_length: float = 0.7414) -> Problem:
    return load_problem(data_path(f"h2_{bond_length:g}.ints"))


def problem_from_pauli_sum(path, n_electrons: int, nuclear_repulsion: float = 0.0,
                           name: str = "custom") -> Problem:
    ham = load_pauli_sum(path)
    spec = MoleculeSpec(name, float("nan"), n_electrons, ham.n_qubits, nuclear_repulsion)
    return Problem(spec, ham, None)


def hf_energy(problem: Problem) -> float:
    from .pauli import expectation

    return expectation(hartree_fock_state(problem.spec), problem.hamiltonian) + problem.spec.nuclear_repulsion


def fci_energy(problem: Problem) -> float:
    from .pauli import ground_energy_exact

    return ground_energy_exact(problem.hamiltonian)[0] + problem.spec.nuclear_repulsion


def particle_number_matrix(n: int) -> np.ndarray:
    from .pauli import to_matrix

    return to_matrix(jordan_wigner(number_operator(n)))
