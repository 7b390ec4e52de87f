"""Pauli strings, Pauli sums, dense states and exact diagonalization.

Letters are bit-pair encoded: each qubit carries an x-bit and a z-bit, with
``I=(0,0), X=(1,0), Z=(0,1), Y=(1,1)``.  Qubit 0 is the leftmost letter and
the most significant bit of a computational-basis index, so the bitmasks
stored on a :class:`PauliString` can be applied directly to state indices.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import Iterable, Mapping

import numpy as np

DENSE_LIMIT = 12
PRUNE_TOL = 1e-12
IMAG_TOL = 1e-9

_I2 = np.eye(2, dtype=complex)
_X = np.array([[0, 1], [1, 0]], dtype=complex)
_Y = np.array([[0, -1j], [1j, 0]], dtype=complex)
_Z = np.array([[1, 0], [0, -1]], dtype=complex)
PAULI_MATRICES = {"I": _I2, "X": _X, "Y": _Y, "Z": _Z}
_PHASES = (1, 1j, -1, -1j)


class CapacityError(ValueError):
    """Requested a dense object above the configured qubit limit."""


class NumericalIntegrityError(ArithmeticError):
    """A quantity that must be real (or bounded) came out otherwise."""


def _popcount(v: int) -> int:
    return bin(v).count("1")


@dataclass(frozen=True, order=True)
class PauliString:
    n_qubits: int
    x: int
    z: int

    def __post_init__(self):
        if self.n_qubits < 1:
            raise ValueError("n_qubits must be positive")
        full = (1 << self.n_qubits) - 1
        if self.x & ~full or self.z & ~full:
            raise ValueError("bitmask wider than n_qubits")

    @classmethod
    def from_label(cls, label: str) -> "PauliString":
        label = label.strip().upper()
        if not label:
            raise ValueError("empty Pauli label")
        n = len(label)
        x = z = 0
        for k, ch in enumerate(label):
            bit = 1 << (n - 1 - k)
            if ch == "X":
                x |= bit
            elif ch == "Z":
                z |= bit
            elif ch == "Y":
                x |= bit
                z |= bit
            elif ch != "I":
                raise ValueError(f"bad Pauli letter {ch!r} in {label!r}")
        return cls(n, x, z)

    @classmethod
    def identity(cls, n_qubits: int) -> "PauliString":
        return cls(n_qubits, 0, 0)

    @classmethod
    def single(cls, n_qubits: int, qubit: int, letter: str) -> "PauliString":
        letters = ["I"] * n_qubits
        letters[qubit] = letter
        return cls.from_label("".join(letters))

    @property
    def label(self) -> str:
        out = []
        for k in range(self.n_qubits):
            bit = 1 << (self.n_qubits - 1 - k)
            xb, zb = bool(self.x & bit), bool(self.z & bit)
            out.append("Y" if xb and zb else "X" if xb else "Z" if zb else "I")
        return "".join(out)

    def letter(self, qubit: int) -> str:
        return self.label[qubit]

    @property
    def weight(self) -> int:
        return _popcount(self.x | self.z)

    @property
    def support(self) -> tuple[int, ...]:
        mask = self.x | self.z
        return tuple(q for q in range(self.n_qubits) if mask >> (self.n_qubits - 1 - q) & 1)

    def is_identity(self) -> bool:
        return self.x == 0 and self.z == 0

    def commutes(self, other: "PauliString") -> bool:
        return (_popcount(self.x & other.z) + _popcount(self.z & other.x)) % 2 == 0

    def to_matrix(self) -> np.ndarray:
        dim = 1 << self.n_qubits
        idx = np.arange(dim)
        cols = idx
        rows = idx ^ self.x
        signs = np.array([(-1) ** _popcount(self.z & j) for j in range(dim)], dtype=complex)
        mat = np.zeros((dim, dim), dtype=complex)
        mat[rows, cols] = _PHASES[_popcount(self.x & self.z) % 4] * signs
        return mat

    def __str__(self) -> str:
        return self.label

    def __repr__(self) -> str:
        return f"PauliString({self.label!r})"


def pauli_mul(p: PauliString, q: PauliString) -> tuple[complex, PauliString]:
    """Return ``(phase, r)`` with ``p @ q == phase * r`` as matrices."""
    if p.n_qubits != q.n_qubits:
        raise ValueError(f"dimension mismatch: {p.n_qubits} vs {q.n_qubits} qubits")
    x, z = p.x ^ q.x, p.z ^ q.z
    k = _popcount(p.x & p.z) + _popcount(q.x & q.z) - _popcount(x & z) + 2 * _popcount(p.z & q.x)
    return _PHASES[k % 4], PauliString(p.n_qubits, x, z)


def _z_signs(z: int, dim: int) -> np.ndarray:
    idx = np.arange(dim)
    parity = np.zeros(dim, dtype=np.int64)
    v = idx & z
    while np.any(v):
        parity ^= v & 1
        v = v >> 1
    return 1 - 2 * parity


class PauliSum:
    """Immutable linear combination of Pauli strings with complex weights."""

    __slots__ = ("n_qubits", "_terms")
    # numpy scalars must defer to __rmul__ instead of iterating the terms
    __array_ufunc__ = None

    def __init__(self, n_qubits: int, terms: Mapping[PauliString, complex] | None = None,
                 *, prune: float = PRUNE_TOL):
        if n_qubits < 1:
            raise ValueError("n_qubits must be positive")
        acc: dict[PauliString, complex] = {}
        for p, c in (terms or {}).items():
            if p.n_qubits != n_qubits:
                raise ValueError(f"term {p} has {p.n_qubits} qubits, expected {n_qubits}")
            acc[p] = acc.get(p, 0) + complex(c)
        self.n_qubits = n_qubits
        self._terms = {p: c for p, c in acc.items() if abs(c) > prune}

    @classmethod
    def from_dict(cls, terms: Mapping[str, complex]) -> "PauliSum":
        items = [(PauliString.from_label(k), v) for k, v in terms.items()]
        if not items:
            raise ValueError("cannot infer qubit count from an empty dict")
        return cls(items[0][0].n_qubits, dict(_accumulate(items)))

    @classmethod
    def from_terms(cls, n_qubits: int, items: Iterable[tuple[PauliString, complex]]) -> "PauliSum":
        return cls(n_qubits, dict(_accumulate(items)))

    @property
    def terms(self) -> dict[PauliString, complex]:
        return dict(self._terms)

    def items(self):
        return self._terms.items()

    def __len__(self) -> int:
        return len(self._terms)

    def __iter__(self):
        return iter(self._terms)

    def __getitem__(self, p: PauliString | str) -> complex:
        if isinstance(p, str):
            p = PauliString.from_label(p)
        return self._terms.get(p, 0j)

    def __eq__(self, other) -> bool:
        return isinstance(other, PauliSum) and self.n_qubits == other.n_qubits and self._terms == other._terms

    def __hash__(self):
        return hash((self.n_qubits, frozenset(self._terms.items())))

    def _check(self, other: "PauliSum"):
        if other.n_qubits != self.n_qubits:
            raise ValueError(f"dimension mismatch: {self.n_qubits} vs {other.n_qubits} qubits")

    def __add__(self, other: "PauliSum") -> "PauliSum":
        self._check(other)
        return PauliSum.from_terms(self.n_qubits, [*self._terms.items(), *other._terms.items()])

    def __sub__(self, other: "PauliSum") -> "PauliSum":
        return self + (-1) * other

    def __neg__(self) -> "PauliSum":
        return (-1) * self

    def __mul__(self, scalar: complex) -> "PauliSum":
        return PauliSum(self.n_qubits, {p: c * scalar for p, c in self._terms.items()})

    __rmul__ = __mul__

    def __matmul__(self, other: "PauliSum") -> "PauliSum":
        self._check(other)
        items = []
        for p, a in self._terms.items():
            for q, b in other._terms.items():
                phase, r = pauli_mul(p, q)
                items.append((r, phase * a * b))
        return PauliSum.from_terms(self.n_qubits, items)

    def adjoint(self) -> "PauliSum":
        return PauliSum(self.n_qubits, {p: c.conjugate() for p, c in self._terms.items()})

    def is_hermitian(self, tol: float = PRUNE_TOL) -> bool:
        return all(abs(c.imag) <= tol for c in self._terms.values())

    def is_antihermitian(self, tol: float = PRUNE_TOL) -> bool:
        return all(abs(c.real) <= tol for c in self._terms.values())

    def identity_coefficient(self) -> complex:
        return self._terms.get(PauliString.identity(self.n_qubits), 0j)

    def sorted_items(self) -> list[tuple[PauliString, complex]]:
        return sorted(self._terms.items(), key=lambda kv: kv[0].label)

    def to_text(self) -> str:
        return "".join(f"{format_coefficient(c)} {p.label}\n" for p, c in self.sorted_items())

    @classmethod
    def from_text(cls, text: str, source: str = "<string>") -> "PauliSum":
        items = []
        n = None
        for lineno, raw in enumerate(text.splitlines(), start=1):
            line = raw.split("#", 1)[0].strip()
            if not line:
                continue
            parts = line.split()
            if len(parts) != 2:
                raise PauliParseError(f"{source}:{lineno}: expected '<coeff> <letters>', got {raw!r}")
            try:
                coeff = complex(parts[0])
                p = PauliString.from_label(parts[1])
            except ValueError as exc:
                raise PauliParseError(f"{source}:{lineno}: {exc}") from None
            if n is None:
                n = p.n_qubits
            elif p.n_qubits != n:
                raise PauliParseError(f"{source}:{lineno}: term has {p.n_qubits} qubits, expected {n}")
            items.append((p, coeff))
        if n is None:
            raise PauliParseError(f"{source}: no terms")
        return cls.from_terms(n, items)

    def __repr__(self) -> str:
        body = ", ".join(f"{p.label}: {format_coefficient(c)}" for p, c in self.sorted_items()[:6])
        more = "" if len(self) <= 6 else f", ... (+{len(self) - 6})"
        return f"PauliSum({{{body}{more}}})"


class PauliParseError(ValueError):
    pass


def _accumulate(items):
    acc: dict[PauliString, complex] = {}
    for p, c in items:
        acc[p] = acc.get(p, 0) + complex(c)
    return acc


def format_coefficient(c: complex) -> str:
    """Shortest text form that parses back to exactly ``c``."""
    c = complex(c)
    if c.imag == 0:
        return repr(c.real)
    sign = "+" if c.imag >= 0 or np.isnan(c.imag) else ""
    return f"{c.real!r}{sign}{c.imag!r}j"


def to_matrix(h: PauliSum | PauliString, dense_limit: int = DENSE_LIMIT) -> np.ndarray:
    if isinstance(h, PauliString):
        h = PauliSum(h.n_qubits, {h: 1.0})
    if h.n_qubits > dense_limit:
        raise CapacityError(f"{h.n_qubits} qubits exceeds dense limit {dense_limit}")
    dim = 1 << h.n_qubits
    mat = np.zeros((dim, dim), dtype=complex)
    cols = np.arange(dim)
    for p, c in h.items():
        phase = _PHASES[_popcount(p.x & p.z) % 4]
        mat[cols ^ p.x, cols] += c * phase * _z_signs(p.z, dim)
    return mat


@dataclass(frozen=True)
class DenseState:
    """A statevector (``kind='statevector'``) or density matrix."""

    kind: str
    data: np.ndarray = field(repr=False)

    def __post_init__(self):
        if self.kind not in ("statevector", "density_matrix"):
            raise ValueError(f"unknown state kind {self.kind!r}")
        dim = self.data.shape[0]
        if dim & (dim - 1) or dim < 2:
            raise ValueError("dimension must be a power of two")
        if self.kind == "density_matrix" and self.data.shape != (dim, dim):
            raise ValueError("density matrix must be square")
        if self.kind == "statevector" and self.data.ndim != 1:
            raise ValueError("statevector must be one-dimensional")

    @property
    def n_qubits(self) -> int:
        return self.data.shape[0].bit_length() - 1

    @classmethod
    def basis(cls, bits: str | Iterable[int]) -> "DenseState":
        bits = [int(b) for b in bits]
        psi = np.zeros(1 << len(bits), dtype=complex)
        psi[int("".join(map(str, bits)), 2)] = 1.0
        return cls("statevector", psi)

    @classmethod
    def from_vector(cls, psi) -> "DenseState":
        return cls("statevector", np.asarray(psi, dtype=complex))

    @classmethod
    def from_density(cls, rho) -> "DenseState":
        return cls("density_matrix", np.asarray(rho, dtype=complex))

    def to_density(self) -> "DenseState":
        if self.kind == "density_matrix":
            return self
        return DenseState("density_matrix", np.outer(self.data, self.data.conj()))

    def check(self, tol: float = 1e-10) -> None:
        if self.kind == "statevector":
            norm = np.linalg.norm(self.data)
            if abs(norm - 1) > tol:
                raise NumericalIntegrityError(f"statevector norm {norm!r}")
        else:
            rho = self.data
            if abs(np.trace(rho) - 1) > tol:
                raise NumericalIntegrityError(f"density trace {np.trace(rho)!r}")
            if np.max(np.abs(rho - rho.conj().T)) > tol:
                raise NumericalIntegrityError("density matrix not Hermitian")


def pauli_expectations(state: DenseState, paulis: Iterable[PauliString]) -> np.ndarray:
    """Complex ``tr(rho P)`` (or ``<psi|P|psi>``) for each Pauli string."""
    data = state.data
    dim = data.shape[0]
    idx = np.arange(dim)
    out = []
    for p in paulis:
        if p.n_qubits != state.n_qubits:
            raise ValueError(f"dimension mismatch: {p.n_qubits} vs {state.n_qubits} qubits")
        phase = _PHASES[_popcount(p.x & p.z) % 4]
        signs = _z_signs(p.z, dim)
        if state.kind == "statevector":
            # <psi| P |psi> = sum_j conj(psi[j ^ x]) * phase * sign(j) * psi[j]
            val = phase * np.sum(np.conj(data[idx ^ p.x]) * signs * data)
        else:
            val = phase * np.sum(data[idx, idx ^ p.x] * signs)
        out.append(val)
    return np.array(out, dtype=complex)


def expectation(state: DenseState, obs: PauliSum) -> float:
    if not obs.is_hermitian():
        raise ValueError("observable is not Hermitian")
    if obs.n_qubits != state.n_qubits:
        raise ValueError(f"dimension mismatch: {obs.n_qubits} vs {state.n_qubits} qubits")
    paulis = list(obs)
    coeffs = np.array([obs[p] for p in paulis])
    val = complex(np.dot(coeffs, pauli_expectations(state, paulis)))
    if abs(val.imag) > IMAG_TOL:
        raise NumericalIntegrityError(f"expectation has imaginary part {val.imag!r}")
    return val.real


def ground_energy_exact(h: PauliSum, dense_limit: int = DENSE_LIMIT) -> tuple[float, np.ndarray]:
    if not h.is_hermitian():
        raise ValueError("Hamiltonian is not Hermitian")
    mat = to_matrix(h, dense_limit)
    vals, vecs = np.linalg.eigh(mat)
    vec = vecs[:, 0]
    return float(vals[0]), vec / np.linalg.norm(vec)
