"""UCC-SD ansatz: cluster operator, anti-Hermitian generator and a single
first-order Trotter step compiled into easy/hard cycles."""

from __future__ import annotations

from dataclasses import dataclass
from typing import Sequence

import numpy as np

from .circuit import Circuit, EasyCycle, Gate, HardCycle, ParamGate
from .molham import FermionOperator, MoleculeSpec, jordan_wigner
from .pauli import PauliString, PauliSum


@dataclass(frozen=True)
class ClusterSpec:
    n_orbitals: int
    occupied: tuple[int, ...]
    virtual: tuple[int, ...]
    singles: tuple[tuple[int, int], ...]
    doubles: tuple[tuple[int, int, int, int], ...]

    def __post_init__(self):
        if set(self.occupied) & set(self.virtual):
            raise ValueError("occupied and virtual sets overlap")
        for i, j, k, l in self.doubles:
            if not (i < j and k < l):
                raise ValueError("doubles must be canonically ordered (i<j, k<l)")
        if len(set(self.doubles)) != len(self.doubles) or len(set(self.singles)) != len(self.singles):
            raise ValueError("duplicate excitations")

    @property
    def n_params(self) -> int:
        return len(self.singles) + len(self.doubles)

    def excitation_operators(self) -> list[FermionOperator]:
        n = self.n_orbitals
        ops = [FermionOperator.ladder(n, (i, True), (k, False)) for i, k in self.singles]
        ops += [FermionOperator.ladder(n, (i, True), (j, True), (k, False), (l, False))
                for i, j, k, l in self.doubles]
        return ops


def _spin(orbital: int) -> int:
    return orbital % 2


def build_cluster(spec: MoleculeSpec) -> ClusterSpec:
    n = spec.n_spin_orbitals
    occ = tuple(range(spec.n_electrons))
    virt = tuple(range(spec.n_electrons, n))
    singles = tuple((i, k) for i in virt for k in occ if _spin(i) == _spin(k))
    doubles = tuple(
        (i, j, k, l)
        for i in virt for j in virt if i < j
        for k in occ for l in occ if k < l
        if _spin(i) + _spin(j) == _spin(k) + _spin(l)
    )
    return ClusterSpec(n, occ, virt, singles, doubles)


def _generator_pieces(cluster: ClusterSpec) -> list[PauliSum]:
    """JW image of ``tau - tau^+`` for each excitation, in parameter order."""
    out = []
    for op in cluster.excitation_operators():
        out.append(jordan_wigner(op - op.adjoint()))
    return out


_PIECE_CACHE: dict[ClusterSpec, list[PauliSum]] = {}


def generator_pieces(cluster: ClusterSpec) -> list[PauliSum]:
    if cluster not in _PIECE_CACHE:
        _PIECE_CACHE[cluster] = _generator_pieces(cluster)
    return _PIECE_CACHE[cluster]


def antihermitian_generator(cluster: ClusterSpec, theta: Sequence[float]) -> PauliSum:
    theta = np.asarray(theta, dtype=float)
    if theta.shape != (cluster.n_params,):
        raise ValueError(f"expected {cluster.n_params} parameters, got {theta.shape}")
    total = PauliSum(cluster.n_orbitals)
    for t, piece in zip(theta, generator_pieces(cluster)):
        total = total + t * piece
    return total


def compile_exp_pauli(word: PauliString, angle: ParamGate | float, n_params: int = 0) -> Circuit:
    """Circuit for ``exp(-i * angle * word)`` (up to global phase).

    ``angle`` is either a number or a :class:`ParamGate` describing the
    linear form of the angle (its ``name`` is ignored).
    """
    qubits = word.support
    if not qubits:
        raise ValueError("cannot compile the exponential of the identity")
    n = word.n_qubits
    if isinstance(angle, ParamGate):
        rz = ParamGate("rz", tuple(2 * w for w in angle.weights), 2 * angle.offset)
        n_params = len(angle.weights)
    else:
        rz = Gate("rz", (2 * float(angle),))
    pre, post = {}, {}
    for q in qubits:
        letter = word.letter(q)
        if letter == "X":
            pre[q], post[q] = (Gate("h"),), (Gate("h"),)
        elif letter == "Y":
            pre[q], post[q] = (Gate("rx", (np.pi / 2,)),), (Gate("rx", (-np.pi / 2,)),)
    ladder = [(qubits[k], qubits[k + 1]) for k in range(len(qubits) - 1)]
    last = qubits[-1]
    if not ladder:
        seq = pre.get(last, ()) + (rz,) + post.get(last, ())
        return Circuit(n, (EasyCycle({last: seq}),), n_params)
    cycles: list = [EasyCycle(pre)]
    for pair in ladder:
        cycles += [HardCycle((pair,)), EasyCycle()]
    cycles[-1] = EasyCycle({last: (rz,)})
    for pair in reversed(ladder):
        cycles += [HardCycle((pair,)), EasyCycle()]
    cycles[-1] = EasyCycle(post)
    return Circuit(n, tuple(cycles), n_params)


def trotter_terms(cluster: ClusterSpec) -> list[tuple[PauliString, np.ndarray]]:
    """Ordered ``(word, weights)`` pairs with ``exp(G) ~ prod exp(-i (weights.theta) word)``.

    Singles first, then doubles; words sorted lexicographically within each
    group, with contributions from different excitations to the same word
    summed.
    """
    m = cluster.n_params
    pieces = generator_pieces(cluster)
    groups = [range(len(cluster.singles)), range(len(cluster.singles), m)]
    out = []
    for group in groups:
        acc: dict[PauliString, np.ndarray] = {}
        for e in group:
            for word, c in pieces[e].items():
                # G contains i*b*P; exp(i b theta P) = exp(-i (-b theta) P)
                w = acc.setdefault(word, np.zeros(m))
                w[e] += -c.imag
        for word in sorted(acc, key=lambda p: p.label):
            if np.any(np.abs(acc[word]) > 1e-14):
                out.append((word, acc[word]))
    return out


def trotterize(cluster: ClusterSpec) -> Circuit:
    m = cluster.n_params
    circ = Circuit.empty(cluster.n_orbitals, m)
    for word, weights in trotter_terms(cluster):
        circ = circ.then(compile_exp_pauli(word, ParamGate("rz", tuple(float(w) for w in weights))))
    return circ


def bind(template: Circuit, theta: Sequence[float]) -> Circuit:
    return template.bind(theta)


def prepend_reference(template: Circuit, spec: MoleculeSpec) -> Circuit:
    """Prefix X gates preparing the Hartree-Fock determinant from ``|0...0>``."""
    flips = {q: (Gate("x"),) for q in range(spec.n_electrons)}
    prep = Circuit(template.n_qubits, (EasyCycle(flips),), template.n_params)
    return prep.then(template)


def uccsd_template(spec: MoleculeSpec) -> Circuit:
    return trotterize(build_cluster(spec))


FIXED_THETA_DEG = (8.6, 0.0, 0.0)


def fixed_theta() -> np.ndarray:
    """The H2 parameter point used for the precision and linearity studies."""
    return np.deg2rad(FIXED_THETA_DEG)
