"""Noise models and simulation of cycle-structured circuits.

Two state representations are used:

* statevector, as a ``(2,)*n`` tensor (plus an optional trailing batch axis);
* Pauli-transfer (PTM) vector, a real ``(4,)*n`` tensor with entries
  ``tr(rho P_a)``.  Channels act on it through their PTMs, so twirled noise is
  a diagonal scaling and a CNOT is a signed permutation.

Pauli digits are ``I=0, X=1, Y=2, Z=3`` and qubit 0 is the most significant.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from functools import cached_property, lru_cache
from typing import Iterable, Sequence, Union

import numpy as np

from .circuit import CNOT, Circuit, EasyCycle, HardCycle, ParamGate, rotation
from .pauli import (PAULI_MATRICES, DenseState, NumericalIntegrityError, PauliString, PauliSum,
                    expectation, pauli_expectations)

_P1 = np.stack([PAULI_MATRICES[k] for k in "IXYZ"])


class ModeError(ValueError):
    """A channel attachment was asked to run on the statevector path."""


# --------------------------------------------------------------------------
# tensor kernels


def apply_unitary(tensor: np.ndarray, u: np.ndarray, qubits: Sequence[int]) -> np.ndarray:
    """Apply ``u`` to ``qubits`` of a ``(2,)*n [+ batch]`` tensor."""
    return _apply_local(tensor, u, qubits, 2)


def apply_ptm(tensor: np.ndarray, r: np.ndarray, qubits: Sequence[int]) -> np.ndarray:
    """Apply a PTM to ``qubits`` of a ``(4,)*n [+ batch]`` tensor."""
    return _apply_local(tensor, r, qubits, 4)


def _apply_local(tensor, op, qubits, d):
    k = len(qubits)
    op = op.reshape((d,) * (2 * k))
    out = np.tensordot(op, tensor, axes=(list(range(k, 2 * k)), list(qubits)))
    return np.moveaxis(out, list(range(k)), list(qubits))


@lru_cache(maxsize=None)
def pauli_basis(k: int) -> np.ndarray:
    """All ``4**k`` Pauli matrices on ``k`` qubits, digit order IXYZ."""
    basis = np.ones((1, 1, 1), dtype=complex)
    for _ in range(k):
        basis = np.einsum("aij,bkl->abikjl", basis, _P1).reshape(
            basis.shape[0] * 4, basis.shape[1] * 2, basis.shape[2] * 2)
    return basis


@lru_cache(maxsize=None)
def commutation_signs(k: int) -> np.ndarray:
    """``S[a, b] = +1`` if Paulis ``a`` and ``b`` commute, else ``-1``."""
    one = np.array([[1, 1, 1, 1], [1, 1, -1, -1], [1, -1, 1, -1], [1, -1, -1, 1]])
    out = np.ones((1, 1), dtype=int)
    for _ in range(k):
        out = np.kron(out, one)
    return out


def pauli_index(p: PauliString) -> int:
    digits = {"I": 0, "X": 1, "Y": 2, "Z": 3}
    idx = 0
    for ch in p.label:
        idx = idx * 4 + digits[ch]
    return idx


def density_to_ptm_vector(rho: np.ndarray) -> np.ndarray:
    dim = rho.shape[0]
    n = dim.bit_length() - 1
    t = rho.reshape((2,) * (2 * n))
    # tr(rho P) = sum_ij rho[i, j] P[j, i]; the column axis of qubit q sits at index n
    for q in range(n):
        t = np.moveaxis(np.tensordot(_P1, t, axes=([2, 1], [q, n])), 0, q)
    return t.real.copy()


def ptm_vector_to_density(v: np.ndarray) -> np.ndarray:
    n = v.ndim
    flat = v.reshape(-1)
    dim = 1 << n
    if n <= 6:
        rho = np.einsum("a,aij->ij", flat, pauli_basis(n))
    else:
        rho = np.zeros((dim, dim), dtype=complex)
        for a, val in enumerate(flat):
            if val != 0:
                rho += val * _pauli_from_index(a, n)
    return rho / dim


def _pauli_from_index(a: int, n: int) -> np.ndarray:
    m = np.ones((1, 1), dtype=complex)
    for q in range(n):
        m = np.kron(m, _P1[(a >> (2 * (n - 1 - q))) & 3])
    return m


def basis_state_ptm(bits: int, n: int) -> np.ndarray:
    v = np.ones((1,))
    for q in range(n):
        b = (bits >> (n - 1 - q)) & 1
        v = np.kron(v, np.array([1.0, 0.0, 0.0, -1.0 if b else 1.0]))
    return v.reshape((4,) * n)


# --------------------------------------------------------------------------
# channels


@dataclass(frozen=True, eq=False)
class ChannelPTM:
    """Pauli-transfer matrix ``R[a, b] = tr(P_a L(P_b)) / 2**n``."""

    matrix: np.ndarray

    def __post_init__(self):
        d = self.matrix.shape[0]
        if self.matrix.shape != (d, d) or d < 4 or d & (d - 1) or (d.bit_length() - 1) % 2:
            raise ValueError("PTM must be 4**n x 4**n")

    @property
    def n_qubits(self) -> int:
        return (self.matrix.shape[0].bit_length() - 1) // 2

    @classmethod
    def identity(cls, n: int) -> "ChannelPTM":
        return cls(np.eye(4 ** n))

    @classmethod
    def from_unitary(cls, u: np.ndarray) -> "ChannelPTM":
        return cls(ptm_from_kraus([u]))

    @classmethod
    def from_choi(cls, choi: np.ndarray) -> "ChannelPTM":
        return cls(ptm_from_choi(choi))

    def to_choi(self) -> np.ndarray:
        return choi_from_ptm(self.matrix)

    def compose(self, first: "ChannelPTM") -> "ChannelPTM":
        """``self`` applied after ``first``."""
        return ChannelPTM(self.matrix @ first.matrix)

    def is_cptp(self, tol: float = 1e-10) -> bool:
        r = self.matrix
        top = np.zeros(r.shape[0])
        top[0] = 1.0
        if np.max(np.abs(r[0] - top)) > tol:
            return False
        return bool(np.min(np.linalg.eigvalsh(self.to_choi())) > -tol)

    def is_diagonal(self, tol: float = 1e-12) -> bool:
        off = self.matrix - np.diag(np.diag(self.matrix))
        return bool(np.max(np.abs(off)) < tol)


def ptm_from_kraus(kraus: Iterable[np.ndarray]) -> np.ndarray:
    kraus = list(kraus)
    dim = kraus[0].shape[0]
    k = dim.bit_length() - 1
    basis = pauli_basis(k)
    image = sum(K @ basis @ K.conj().T for K in kraus)
    return _trace_against_basis(basis, image) / dim


def _trace_against_basis(basis: np.ndarray, images: np.ndarray) -> np.ndarray:
    """``out[a, b] = Re tr(P_a M_b)``; Paulis are Hermitian so ``P_a^T = conj(P_a)``."""
    n = basis.shape[0]
    return (basis.conj().reshape(n, -1) @ images.reshape(len(images), -1).T).real


def ptm_from_choi(choi: np.ndarray) -> np.ndarray:
    """Choi convention ``J = sum_ij |i><j| (x) L(|i><j|)`` (input first)."""
    dim = int(round(np.sqrt(choi.shape[0])))
    k = dim.bit_length() - 1
    basis = pauli_basis(k)
    j = choi.reshape(dim, dim, dim, dim)  # [i, a, j, b] = <a|L(|i><j|)|b>
    # L(P_b) = sum_ij P_b[i, j] L(|i><j|)
    image = np.tensordot(basis, j, axes=([1, 2], [0, 2]))
    return _trace_against_basis(basis, image) / dim


def choi_from_ptm(r: np.ndarray) -> np.ndarray:
    k = (r.shape[0].bit_length() - 1) // 2
    dim = 1 << k
    basis = pauli_basis(k)
    # L(|i><j|) = sum_b (P_b[j, i] / dim) L(P_b),  L(P_b) = sum_a R[a, b] P_a
    images = np.einsum("ab,axy->bxy", r, basis)
    blocks = np.einsum("bji,bxy->ixjy", basis, images) / dim
    return blocks.reshape(dim * dim, dim * dim)


def infidelity(ptm: ChannelPTM) -> float:
    """Average gate infidelity ``1 - (tr R + d) / (d (d + 1))``."""
    d = 1 << ptm.n_qubits
    return float(1 - (np.trace(ptm.matrix) + d) / (d * (d + 1)))


def unitary_infidelity(u: np.ndarray) -> float:
    d = u.shape[0]
    return float(1 - (abs(np.trace(u)) ** 2 / d + 1) / (d + 1))


def pauli_error_probabilities(ptm: ChannelPTM) -> np.ndarray:
    """Probabilities ``p_P`` of a Pauli channel from its PTM diagonal."""
    f = np.diag(ptm.matrix)
    k = ptm.n_qubits
    return commutation_signs(k) @ f / 4 ** k


def pauli_channel_ptm(probs: np.ndarray) -> ChannelPTM:
    k = (len(probs).bit_length() - 1) // 2
    return ChannelPTM(np.diag(commutation_signs(k) @ probs))


# --------------------------------------------------------------------------
# noise models


@dataclass(frozen=True)
class OverRotation:
    epsilon: float
    kind = "over_rotation"
    target = "two_qubit_gates"


@dataclass(frozen=True)
class XIRotation:
    phi: float
    kind = "xi_rotation"
    target = "two_qubit_gates"


@dataclass(frozen=True)
class IZRotation:
    phi: float
    kind = "iz_rotation"
    target = "two_qubit_gates"


@dataclass(frozen=True)
class RingCrosstalk:
    phi: float
    kind = "crosstalk"
    target = "two_qubit_gates"


@dataclass(frozen=True)
class Relaxation:
    t1: float
    t2: float
    p: float
    t: float
    kind = "relaxation"
    target = "two_qubit_gates"

    def __post_init__(self):
        if not (self.t1 > 0 and self.t2 > 0):
            raise ValueError("T1 and T2 must be positive")
        if self.t2 > 2 * self.t1:
            raise ValueError("T2 must not exceed 2*T1")
        if not 0 <= self.p <= 1:
            raise ValueError("p must lie in [0, 1]")
        if self.t <= 0:
            raise ValueError("gate time must be positive")


@dataclass(frozen=True)
class SingleQubitCrosstalk:
    phi: float
    kind = "single_qubit_crosstalk"
    target = "single_qubit_gates"


NoiseSpec = Union[OverRotation, XIRotation, IZRotation, RingCrosstalk, Relaxation, SingleQubitCrosstalk]
COHERENT = (OverRotation, XIRotation, IZRotation, RingCrosstalk, SingleQubitCrosstalk)
_KINDS = {cls.kind: cls for cls in (OverRotation, XIRotation, IZRotation, RingCrosstalk,
                                    Relaxation, SingleQubitCrosstalk)}


def noise_from_json(obj: dict) -> NoiseSpec:
    obj = dict(obj)
    cls = _KINDS.get(obj.pop("model", None))
    if cls is None:
        raise ValueError(f"unknown noise model in {obj!r}; known: {sorted(_KINDS)}")
    if "phi_deg" in obj:
        obj["phi"] = np.deg2rad(obj.pop("phi_deg"))
    return cls(**obj)


def noise_to_json(spec: NoiseSpec) -> dict:
    out = {"model": spec.kind}
    out.update({k: float(v) for k, v in spec.__dict__.items()})
    return out


def fractional_cnot(epsilon: float) -> np.ndarray:
    """``CNOT**epsilon`` on the principal branch, ``exp(i pi eps |1-><1-|)``."""
    minus = np.array([1, -1]) / np.sqrt(2)
    proj = np.kron(np.diag([0, 1]), np.outer(minus, minus)).astype(complex)
    return np.eye(4, dtype=complex) + (np.exp(1j * np.pi * epsilon) - 1) * proj


def zz_rotation(phi: float) -> np.ndarray:
    """``exp(-i (phi/2) Z (x) Z)``."""
    return np.diag(np.exp(-0.5j * phi * np.array([1, -1, -1, 1])))


def ring_neighbors(q: int, n: int) -> tuple[int, ...]:
    if n < 2:
        return ()
    return tuple(sorted({(q - 1) % n, (q + 1) % n} - {q}))


def crosstalk_pairs(c: int, t: int, n: int) -> list[tuple[int, int]]:
    pairs = []
    for q in (c, t):
        for nb in ring_neighbors(q, n):
            if nb not in (c, t):
                pairs.append((q, nb))
    return pairs


def noise_unitary(spec: NoiseSpec, cnot: tuple[int, int], n_qubits: int) -> tuple[tuple[int, ...], np.ndarray, str]:
    """``(qubits, unitary, placement)`` for a coherent model dressing one CNOT."""
    c, t = cnot
    if isinstance(spec, OverRotation):
        return (c, t), fractional_cnot(spec.epsilon), "post"
    if isinstance(spec, XIRotation):
        return (c,), rotation("rx", spec.phi), "pre"
    if isinstance(spec, IZRotation):
        return (t,), rotation("rz", spec.phi), "pre"
    if isinstance(spec, RingCrosstalk):
        pairs = crosstalk_pairs(c, t, n_qubits)
        support = tuple(sorted({q for p in pairs for q in p} | {c, t}))
        dim = 1 << len(support)
        u = np.eye(dim, dtype=complex).reshape((2,) * len(support) + (dim,))
        for a, b in pairs:
            u = apply_unitary(u, zz_rotation(spec.phi), (support.index(a), support.index(b)))
        return support, u.reshape(dim, dim), "post"
    raise ModeError(f"{type(spec).__name__} is not a coherent CNOT noise model")


def relaxation_choi(spec: Relaxation) -> np.ndarray:
    """Choi matrix of generalized amplitude damping with pure dephasing."""
    e1 = np.exp(-spec.t / spec.t1)
    e2 = np.exp(-spec.t / spec.t2)
    p, a = spec.p, 1 - e1
    choi = np.diag([1 - p * a, p * a, (1 - p) * a, 1 - (1 - p) * a]).astype(complex)
    choi[0, 3] = choi[3, 0] = e2
    return choi


def relaxation_channel(spec: Relaxation) -> ChannelPTM:
    ptm = ChannelPTM.from_choi(relaxation_choi(spec))
    if not ptm.is_cptp():
        raise ValueError(f"relaxation parameters {spec} do not give a CPTP map")
    return ptm


@dataclass(frozen=True, eq=False)
class NoiseOp:
    """One noise attachment: a unitary or a PTM on ``qubits``."""

    qubits: tuple[int, ...]
    unitary: np.ndarray | None = None
    ptm: np.ndarray | None = None
    label: str = ""

    @property
    def is_unitary(self) -> bool:
        return self.unitary is not None

    def as_ptm(self) -> np.ndarray:
        return self._ptm

    @cached_property
    def _ptm(self) -> np.ndarray:
        return self.ptm if self.ptm is not None else ptm_from_kraus([self.unitary])


@dataclass(frozen=True, eq=False)
class HardNoise:
    pre: tuple[NoiseOp, ...] = ()
    post: tuple[NoiseOp, ...] = ()


def cnot_noise(models: Sequence[NoiseSpec], cnot: tuple[int, int], n_qubits: int) -> HardNoise:
    pre, post = [], []
    for spec in models:
        if spec.target != "two_qubit_gates":
            continue
        if isinstance(spec, Relaxation):
            r = relaxation_channel(spec).matrix
            post += [NoiseOp((q,), ptm=r, label=spec.kind) for q in cnot]
            continue
        qubits, u, where = noise_unitary(spec, cnot, n_qubits)
        (pre if where == "pre" else post).append(NoiseOp(qubits, unitary=u, label=spec.kind))
    return HardNoise(tuple(pre), tuple(post))


def easy_noise(models: Sequence[NoiseSpec], n_qubits: int) -> tuple[NoiseOp, ...]:
    ops = []
    for spec in models:
        if isinstance(spec, SingleQubitCrosstalk) and n_qubits >= 2:
            edges = [(q, (q + 1) % n_qubits) for q in range(n_qubits if n_qubits > 2 else 1)]
            ops += [NoiseOp(e, unitary=zz_rotation(spec.phi), label=spec.kind) for e in edges]
    return tuple(ops)


@dataclass(frozen=True, eq=False)
class NoisyCircuit:
    circuit: Circuit
    hard: tuple[HardNoise, ...]
    easy: tuple[tuple[NoiseOp, ...], ...]

    def __post_init__(self):
        if len(self.hard) != self.circuit.n_hard or len(self.easy) != len(self.circuit.easy_cycles):
            raise ValueError("attachment count does not match cycle count")

    @property
    def n_qubits(self) -> int:
        return self.circuit.n_qubits

    def ops(self):
        for h in self.hard:
            yield from h.pre
            yield from h.post
        for e in self.easy:
            yield from e

    @property
    def is_unitary(self) -> bool:
        return all(op.is_unitary for op in self.ops())

    def map_ops(self, fn) -> "NoisyCircuit":
        hard = tuple(HardNoise(tuple(map(fn, h.pre)), tuple(map(fn, h.post))) for h in self.hard)
        easy = tuple(tuple(map(fn, e)) for e in self.easy)
        return NoisyCircuit(self.circuit, hard, easy)


def attach_noise(circuit: Circuit, models: Sequence[NoiseSpec] | NoiseSpec | None) -> NoisyCircuit:
    if models is None:
        models = ()
    elif not isinstance(models, (list, tuple)):
        models = (models,)
    n = circuit.n_qubits
    hard = []
    for cyc in circuit.hard_cycles:
        pre, post = [], []
        for cnot in cyc.cnots:
            hn = cnot_noise(models, cnot, n)
            pre += hn.pre
            post += hn.post
        hard.append(HardNoise(tuple(pre), tuple(post)))
    en = easy_noise(models, n)
    easy = tuple(en for _ in circuit.easy_cycles)
    return NoisyCircuit(circuit, tuple(hard), easy)


# --------------------------------------------------------------------------
# reference simulator


def simulate(nc: NoisyCircuit, state: DenseState) -> DenseState:
    """Apply every cycle and attachment in order.

    Unitary attachments with a statevector input stay on the statevector
    path; anything else runs on density matrices (via PTM vectors).
    """
    circ = nc.circuit
    if circ.is_parameterized:
        raise ValueError("bind the circuit before simulating")
    n = circ.n_qubits
    if state.n_qubits != n:
        raise ValueError(f"state has {state.n_qubits} qubits, circuit {n}")
    if state.kind == "statevector" and nc.is_unitary:
        psi = state.data.reshape((2,) * n)
        for k, cyc in enumerate(circ.cycles):
            if isinstance(cyc, EasyCycle):
                for q in sorted(cyc.gates):
                    psi = apply_unitary(psi, cyc.qubit_matrix(q), (q,))
                for op in nc.easy[k // 2]:
                    psi = apply_unitary(psi, op.unitary, op.qubits)
            else:
                hn = nc.hard[k // 2]
                for op in hn.pre:
                    psi = apply_unitary(psi, op.unitary, op.qubits)
                for c, t in cyc.cnots:
                    psi = apply_unitary(psi, CNOT, (c, t))
                for op in hn.post:
                    psi = apply_unitary(psi, op.unitary, op.qubits)
        return DenseState("statevector", psi.reshape(-1))
    rho = state.to_density().data
    v = density_to_ptm_vector(rho)
    cnot_ptm = ptm_from_kraus([CNOT])
    for k, cyc in enumerate(circ.cycles):
        if isinstance(cyc, EasyCycle):
            for q in sorted(cyc.gates):
                v = apply_ptm(v, ptm_from_kraus([cyc.qubit_matrix(q)]), (q,))
            for op in nc.easy[k // 2]:
                v = apply_ptm(v, op.as_ptm(), op.qubits)
        else:
            hn = nc.hard[k // 2]
            for op in hn.pre:
                v = apply_ptm(v, op.as_ptm(), op.qubits)
            for c, t in cyc.cnots:
                v = apply_ptm(v, cnot_ptm, (c, t))
            for op in hn.post:
                v = apply_ptm(v, op.as_ptm(), op.qubits)
    return DenseState("density_matrix", ptm_vector_to_density(v))


# --------------------------------------------------------------------------
# sampling


def sample_from_expectations(paulis: Sequence[PauliString], coeffs: Sequence[complex],
                             values: np.ndarray, shots_per_term: int,
                             rng: np.random.Generator) -> float:
    """Finite-shot estimate of ``sum_j a_j <P_j>`` given exact ``<P_j>``."""
    if shots_per_term < 1:
        raise ValueError("shots_per_term must be positive")
    total = 0.0
    for p, a, e in zip(paulis, coeffs, values):
        a = complex(a).real
        if p.is_identity():
            total += a
            continue
        e = float(np.real(e))
        if abs(e) > 1 + 1e-9:
            raise NumericalIntegrityError(f"<{p}> = {e!r} outside [-1, 1]")
        prob = min(max((1 + e) / 2, 0.0), 1.0)
        plus = rng.binomial(shots_per_term, prob)
        total += a * (2 * plus - shots_per_term) / shots_per_term
    return total


def sample_expectation(state: DenseState, obs: PauliSum, shots_per_term: int,
                       rng: np.random.Generator | int) -> float:
    if not obs.is_hermitian():
        raise ValueError("observable is not Hermitian")
    if not isinstance(rng, np.random.Generator):
        rng = np.random.default_rng(rng)
    paulis = [p for p, _ in obs.sorted_items()]
    coeffs = [obs[p] for p in paulis]
    vals = pauli_expectations(state, paulis)
    return sample_from_expectations(paulis, coeffs, vals, shots_per_term, rng)


def exact_energy(state: DenseState, obs: PauliSum) -> float:
    return expectation(state, obs)


# --------------------------------------------------------------------------
# calibration


def error_channel(models: Sequence[NoiseSpec] | NoiseSpec, n_qubits: int = 4,
                  cnot: tuple[int, int] = (0, 1), support: Sequence[int] = ()) -> tuple[tuple[int, ...], np.ndarray]:
    """``(support, PTM)`` of the error attached to one CNOT, in the frame before the gate.

    Easy-cycle and pre-gate errors are taken as they are; post-gate errors are
    conjugated back through the ideal CNOT, so the noisy gate equals the ideal
    one preceded by this channel.  The support is the union of the
    attachments' qubits, the CNOT's qubits when a post-gate error is present,
    and any extra ``support``.
    """
    if not isinstance(models, (list, tuple)):
        models = (models,)
    hn = cnot_noise(models, cnot, n_qubits)
    ops = list(easy_noise(models, n_qubits)) + list(hn.pre)
    qubits = set(support).union(*(op.qubits for op in ops + list(hn.post)))
    if hn.post or not qubits:
        qubits |= set(cnot)
    sup = tuple(sorted(qubits))
    k = len(sup)
    dim = 4 ** k
    r = np.eye(dim).reshape((4,) * k + (dim,))
    for op in ops:
        r = apply_ptm(r, op.as_ptm(), tuple(sup.index(q) for q in op.qubits))
    if hn.post:
        cnot_ptm = ptm_from_kraus([CNOT])
        local = tuple(sup.index(q) for q in cnot)
        r = apply_ptm(r, cnot_ptm, local)
        for op in hn.post:
            r = apply_ptm(r, op.as_ptm(), tuple(sup.index(q) for q in op.qubits))
        r = apply_ptm(r, cnot_ptm, local)
    return sup, r.reshape(dim, dim)


def noise_infidelity(models: Sequence[NoiseSpec] | NoiseSpec, n_qubits: int = 4,
                     cnot: tuple[int, int] = (0, 1), support: Sequence[int] = ()) -> float:
    """Average infidelity of the noisy CNOT against the ideal one.

    Computed on the CNOT's qubits plus every qubit touched by the
    attachments (and any extra ``support``).
    """
    _, r = error_channel(models, n_qubits, cnot, tuple(cnot) + tuple(support))
    return infidelity(ChannelPTM(r))


def calibrate_strength(factory, target: float, hi: float, n_qubits: int = 4, tol: float = 1e-14,
                       max_iter: int = 200, support: Sequence[int] = ()) -> float:
    """Bisection for ``s`` in ``[0, hi]`` with ``noise_infidelity(factory(s)) == target``.

    The infidelity must increase monotonically on the bracket.
    """
    f = lambda s: noise_infidelity(factory(s), n_qubits, support=support) - target
    lo = 0.0
    if f(hi) < 0:
        raise ValueError(f"target infidelity {target} not reached at strength {hi}")
    for _ in range(max_iter):
        mid = 0.5 * (lo + hi)
        if f(mid) < 0:
            lo = mid
        else:
            hi = mid
        if hi - lo < tol:
            break
    return 0.5 * (lo + hi)


# strength factories and brackets used by calibration; relaxation scans the gate time
CALIBRATION = {
    "over_rotation": (lambda s: OverRotation(s), 1.0),
    "xi_rotation": (lambda s: XIRotation(s), np.pi),
    "iz_rotation": (lambda s: IZRotation(s), np.pi),
    "crosstalk": (lambda s: RingCrosstalk(s), np.pi / 2),
    "single_qubit_crosstalk": (lambda s: SingleQubitCrosstalk(s), np.pi / 2),
    "relaxation": (lambda s: Relaxation(10.0, 1.73, 0.0, max(s, 1e-300)), 1.0),
}


def calibrated(kind: str, target: float = 1e-3, n_qubits: int = 4, support: Sequence[int] = ()) -> NoiseSpec:
    """Noise model of the given kind whose per-gate infidelity equals ``target``."""
    if kind not in CALIBRATION:
        raise ValueError(f"unknown noise model {kind!r}; known: {sorted(CALIBRATION)}")
    return _calibrated(kind, float(target), int(n_qubits), tuple(sorted(support)))


@lru_cache(maxsize=None)
def _calibrated(kind: str, target: float, n_qubits: int, support: tuple[int, ...]) -> NoiseSpec:
    factory, hi = CALIBRATION[kind]
    return factory(calibrate_strength(factory, target, hi, n_qubits, support=support))


def mixed_noise(coherent_fraction: float, total: float = 1e-3, coherent: str = "crosstalk",
                n_qubits: int = 4) -> tuple[NoiseSpec, ...]:
    """Relaxation plus a coherent model, splitting ``total`` infidelity by ``coherent_fraction``.

    Both parts are calibrated on the support of the coherent model so that
    their infidelities refer to the same dimension.
    """
    factory, hi = CALIBRATION[coherent]
    hn = cnot_noise((factory(0.5 * hi),), (0, 1), n_qubits)
    support = tuple(sorted({0, 1}.union(*(op.qubits for op in hn.pre + hn.post))))
    out = []
    if coherent_fraction < 1:
        out.append(calibrated("relaxation", total * (1 - coherent_fraction), n_qubits, support))
    if coherent_fraction > 0:
        out.append(calibrated(coherent, total * coherent_fraction, n_qubits, support))
    return tuple(out)
