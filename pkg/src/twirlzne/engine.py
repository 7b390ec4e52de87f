"""Repeated evaluation of one noisy circuit template.

:class:`CompiledCircuit` walks a :class:`~twirlzne.noisesim.NoisyCircuit`
once, turns every θ-independent run of operations into a single dense
operator (when the dimension is small enough), and keeps only the
parameterized rotations for per-call work.  Finite randomized compiling is
handled by carrying a batch of states, one column per dressing, and applying
each column's random Pauli frame around every hard cycle.
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import Sequence

import numpy as np
import scipy.sparse as sp

from .circuit import CNOT, EasyCycle, ParamGate
from .noisesim import NoisyCircuit, apply_ptm, apply_unitary, ptm_from_kraus
from .pauli import PauliString, PauliSum, _PHASES, _popcount, _z_signs

FUSE_LIMIT = 256


def _parity_table(n_bits: int) -> np.ndarray:
    table = np.zeros(1 << n_bits, dtype=np.int8)
    for b in range(n_bits):
        table ^= ((np.arange(1 << n_bits) >> b) & 1).astype(np.int8)
    return table


def sample_twirls(rng: np.random.Generator, n_hard: int, n_qubits: int, batch: int = 1):
    """Uniform Pauli frames ``(x, z)`` bitmasks, each of shape ``(batch, n_hard)``."""
    x = rng.integers(0, 1 << n_qubits, size=(batch, n_hard))
    z = rng.integers(0, 1 << n_qubits, size=(batch, n_hard))
    return x, z


def conjugate_through_cnots(x, z, cnots, n_qubits):
    """Masks of ``D T D^+`` for ``T = X^x Z^z`` and ``D`` a layer of CNOTs."""
    x = np.array(x, copy=True)
    z = np.array(z, copy=True)
    for c, t in cnots:
        bc, bt = 1 << (n_qubits - 1 - c), 1 << (n_qubits - 1 - t)
        x = x ^ np.where(x & bc, bt, 0)
        z = z ^ np.where(z & bt, bc, 0)
    return x, z


@dataclass
class _Local:
    qubits: tuple[int, ...]
    matrix: np.ndarray


@dataclass
class _Full:
    matrix: np.ndarray


@dataclass
class _Param:
    qubit: int
    gates: tuple


@dataclass
class _Frame:
    hard_index: int
    after: bool


class CompiledCircuit:
    """Evaluate ``nc`` (a possibly parameterized noisy circuit) many times.

    ``mode`` is ``"statevector"`` (unitary attachments only) or ``"ptm"``.
    With ``dressed=True`` the caller supplies Pauli frames per call.
    """

    def __init__(self, nc: NoisyCircuit, mode: str, dressed: bool = False, fuse: bool | None = None):
        if mode not in ("statevector", "ptm"):
            raise ValueError(f"unknown mode {mode!r}")
        if mode == "statevector" and not nc.is_unitary:
            raise ValueError("statevector mode needs unitary attachments")
        self.nc = nc
        self.mode = mode
        self.dressed = dressed
        self.n = nc.n_qubits
        self.d = 2 if mode == "statevector" else 4
        self.dim = self.d ** self.n
        self.circuit = nc.circuit
        self.n_hard = nc.circuit.n_hard
        if fuse is None:
            fuse = self.dim <= FUSE_LIMIT
        self._cnot_op = CNOT if mode == "statevector" else ptm_from_kraus([CNOT])
        raw = self._raw_steps()
        self.steps = self._fuse(raw) if fuse else raw
        self._frames_after = [
            tuple(cyc.cnots) for cyc in nc.circuit.hard_cycles
        ]
        if mode == "ptm" and dressed:
            self._basis_x, self._basis_z = _ptm_basis_masks(self.n)
        self._parity = _parity_table(self.n)
        self._j = np.arange(1 << self.n)

    # -- construction --------------------------------------------------

    def _gate_op(self, u):
        return u if self.mode == "statevector" else ptm_from_kraus([u])

    def _noise_op(self, op):
        return op.unitary if self.mode == "statevector" else op.as_ptm()

    def _raw_steps(self):
        steps = []
        nc = self.nc
        for k, cyc in enumerate(nc.circuit.cycles):
            if isinstance(cyc, EasyCycle):
                for q in sorted(cyc.gates):
                    seq = cyc.gates[q]
                    if any(isinstance(g, ParamGate) for g in seq):
                        steps.append(_Param(q, tuple(seq)))
                    else:
                        steps.append(_Local((q,), self._gate_op(cyc.qubit_matrix(q))))
                # the frame is compiled into the easy cycle, so it precedes that cycle's noise
                if self.dressed and k // 2 < self.n_hard:
                    steps.append(_Frame(k // 2, after=False))
                for op in nc.easy[k // 2]:
                    steps.append(_Local(op.qubits, self._noise_op(op)))
            else:
                h = k // 2
                hn = nc.hard[h]
                for op in hn.pre:
                    steps.append(_Local(op.qubits, self._noise_op(op)))
                for c, t in cyc.cnots:
                    steps.append(_Local((c, t), self._cnot_op))
                for op in hn.post:
                    steps.append(_Local(op.qubits, self._noise_op(op)))
                if self.dressed:
                    steps.append(_Frame(h, after=True))
        return steps

    def _fuse(self, raw):
        out = []
        block = None
        for s in raw:
            if isinstance(s, _Local):
                if block is None:
                    block = self._identity_tensor()
                block = self._apply_local(block, s.matrix, s.qubits)
            else:
                if block is not None:
                    out.append(_Full(block.reshape(self.dim, self.dim)))
                    block = None
                out.append(s)
        if block is not None:
            out.append(_Full(block.reshape(self.dim, self.dim)))
        return out

    def _identity_tensor(self):
        dtype = complex if self.mode == "statevector" else float
        return np.eye(self.dim, dtype=dtype).reshape((self.d,) * self.n + (self.dim,))

    def _apply_local(self, tensor, m, qubits):
        if self.mode == "statevector":
            return apply_unitary(tensor, m, qubits)
        return apply_ptm(tensor, m, qubits)

    # -- execution -----------------------------------------------------

    def run(self, theta: Sequence[float] | None, init: np.ndarray, frames=None) -> np.ndarray:
        """Propagate ``init`` (flat vector); returns ``(dim, batch)``.

        ``frames`` is the ``(x, z)`` pair from :func:`sample_twirls` when the
        circuit was compiled with ``dressed=True``.
        """
        if self.dressed and frames is None:
            raise ValueError("dressed circuit needs Pauli frames")
        batch = 1 if frames is None else frames[0].shape[0]
        state = np.repeat(np.asarray(init).reshape(self.dim, 1), batch, axis=1)
        if self.mode == "statevector":
            state = state.astype(complex)
        post_frames = None
        if frames is not None:
            post_frames = [conjugate_through_cnots(frames[0][:, h], frames[1][:, h], self._frames_after[h], self.n)
                           for h in range(self.n_hard)]
        shape = (self.d,) * self.n + (batch,)
        for s in self.steps:
            if isinstance(s, _Full):
                state = s.matrix @ state
            elif isinstance(s, _Param):
                u = np.eye(2, dtype=complex)
                for g in s.gates:
                    g = g.bind(theta) if isinstance(g, ParamGate) else g
                    u = g.matrix() @ u
                state = self._apply_local(state.reshape(shape), self._gate_op(u), (s.qubit,)).reshape(self.dim, batch)
            elif isinstance(s, _Local):
                state = self._apply_local(state.reshape(shape), s.matrix, s.qubits).reshape(self.dim, batch)
            else:
                if s.after:
                    x, z = post_frames[s.hard_index]
                else:
                    x, z = frames[0][:, s.hard_index], frames[1][:, s.hard_index]
                state = self._apply_frame(state, x, z)
        return state

    def _apply_frame(self, state, x, z):
        par = self._parity
        if self.mode == "statevector":
            idx = self._j[:, None] ^ x[None, :]
            sign = 1 - 2 * par[z[None, :] & idx].astype(np.int64)
            return sign * np.take_along_axis(state, idx, axis=0)
        # Pauli conjugation flips the sign of every anticommuting basis element
        anti = par[x[None, :] & self._basis_z[:, None]] ^ par[z[None, :] & self._basis_x[:, None]]
        return state * (1 - 2 * anti.astype(np.int64))


def _ptm_basis_masks(n: int):
    a = np.arange(4 ** n)
    x = np.zeros_like(a)
    z = np.zeros_like(a)
    for q in range(n):
        digit = (a >> (2 * (n - 1 - q))) & 3
        bit = 1 << (n - 1 - q)
        x |= np.where((digit == 1) | (digit == 2), bit, 0)
        z |= np.where((digit == 2) | (digit == 3), bit, 0)
    return x, z


class TermTable:
    """Pauli terms of an observable prepared for batched expectation values."""

    def __init__(self, obs: PauliSum):
        self.obs = obs
        self.n = obs.n_qubits
        items = obs.sorted_items()
        self.paulis = [p for p, _ in items]
        self.coeffs = np.array([c.real for _, c in items])
        if not obs.is_hermitian():
            raise ValueError("observable is not Hermitian")
        dim = 1 << self.n
        j = np.arange(dim)
        self._idx = np.array([j ^ p.x for p in self.paulis])
        self._sv_weight = np.array([_PHASES[_popcount(p.x & p.z) % 4] * _z_signs(p.z, dim) for p in self.paulis])
        from .noisesim import pauli_index

        self._ptm_idx = np.array([pauli_index(p) for p in self.paulis])
        rows, cols, vals = [], [], []
        for p, c in zip(self.paulis, self.coeffs):
            rows.append(j ^ p.x)
            cols.append(j)
            vals.append(c * _PHASES[_popcount(p.x & p.z) % 4] * _z_signs(p.z, dim))
        self.sparse = sp.csr_matrix((np.concatenate(vals), (np.concatenate(rows), np.concatenate(cols))),
                                    shape=(dim, dim))

    def term_values(self, state: np.ndarray, mode: str) -> np.ndarray:
        """``(n_terms, batch)`` real expectation values."""
        if mode == "ptm":
            return state[self._ptm_idx]
        # <psi|P|psi> = sum_j conj(psi[j ^ x]) w[j] psi[j]
        vals = np.einsum("tjb,tj,jb->tb", np.conj(state[self._idx]), self._sv_weight, state)
        return vals.real

    def energies(self, state: np.ndarray, mode: str) -> np.ndarray:
        if mode == "ptm":
            return self.coeffs @ state[self._ptm_idx]
        return np.real(np.sum(np.conj(state) * (self.sparse @ state), axis=0))
