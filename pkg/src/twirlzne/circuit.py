"""Cycle-structured circuits: easy cycles of single-qubit gates alternating
with hard cycles of CNOTs.

An easy cycle maps each qubit to the sequence of gates it receives in that
cycle.  A :class:`ParamGate` rotation angle is a linear form in the circuit
parameters, so templates stay symbolic until :meth:`Circuit.bind`.
"""

from __future__ import annotations

import json
from dataclasses import dataclass, field
from typing import Sequence, Union

import numpy as np

_SQ2 = 1 / np.sqrt(2)
FIXED = {
    "i": np.eye(2, dtype=complex),
    "x": np.array([[0, 1], [1, 0]], dtype=complex),
    "y": np.array([[0, -1j], [1j, 0]], dtype=complex),
    "z": np.array([[1, 0], [0, -1]], dtype=complex),
    "h": np.array([[_SQ2, _SQ2], [_SQ2, -_SQ2]], dtype=complex),
    "s": np.array([[1, 0], [0, 1j]], dtype=complex),
    "sdg": np.array([[1, 0], [0, -1j]], dtype=complex),
}
ROTATIONS = ("rx", "ry", "rz")
CNOT = np.array([[1, 0, 0, 0], [0, 1, 0, 0], [0, 0, 0, 1], [0, 0, 1, 0]], dtype=complex)


def rotation(axis: str, angle: float) -> np.ndarray:
    c, s = np.cos(angle / 2), np.sin(angle / 2)
    if axis == "rx":
        return np.array([[c, -1j * s], [-1j * s, c]])
    if axis == "ry":
        return np.array([[c, -s], [s, c]], dtype=complex)
    if axis == "rz":
        return np.array([[np.exp(-0.5j * angle), 0], [0, np.exp(0.5j * angle)]])
    raise ValueError(f"unknown rotation {axis!r}")


def u3(theta: float, phi: float, lam: float) -> np.ndarray:
    c, s = np.cos(theta / 2), np.sin(theta / 2)
    return np.array([[c, -np.exp(1j * lam) * s],
                     [np.exp(1j * phi) * s, np.exp(1j * (phi + lam)) * c]])


def u3_angles(m: np.ndarray) -> tuple[float, float, float]:
    """ZYZ angles reproducing a 2x2 unitary up to global phase."""
    m = m / np.sqrt(np.linalg.det(m))
    theta = 2 * np.arctan2(abs(m[1, 0]), abs(m[0, 0]))
    sum_ = 2 * np.angle(m[1, 1]) if abs(m[1, 1]) > 1e-12 else 0.0
    diff = 2 * np.angle(m[1, 0]) if abs(m[1, 0]) > 1e-12 else 0.0
    phi = (sum_ + diff) / 2
    lam = (sum_ - diff) / 2
    return float(theta), float(phi), float(lam)


@dataclass(frozen=True)
class Gate:
    name: str
    params: tuple[float, ...] = ()

    def __post_init__(self):
        arity = 0 if self.name in FIXED else 1 if self.name in ROTATIONS else 3 if self.name == "u3" else None
        if arity is None:
            raise ValueError(f"unknown gate {self.name!r}")
        if len(self.params) != arity:
            raise ValueError(f"gate {self.name!r} takes {arity} parameters")

    def matrix(self) -> np.ndarray:
        if self.name in FIXED:
            return FIXED[self.name]
        if self.name == "u3":
            return u3(*self.params)
        return rotation(self.name, self.params[0])

    def to_json(self) -> list:
        return [self.name, *self.params]


@dataclass(frozen=True)
class ParamGate:
    """Rotation whose angle is ``offset + sum_i weights[i] * theta[i]``."""

    name: str
    weights: tuple[float, ...]
    offset: float = 0.0

    def __post_init__(self):
        if self.name not in ROTATIONS:
            raise ValueError(f"parameterized gate must be a rotation, got {self.name!r}")

    def angle(self, theta: Sequence[float]) -> float:
        return self.offset + float(np.dot(self.weights, theta))

    def bind(self, theta: Sequence[float]) -> Gate:
        return Gate(self.name, (self.angle(theta),))

    def to_json(self) -> list:
        return [self.name, {"weights": list(self.weights), "offset": self.offset}]


AnyGate = Union[Gate, ParamGate]


def gate_from_json(obj) -> AnyGate:
    name, *rest = obj
    if rest and isinstance(rest[0], dict):
        return ParamGate(name, tuple(float(w) for w in rest[0]["weights"]), float(rest[0].get("offset", 0.0)))
    return Gate(name, tuple(float(v) for v in rest))


@dataclass(frozen=True)
class EasyCycle:
    gates: dict[int, tuple[AnyGate, ...]] = field(default_factory=dict)

    @property
    def is_parameterized(self) -> bool:
        return any(isinstance(g, ParamGate) for seq in self.gates.values() for g in seq)

    def qubit_matrix(self, q: int, theta: Sequence[float] | None = None) -> np.ndarray:
        m = np.eye(2, dtype=complex)
        for g in self.gates.get(q, ()):
            if isinstance(g, ParamGate):
                if theta is None:
                    raise ValueError("unbound parameterized gate")
                g = g.bind(theta)
            m = g.matrix() @ m
        return m

    def merged(self, other: "EasyCycle") -> "EasyCycle":
        out = {q: tuple(seq) for q, seq in self.gates.items()}
        for q, seq in other.gates.items():
            out[q] = out.get(q, ()) + tuple(seq)
        return EasyCycle(out)

    def bind(self, theta: Sequence[float]) -> "EasyCycle":
        return EasyCycle({q: tuple(g.bind(theta) if isinstance(g, ParamGate) else g for g in seq)
                          for q, seq in self.gates.items()})

    def to_json(self) -> dict:
        return {"easy": {str(q): [g.to_json() for g in seq] for q, seq in sorted(self.gates.items())}}


@dataclass(frozen=True)
class HardCycle:
    cnots: tuple[tuple[int, int], ...]

    def __post_init__(self):
        used = [q for pair in self.cnots for q in pair]
        if len(used) != len(set(used)):
            raise ValueError(f"CNOTs in a hard cycle must act on disjoint qubits: {self.cnots}")
        if any(c == t for c, t in self.cnots):
            raise ValueError("CNOT control equals target")

    @property
    def qubits(self) -> tuple[int, ...]:
        return tuple(q for pair in self.cnots for q in pair)

    def to_json(self) -> dict:
        return {"hard": [list(p) for p in self.cnots]}


Cycle = Union[EasyCycle, HardCycle]


@dataclass(frozen=True)
class Circuit:
    """Strictly alternating ``E H E H ... E`` cycle list.

    A circuit with ``n_params > 0`` is a template; :meth:`bind` makes it
    concrete.
    """

    n_qubits: int
    cycles: tuple[Cycle, ...]
    n_params: int = 0

    def __post_init__(self):
        if not self.cycles or len(self.cycles) % 2 == 0:
            raise ValueError("cycle list must have odd length, starting and ending with easy cycles")
        for k, cyc in enumerate(self.cycles):
            want = EasyCycle if k % 2 == 0 else HardCycle
            if not isinstance(cyc, want):
                raise ValueError(f"cycle {k} should be {want.__name__}")
            qubits = cyc.gates if isinstance(cyc, EasyCycle) else cyc.qubits
            if any(not 0 <= q < self.n_qubits for q in qubits):
                raise ValueError(f"cycle {k} touches a qubit outside 0..{self.n_qubits - 1}")
            if isinstance(cyc, EasyCycle):
                for seq in cyc.gates.values():
                    for g in seq:
                        if isinstance(g, ParamGate) and len(g.weights) != self.n_params:
                            raise ValueError("parameter weight length mismatch")

    @classmethod
    def empty(cls, n_qubits: int, n_params: int = 0) -> "Circuit":
        return cls(n_qubits, (EasyCycle(),), n_params)

    @property
    def easy_cycles(self) -> tuple[EasyCycle, ...]:
        return self.cycles[0::2]

    @property
    def hard_cycles(self) -> tuple[HardCycle, ...]:
        return self.cycles[1::2]

    @property
    def n_hard(self) -> int:
        return len(self.cycles) // 2

    @property
    def cnot_count(self) -> int:
        return sum(len(h.cnots) for h in self.hard_cycles)

    @property
    def is_parameterized(self) -> bool:
        return any(c.is_parameterized for c in self.easy_cycles)

    def then(self, other: "Circuit") -> "Circuit":
        if other.n_qubits != self.n_qubits or other.n_params != self.n_params:
            raise ValueError("cannot concatenate circuits of different shape")
        joined = self.cycles[-1].merged(other.cycles[0])
        return Circuit(self.n_qubits, self.cycles[:-1] + (joined,) + other.cycles[1:], self.n_params)

    def bind(self, theta: Sequence[float]) -> "Circuit":
        theta = np.asarray(theta, dtype=float)
        if theta.shape != (self.n_params,):
            raise ValueError(f"expected {self.n_params} parameters, got {theta.shape}")
        cycles = tuple(c.bind(theta) if isinstance(c, EasyCycle) else c for c in self.cycles)
        return Circuit(self.n_qubits, cycles, 0)

    def unitary(self, theta: Sequence[float] | None = None) -> np.ndarray:
        """Dense noiseless unitary (qubit 0 most significant)."""
        from .noisesim import apply_unitary

        dim = 1 << self.n_qubits
        u = np.eye(dim, dtype=complex).reshape((2,) * self.n_qubits + (dim,))
        for cyc in self.cycles:
            if isinstance(cyc, EasyCycle):
                for q in sorted(cyc.gates):
                    u = apply_unitary(u, cyc.qubit_matrix(q, theta), (q,))
            else:
                for c, t in cyc.cnots:
                    u = apply_unitary(u, CNOT, (c, t))
        return u.reshape(dim, dim)

    def to_json(self) -> dict:
        return {"n_qubits": self.n_qubits, "n_params": self.n_params,
                "cycles": [c.to_json() for c in self.cycles]}

    def dumps(self) -> str:
        return json.dumps(self.to_json())

    @classmethod
    def from_json(cls, obj: dict) -> "Circuit":
        cycles = []
        for c in obj["cycles"]:
            if "easy" in c:
                cycles.append(EasyCycle({int(q): tuple(gate_from_json(g) for g in seq)
                                         for q, seq in c["easy"].items()}))
            else:
                cycles.append(HardCycle(tuple((int(a), int(b)) for a, b in c["hard"])))
        return cls(int(obj["n_qubits"]), tuple(cycles), int(obj.get("n_params", 0)))

    @classmethod
    def loads(cls, text: str) -> "Circuit":
        return cls.from_json(json.loads(text))


CircuitTemplate = Circuit


def equal_up_to_phase(a: np.ndarray, b: np.ndarray, tol: float = 1e-12) -> bool:
    k = np.argmax(np.abs(b))
    flat_a, flat_b = a.ravel(), b.ravel()
    if abs(flat_b[k]) < tol:
        return np.allclose(a, b, atol=tol)
    phase = flat_a[k] / flat_b[k]
    if abs(abs(phase) - 1) > tol * 10:
        return False
    return bool(np.max(np.abs(a - phase * b)) < tol)
