"""Randomized compiling and zero-noise extrapolation.

Randomized compiling (RC) is available as explicit circuit dressing
(:func:`dress_circuit`), as a batched Pauli frame inside the compiled engine
(finite mode), or as the exact average over all frames (infinite mode), which
replaces the noise of every hard cycle by its Pauli-twirled PTM.

Zero-noise extrapolation (ZNE) repeats every hard cycle ``r`` times and fits a
polynomial in ``r`` through the measured energies.
"""

from __future__ import annotations

from dataclasses import asdict, dataclass, field
from functools import lru_cache
from typing import Sequence

import numpy as np

from .circuit import CNOT, Circuit, EasyCycle, Gate, HardCycle, ParamGate, u3_angles
from .engine import CompiledCircuit, TermTable, conjugate_through_cnots, sample_twirls
from .noisesim import (ChannelPTM, HardNoise, NoiseOp, NoiseSpec, NoisyCircuit, apply_ptm,
                       attach_noise, basis_state_ptm, cnot_noise, easy_noise, noise_to_json,
                       ptm_from_kraus)
from .pauli import NumericalIntegrityError, PauliString, PauliSum

# --------------------------------------------------------------------------
# configuration


@dataclass(frozen=True)
class RCConfig:
    """``mode`` is ``off``, ``finite`` (``n_rand`` dressings) or ``infinite``."""

    mode: str = "off"
    n_rand: int = 20
    stream: int = 0

    def __post_init__(self):
        if self.mode not in ("off", "finite", "infinite"):
            raise ValueError(f"unknown RC mode {self.mode!r}")
        if self.mode == "finite" and self.n_rand < 1:
            raise ValueError("finite RC needs n_rand >= 1")

    @classmethod
    def off(cls) -> "RCConfig":
        return cls("off")

    @classmethod
    def finite(cls, n_rand: int = 20, stream: int = 0) -> "RCConfig":
        return cls("finite", n_rand, stream)

    @classmethod
    def infinite(cls) -> "RCConfig":
        return cls("infinite")

    @property
    def enabled(self) -> bool:
        return self.mode != "off"


@dataclass(frozen=True)
class ZNEConfig:
    """Odd noise factors and the fit order (``none`` means plain r=1)."""

    factors: tuple[int, ...] = (1, 3)
    order: str = "linear"

    def __post_init__(self):
        f = tuple(int(r) for r in self.factors)
        object.__setattr__(self, "factors", f)
        if not f or any(r < 1 or r % 2 == 0 for r in f):
            raise ValueError(f"noise factors must be odd and >= 1, got {f}")
        if list(f) != sorted(set(f)):
            raise ValueError("noise factors must be distinct and ascending")
        need = {"none": 1, "linear": 2, "quadratic": 3}.get(self.order)
        if need is None:
            raise ValueError(f"unknown extrapolation order {self.order!r}")
        if len(f) < need:
            raise ValueError(f"{self.order} extrapolation needs at least {need} factors")
        if self.order == "none" and f != (1,):
            raise ValueError("ZNE off means factors (1,)")

    @classmethod
    def off(cls) -> "ZNEConfig":
        return cls((1,), "none")

    @property
    def enabled(self) -> bool:
        return self.order != "none"

    @property
    def degree(self) -> int:
        return {"none": 0, "linear": 1, "quadratic": 2}[self.order]


@dataclass(frozen=True)
class Measurement:
    """``exact`` expectation values or ``shots`` with a per-energy budget."""

    mode: str = "exact"
    budget: int = 0

    def __post_init__(self):
        if self.mode not in ("exact", "shots"):
            raise ValueError(f"unknown measurement mode {self.mode!r}")
        if self.mode == "shots" and self.budget < 1:
            raise ValueError("shot budget must be positive")

    @classmethod
    def exact(cls) -> "Measurement":
        return cls("exact")

    @classmethod
    def shots(cls, budget: int) -> "Measurement":
        return cls("shots", int(budget))


@dataclass(frozen=True)
class MitigationConfig:
    name: str
    rc: RCConfig = RCConfig()
    zne: ZNEConfig = field(default_factory=ZNEConfig.off)

    def to_json(self) -> dict:
        return {"name": self.name, "rc": asdict(self.rc),
                "zne": {"factors": list(self.zne.factors), "order": self.zne.order}}

    @classmethod
    def from_json(cls, obj: dict) -> "MitigationConfig":
        rc = RCConfig(**obj.get("rc", {}))
        z = obj.get("zne", {"factors": [1], "order": "none"})
        return cls(obj["name"], rc, ZNEConfig(tuple(z.get("factors", (1, 3))), z.get("order", "linear")))


def standard_configs(rc_mode: str = "infinite", n_rand: int = 20,
                     factors: Sequence[int] = (1, 3), order: str = "linear") -> list[MitigationConfig]:
    """The four side-by-side configurations: none, RC, ZNE, RC+ZNE."""
    rc = RCConfig(rc_mode, n_rand)
    zne = ZNEConfig(tuple(factors), order)
    return [
        MitigationConfig("none", RCConfig.off(), ZNEConfig.off()),
        MitigationConfig("rc", rc, ZNEConfig.off()),
        MitigationConfig("zne", RCConfig.off(), zne),
        MitigationConfig("rc+zne", rc, zne),
    ]


# --------------------------------------------------------------------------
# randomized compiling


_LETTER_GATE = {(0, 0): None, (1, 0): Gate("x"), (1, 1): Gate("y"), (0, 1): Gate("z")}


def _pauli_gates(x: int, z: int, n: int) -> dict[int, Gate]:
    out = {}
    for q in range(n):
        bit = 1 << (n - 1 - q)
        g = _LETTER_GATE[(int(bool(x & bit)), int(bool(z & bit)))]
        if g is not None:
            out[q] = g
    return out


def _check_clifford(c: Circuit) -> None:
    for cyc in c.hard_cycles:
        if not isinstance(cyc, HardCycle):
            raise ValueError("hard cycles must be CNOT layers")


def apply_dressing(c: Circuit, xs: Sequence[int], zs: Sequence[int], fuse: bool = True) -> Circuit:
    """Dress ``c`` with the Pauli frame ``T_k = X^xs[k] Z^zs[k]`` (up to phase) on hard cycle ``k``.

    ``T_k`` goes at the end of the easy cycle before hard cycle ``k`` and the
    correction ``D_k T_k D_k^+`` at the start of the easy cycle after it.
    With ``fuse`` each qubit's gates in a bound easy cycle become one ``u3``.
    """
    _check_clifford(c)
    n = c.n_qubits
    if len(xs) != c.n_hard or len(zs) != c.n_hard:
        raise ValueError("one Pauli frame per hard cycle is required")
    easy = [dict(e.gates) for e in c.easy_cycles]
    for k, hard in enumerate(c.hard_cycles):
        x2, z2 = conjugate_through_cnots(np.array([xs[k]]), np.array([zs[k]]), hard.cnots, n)
        for q, g in _pauli_gates(int(xs[k]), int(zs[k]), n).items():
            easy[k][q] = tuple(easy[k].get(q, ())) + (g,)
        for q, g in _pauli_gates(int(x2[0]), int(z2[0]), n).items():
            easy[k + 1][q] = (g,) + tuple(easy[k + 1].get(q, ()))
    cycles = []
    for k, cyc in enumerate(c.cycles):
        if k % 2:
            cycles.append(cyc)
            continue
        gates = easy[k // 2]
        if fuse:
            gates = {q: _fuse_sequence(seq) for q, seq in gates.items()}
            gates = {q: seq for q, seq in gates.items() if seq}
        cycles.append(EasyCycle(gates))
    return Circuit(n, tuple(cycles), c.n_params)


def _fuse_sequence(seq):
    if any(isinstance(g, ParamGate) for g in seq):
        return tuple(seq)
    m = np.eye(2, dtype=complex)
    for g in seq:
        m = g.matrix() @ m
    if abs(m[0, 1]) < 1e-14 and abs(m[1, 0]) < 1e-14 and abs(m[1, 1] / m[0, 0] - 1) < 1e-14:
        return ()
    return (Gate("u3", u3_angles(m)),)


def dress_circuit(c: Circuit, rng: np.random.Generator | int) -> Circuit:
    """Randomly dressed copy of ``c``, noiselessly equivalent up to global phase."""
    if not isinstance(rng, np.random.Generator):
        rng = np.random.default_rng(rng)
    x, z = sample_twirls(rng, c.n_hard, c.n_qubits)
    return apply_dressing(c, x[0], z[0])


def twirl_ptm(noise: ChannelPTM) -> ChannelPTM:
    """Average of ``P N P`` over the Pauli group of the channel's support.

    Each Pauli conjugation multiplies ``R[a, b]`` by ``s_a s_b`` (commutation
    signs), so the average keeps exactly the diagonal.
    """
    return ChannelPTM(np.diag(np.diag(noise.matrix)))


def twirl_ptm_bruteforce(noise: ChannelPTM) -> ChannelPTM:
    """Explicit average over all ``4**k`` conjugations (reference implementation)."""
    from .noisesim import pauli_basis

    k = noise.n_qubits
    acc = np.zeros_like(noise.matrix)
    for p in pauli_basis(k):
        rp = ptm_from_kraus([p])
        acc += rp @ noise.matrix @ rp
    return ChannelPTM(acc / 4 ** k)


def _embed_ptm(tensor_ops, support: tuple[int, ...]) -> np.ndarray:
    """Compose ``(qubits, ptm)`` ops (in order) into one PTM on ``support``."""
    k = len(support)
    dim = 4 ** k
    r = np.eye(dim).reshape((4,) * k + (dim,))
    for qubits, m in tensor_ops:
        r = apply_ptm(r, m, tuple(support.index(q) for q in qubits))
    return r.reshape(dim, dim)


@lru_cache(maxsize=None)
def twirled_cycle_noise(models: tuple[NoiseSpec, ...], cnots: tuple[tuple[int, int], ...],
                        n_qubits: int) -> tuple[tuple[int, ...], np.ndarray]:
    """Twirled effective noise of one (easy, hard) cycle pair, placed before the CNOTs.

    The noise ``post . D . pre . easy`` is rewritten as ``D . N`` with
    ``N = D^+ post D . pre . easy`` and ``N`` replaced by its diagonal.
    Returns ``(support, diag)``.
    """
    pre, post = [], []
    for cnot in cnots:
        h = cnot_noise(models, cnot, n_qubits)
        pre += h.pre
        post += h.post
    easy = list(easy_noise(models, n_qubits))
    support = set()
    for op in easy + pre + post:
        support |= set(op.qubits)
    if post:
        support |= {q for pair in cnots for q in pair}
    support = tuple(sorted(support))
    if not support:
        return (), np.ones(1)
    cnot_ptm = ptm_from_kraus([CNOT])
    ops = [(op.qubits, op.as_ptm()) for op in easy + pre]
    if post:
        ops += [(pair, cnot_ptm) for pair in cnots]
        ops += [(op.qubits, op.as_ptm()) for op in post]
        # undo the CNOTs; CNOT is an involution so D^+ = D
        ops += [(pair, cnot_ptm) for pair in cnots]
    r = _embed_ptm(ops, support)
    diag = np.diag(r).copy()
    return support, diag


def twirled_noisy_circuit(circuit: Circuit, models: Sequence[NoiseSpec]) -> NoisyCircuit:
    """The infinite-randomization image of ``attach_noise(circuit, models)``."""
    models = tuple(models)
    n = circuit.n_qubits
    hard = []
    for cyc in circuit.hard_cycles:
        support, diag = twirled_cycle_noise(models, tuple(cyc.cnots), n)
        ops = (NoiseOp(support, ptm=np.diag(diag), label="twirled"),) if support else ()
        hard.append(HardNoise(pre=ops))
    easy = [() for _ in circuit.easy_cycles]
    # noise of the final easy cycle is not followed by a hard cycle and stays as is
    easy[-1] = easy_noise(models, n)
    return NoisyCircuit(circuit, tuple(hard), tuple(easy))


# --------------------------------------------------------------------------
# zero-noise extrapolation


def magnify(c: Circuit, r: int) -> Circuit:
    """Replace every hard cycle by ``r`` copies separated by empty easy cycles."""
    if r < 1 or r % 2 == 0:
        raise ValueError(f"noise factor must be an odd positive integer, got {r}")
    if r == 1:
        return c
    cycles = [c.cycles[0]]
    for k in range(1, len(c.cycles), 2):
        hard, after = c.cycles[k], c.cycles[k + 1]
        for _ in range(r - 1):
            cycles += [hard, EasyCycle()]
        cycles += [hard, after]
    return Circuit(c.n_qubits, tuple(cycles), c.n_params)


@dataclass(frozen=True)
class ExtrapolationFit:
    points: tuple[tuple[float, float], ...]
    coefficients: tuple[float, ...]
    zero_noise_value: float

    def __call__(self, r: float) -> float:
        return float(np.polynomial.polynomial.polyval(r, self.coefficients))

    def to_json(self) -> dict:
        return {"points": [list(p) for p in self.points], "coefficients": list(self.coefficients),
                "zero_noise_value": self.zero_noise_value}


def extrapolate(points: Sequence[tuple[float, float]], cfg: ZNEConfig) -> ExtrapolationFit:
    """Least-squares polynomial in ``r`` of the configured order; value at ``r = 0``."""
    pts = tuple((float(r), float(e)) for r, e in points)
    rs = [r for r, _ in pts]
    if len(set(rs)) != len(rs):
        raise ValueError("duplicate noise factors")
    deg = cfg.degree
    if len(pts) < deg + 1:
        raise ValueError(f"need at least {deg + 1} points for {cfg.order} extrapolation")
    r = np.array(rs)
    e = np.array([v for _, v in pts])
    if deg == 0:
        coef = np.array([e.mean()]) if len(pts) > 1 else e[:1]
    elif len(pts) == 2 and deg == 1:
        (r1, e1), (r2, e2) = pts
        c0 = (r2 * e1 - r1 * e2) / (r2 - r1)
        coef = np.array([c0, (e2 - e1) / (r2 - r1)])
    else:
        vander = np.vander(r, deg + 1, increasing=True)
        coef = np.linalg.lstsq(vander, e, rcond=None)[0]
    return ExtrapolationFit(pts, tuple(float(v) for v in coef), float(coef[0]))


# --------------------------------------------------------------------------
# mitigated energy


def _stream(seed, *key) -> np.random.Generator:
    return np.random.default_rng(np.random.SeedSequence(seed, spawn_key=tuple(int(k) for k in key)))


class MitigatedEstimator:
    """Mitigated energy of ``template`` under fixed noise and mitigation settings.

    ``template`` acts on ``|0...0>`` (reference preparation included).  The
    heavy work, compiling every magnified circuit and the twirled noise, is
    done once here; :meth:`energy` only binds parameters.
    """

    def __init__(self, template: Circuit, hamiltonian: PauliSum, noise: Sequence[NoiseSpec] | NoiseSpec | None,
                 rc: RCConfig = RCConfig(), zne: ZNEConfig | None = None,
                 measurement: Measurement = Measurement(), offset: float = 0.0,
                 force_mode: str | None = None):
        if noise is None:
            noise = ()
        elif not isinstance(noise, (list, tuple)):
            noise = (noise,)
        self.noise = tuple(noise)
        self.template = template
        self.hamiltonian = hamiltonian
        self.rc = rc
        self.zne = zne if zne is not None else ZNEConfig.off()
        self.measurement = measurement
        self.offset = offset
        self.terms = TermTable(hamiltonian)
        self._nonid = np.array([not p.is_identity() for p in self.terms.paulis])
        self.n = template.n_qubits
        self.compiled = {r: self._compile(magnify(template, r), force_mode) for r in self.zne.factors}

    def _compile(self, circ: Circuit, force_mode):
        if self.rc.mode == "infinite" and self.noise:
            return CompiledCircuit(twirled_noisy_circuit(circ, self.noise), "ptm")
        nc = attach_noise(circ, self.noise)
        mode = force_mode or ("statevector" if nc.is_unitary else "ptm")
        return CompiledCircuit(nc, mode, dressed=self.rc.mode == "finite")

    def _init_state(self, mode: str) -> np.ndarray:
        if mode == "ptm":
            return basis_state_ptm(0, self.n).reshape(-1)
        psi = np.zeros(1 << self.n, dtype=complex)
        psi[0] = 1
        return psi

    def term_values(self, theta, r: int, rng: np.random.Generator | None = None, frames=None):
        """Exact per-term expectations ``(n_terms, batch)`` at noise factor ``r``."""
        cp = self.compiled[r]
        if cp.dressed and frames is None:
            frames = sample_twirls(rng, cp.n_hard, self.n, self.rc.n_rand)
        state = cp.run(theta, self._init_state(cp.mode), frames)
        return self.terms.term_values(state, cp.mode)

    def _column_energies(self, theta, r, rng):
        cp = self.compiled[r]
        frames = None
        if cp.dressed:
            frames = sample_twirls(rng, cp.n_hard, self.n, self.rc.n_rand)
        state = cp.run(theta, self._init_state(cp.mode), frames)
        if self.measurement.mode == "exact":
            return self.terms.energies(state, cp.mode)
        vals = self.terms.term_values(state, cp.mode)
        return self._sample(vals, rng)

    def _sample(self, vals: np.ndarray, rng: np.random.Generator) -> np.ndarray:
        """Finite-shot energy per column; the budget is split evenly across columns."""
        batch = vals.shape[1]
        m = int(self._nonid.sum())
        per_col = np.full(batch, self.measurement.budget // batch)
        per_col[: self.measurement.budget % batch] += 1
        shots = np.maximum(per_col // max(m, 1), 1)
        ident = self.terms.coeffs[~self._nonid].sum()
        v = vals[self._nonid]
        if np.any(np.abs(v) > 1 + 1e-9):
            raise NumericalIntegrityError("Pauli expectation outside [-1, 1]")
        prob = np.clip((1 + v) / 2, 0.0, 1.0)
        plus = rng.binomial(np.broadcast_to(shots, prob.shape), prob)
        means = (2 * plus - shots) / shots
        return ident + self.terms.coeffs[self._nonid] @ means

    def energy(self, theta, seed=0) -> tuple[float, dict]:
        """Mitigated energy (nuclear offset included) and a diagnostics record."""
        theta = np.asarray(theta, dtype=float)
        rng = _stream(seed, self.rc.stream)
        per_factor = []
        per_dressing = {}
        for r in self.zne.factors:
            cols = self._column_energies(theta, r, rng)
            per_factor.append(float(np.mean(cols)) + self.offset)
            if cols.shape[0] > 1:
                per_dressing[r] = [float(c) + self.offset for c in cols]
        fit = extrapolate(list(zip(self.zne.factors, per_factor)), self.zne)
        diag = {
            "theta": [float(t) for t in theta],
            "seed": int(seed) if np.isscalar(seed) else list(seed),
            "rc": asdict(self.rc),
            "zne": {"factors": list(self.zne.factors), "order": self.zne.order},
            "noise": [noise_to_json(s) for s in self.noise],
            "per_factor": dict(zip(map(str, self.zne.factors), per_factor)),
            "fit": fit.to_json(),
        }
        if per_dressing:
            diag["per_dressing"] = {str(r): v for r, v in per_dressing.items()}
        return fit.zero_noise_value, diag

    def __call__(self, theta, seed=0) -> float:
        return self.energy(theta, seed)[0]


def mitigated_energy(template: Circuit, theta, hamiltonian: PauliSum, noise, rc: RCConfig,
                     zne: ZNEConfig, measurement: Measurement = Measurement(), seed=0,
                     offset: float = 0.0) -> tuple[float, dict]:
    """One-shot convenience wrapper around :class:`MitigatedEstimator`."""
    est = MitigatedEstimator(template, hamiltonian, noise, rc, zne, measurement, offset)
    return est.energy(theta, seed)
