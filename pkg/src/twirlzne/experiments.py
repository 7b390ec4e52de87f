"""Experiment families behind the command-line runner.

Each ``cmd_*`` function takes an :class:`ExperimentConfig` and returns a
:class:`Report`: a main table plus optional companion tables and JSON-lines
records.  Nothing here depends on wall-clock time, so identical configs give
identical output.
"""

from __future__ import annotations

import csv
import hashlib
import io
import json
from dataclasses import dataclass, field
from pathlib import Path
from typing import Any, Sequence

import numpy as np

from . import __version__
from .mitigate import (Measurement, MitigatedEstimator, MitigationConfig, RCConfig, ZNEConfig,
                       standard_configs, twirl_ptm)
from .molham import Problem, data_path, fixture_references, load_problem, problem_from_pauli_sum
from .noisesim import (CALIBRATION, ChannelPTM, NoiseSpec, Relaxation, calibrated, error_channel,
                       infidelity, mixed_noise, noise_from_json, noise_infidelity, noise_to_json,
                       pauli_error_probabilities)
from .pauli import ground_energy_exact
from .uccsd import FIXED_THETA_DEG
from .vqe import OptimizerConfig, ansatz, parallel_map, run_ensemble

KINDS = ("curve", "landscape", "precision", "linearity", "ensemble", "twirl-inspect", "calibrate")


class ConfigError(ValueError):
    """Invalid or inconsistent experiment configuration."""


# --------------------------------------------------------------------------
# configuration


_DEFAULTS: dict[str, Any] = {
    "molecule": {"fixture": "h2", "bond": 0.7414},
    "noise": [{"calibrate": "over_rotation", "infidelity": 1e-3}],
    "mitigation": None,
    "rc_mode": "infinite",
    "n_rand": 20,
    "factors": [1, 3],
    "order": "linear",
    "measurement": {"mode": "exact"},
    "optimizer": {"method": "powell", "max_evals": 400},
    "n_trials": 35,
    "seed": 0,
}

_KIND_DEFAULTS: dict[str, dict[str, Any]] = {
    "curve": {"bonds": None},
    "landscape": {"theta0_deg": 8.6, "theta1_deg": [-180.0, 180.0], "theta2_deg": [-180.0, 180.0],
                  "resolution": 21, "noise": [{"model": "over_rotation", "epsilon": 0.02}]},
    "precision": {"theta_deg": list(FIXED_THETA_DEG), "n_rand_list": [10, 20, 40], "repeats": 200,
                  "noise_sweep": [[{"model": "over_rotation", "epsilon": e}] for e in (0.01, 0.02, 0.03)]},
    "linearity": {"theta_deg": list(FIXED_THETA_DEG), "factors": [1, 3, 5, 7],
                  "noise": [{"model": "over_rotation", "epsilon": 0.02}]},
    "ensemble": {},
    "twirl-inspect": {"noise": [{"model": "over_rotation", "epsilon": 0.02}], "n_qubits": 4},
    "calibrate": {"models": sorted(CALIBRATION), "infidelity": 1e-3, "n_qubits": 4},
}


@dataclass(frozen=True)
class ExperimentConfig:
    """Resolved configuration; ``params`` holds every key after defaults are merged."""

    kind: str
    params: dict = field(hash=False)
    stretch: bool = False

    @classmethod
    def from_json(cls, obj: dict, kind: str | None = None, seed: int | None = None,
                  stretch: bool = False) -> "ExperimentConfig":
        obj = dict(obj)
        declared = obj.pop("kind", None)
        kind = kind or declared
        if kind not in KINDS:
            raise ConfigError(f"unknown experiment kind {kind!r}; known: {', '.join(KINDS)}")
        if declared is not None and declared != kind:
            raise ConfigError(f"config is for {declared!r}, not {kind!r}")
        params = json.loads(json.dumps(_DEFAULTS))
        params.update(json.loads(json.dumps(_KIND_DEFAULTS[kind])))
        unknown = set(obj) - set(params) - {"out"}
        if unknown:
            raise ConfigError(f"unknown config keys for {kind}: {sorted(unknown)}")
        params.update(obj)
        if seed is not None:
            params["seed"] = int(seed)
        params.pop("out", None)
        return cls(kind, params, stretch)

    @classmethod
    def load(cls, path, **kw) -> "ExperimentConfig":
        try:
            obj = json.loads(Path(path).read_text())
        except (OSError, json.JSONDecodeError) as exc:
            raise ConfigError(f"cannot read config {path}: {exc}") from exc
        return cls.from_json(obj, **kw)

    def __getitem__(self, key):
        return self.params[key]

    def canonical(self) -> str:
        return json.dumps({"kind": self.kind, "stretch": self.stretch, **self.params}, sort_keys=True)

    @property
    def digest(self) -> str:
        return hashlib.sha256(self.canonical().encode()).hexdigest()

    @property
    def seed(self) -> int:
        return int(self.params["seed"])


def resolve_problem(cfg: ExperimentConfig, bond: float | None = None) -> Problem:
    mol = cfg["molecule"]
    if "pauli_sum" in mol:
        path = Path(mol["pauli_sum"])
        if not path.exists():
            raise ConfigError(f"missing Pauli-sum file {path}")
        return problem_from_pauli_sum(path, int(mol["n_electrons"]), float(mol.get("enuc", 0.0)))
    if "integrals" in mol:
        path = Path(mol["integrals"])
    else:
        name = mol.get("fixture", "h2")
        b = mol.get("bond", 0.7414) if bond is None else bond
        path = data_path(f"{name}_{float(b):g}.ints")
    if not path.exists():
        raise ConfigError(f"missing molecule fixture {path}")
    problem = load_problem(path)
    if problem.n_qubits > 4 and not cfg.stretch:
        raise ConfigError(f"{problem.spec.name} has {problem.n_qubits} qubits; pass --stretch to run it")
    return problem


def resolve_noise(entries, n_qubits: int) -> tuple[NoiseSpec, ...]:
    """Noise list from config entries: explicit models, calibrated models or mixtures."""
    if entries is None:
        return ()
    if isinstance(entries, dict):
        entries = [entries]
    out: list[NoiseSpec] = []
    for e in entries:
        e = dict(e)
        try:
            if "calibrate" in e:
                out.append(calibrated(e["calibrate"], float(e.get("infidelity", 1e-3)), n_qubits))
            elif "mixed" in e:
                out += mixed_noise(float(e["mixed"]), float(e.get("total", 1e-3)),
                                   e.get("coherent", "crosstalk"), n_qubits)
            else:
                out.append(noise_from_json(e))
        except (TypeError, ValueError) as exc:
            raise ConfigError(f"bad noise entry {e}: {exc}") from exc
    return tuple(out)


def resolve_mitigation(cfg: ExperimentConfig) -> list[MitigationConfig]:
    try:
        if cfg["mitigation"]:
            return [MitigationConfig.from_json(m) for m in cfg["mitigation"]]
        return standard_configs(cfg["rc_mode"], int(cfg["n_rand"]), tuple(cfg["factors"]), cfg["order"])
    except (TypeError, ValueError, KeyError) as exc:
        raise ConfigError(f"bad mitigation settings: {exc}") from exc


def resolve_measurement(cfg: ExperimentConfig) -> Measurement:
    m = cfg["measurement"]
    try:
        return Measurement(m.get("mode", "exact"), int(m.get("budget", 0)))
    except ValueError as exc:
        raise ConfigError(str(exc)) from exc


def resolve_optimizer(cfg: ExperimentConfig) -> OptimizerConfig:
    o = dict(cfg["optimizer"])
    if o.get("bounds") is not None:
        o["bounds"] = tuple(tuple(b) for b in o["bounds"])
    try:
        return OptimizerConfig(**o)
    except (TypeError, ValueError) as exc:
        raise ConfigError(f"bad optimizer settings: {exc}") from exc


def _check_stretch(cfg: ExperimentConfig, problem: Problem, noise, mitigations) -> None:
    if problem.n_qubits <= 4:
        return
    if any(isinstance(s, Relaxation) for s in noise):
        raise ConfigError("stretch runs are statevector-only; relaxation noise is not available")
    if any(m.rc.mode == "infinite" for m in mitigations):
        raise ConfigError("stretch runs are statevector-only; use finite RC (rc_mode: finite)")


def reference_energy(problem: Problem) -> float:
    """Exact ground energy (nuclear repulsion included); sparse Lanczos above 10 qubits."""
    if problem.n_qubits <= 10:
        return ground_energy_exact(problem.hamiltonian)[0] + problem.spec.nuclear_repulsion
    from scipy.sparse.linalg import eigsh

    from .engine import TermTable

    val = eigsh(TermTable(problem.hamiltonian).sparse, k=1, which="SA")[0][0]
    return float(val) + problem.spec.nuclear_repulsion


# --------------------------------------------------------------------------
# tables


@dataclass
class Table:
    columns: tuple[str, ...]
    rows: list[tuple]

    def column(self, name: str) -> list:
        k = self.columns.index(name)
        return [r[k] for r in self.rows]

    def to_csv(self, meta: dict[str, str] | None = None) -> str:
        buf = io.StringIO()
        for k, v in (meta or {}).items():
            buf.write(f"# {k}: {v}\n")
        w = csv.writer(buf, lineterminator="\n")
        w.writerow(self.columns)
        for row in self.rows:
            w.writerow([_fmt(v) for v in row])
        return buf.getvalue()

    @classmethod
    def from_csv(cls, text: str) -> tuple["Table", dict[str, str]]:
        meta, body = {}, []
        for line in text.splitlines():
            if line.startswith("# "):
                k, _, v = line[2:].partition(": ")
                meta[k] = v
            else:
                body.append(line)
        rows = list(csv.reader(body))
        return cls(tuple(rows[0]), [tuple(_parse(v) for v in r) for r in rows[1:]]), meta


def _fmt(v) -> str:
    if isinstance(v, (bool, np.bool_)):
        return str(bool(v))
    if isinstance(v, (int, np.integer)):
        return str(int(v))
    if isinstance(v, (float, np.floating)):
        return repr(float(v))
    return str(v)


def _parse(v: str):
    for conv in (int, float):
        try:
            return conv(v)
        except ValueError:
            pass
    return v


@dataclass
class Report:
    kind: str
    table: Table
    extra: dict[str, Table] = field(default_factory=dict)
    records: list[str] = field(default_factory=list)
    failures: int = 0
    summary: list[str] = field(default_factory=list)

    def meta(self, cfg: ExperimentConfig) -> dict[str, str]:
        return {"twirlzne": __version__, "experiment": self.kind, "config_sha256": cfg.digest,
                "seed": str(cfg.seed), "config": cfg.canonical()}

    def write(self, cfg: ExperimentConfig, out: Path) -> list[Path]:
        out = Path(out)
        out.parent.mkdir(parents=True, exist_ok=True)
        meta = self.meta(cfg)
        written = [out]
        out.write_text(self.table.to_csv(meta))
        stem = out.with_suffix("") if out.suffix == ".csv" else out
        for name, t in self.extra.items():
            p = Path(f"{stem}.{name}.csv")
            p.write_text(t.to_csv(meta))
            written.append(p)
        if self.records:
            p = Path(f"{stem}.trials.jsonl")
            header = json.dumps({"twirlzne": __version__, "experiment": self.kind,
                                 "config_sha256": cfg.digest, "seed": cfg.seed})
            p.write_text("\n".join([header] + self.records) + "\n")
            written.append(p)
        return written


# --------------------------------------------------------------------------
# experiments


def _ensembles(cfg, problem, noise, mitigations, workers):
    optimizer = resolve_optimizer(cfg)
    measurement = resolve_measurement(cfg)
    out = []
    for m in mitigations:
        out.append(run_ensemble(problem, noise, m, optimizer, int(cfg["n_trials"]), cfg.seed,
                                measurement, workers))
    return out


def cmd_ensemble(cfg: ExperimentConfig, workers: int | None = None) -> Report:
    problem = resolve_problem(cfg)
    noise = resolve_noise(cfg["noise"], problem.n_qubits)
    mitigations = resolve_mitigation(cfg)
    _check_stretch(cfg, problem, noise, mitigations)
    e_ref = reference_energy(problem)
    rows, records, failures = [], [], 0
    for s in _ensembles(cfg, problem, noise, mitigations, workers):
        errs = [abs(e - e_ref) for e in s.energies]
        rows.append((s.config, len(s.energies), s.n_failed, s.minimum, s.q1, s.median, s.q3, e_ref,
                     min(errs) if errs else float("nan")))
        records += [t.to_json() for t in s.trials]
        failures += s.n_failed
    cols = ("config", "n_ok", "n_failed", "E_min", "E_q1", "E_median", "E_q3", "E_FCI", "min_abs_error")
    summary = [f"{r[0]:8s} min|E-E_FCI| = {r[8]:.3e}  median E-E_FCI = {r[5] - r[7]:+.3e}" for r in rows]
    return Report("ensemble", Table(cols, rows), records=records, failures=failures, summary=summary)


def cmd_curve(cfg: ExperimentConfig, workers: int | None = None) -> Report:
    name = cfg["molecule"].get("fixture", "h2")
    bonds = cfg["bonds"]
    if bonds is None:
        refs = fixture_references()
        if name not in refs:
            raise ConfigError(f"no fixtures for molecule {name!r}")
        bonds = sorted(float(b) for b in refs[name])
    mitigations = resolve_mitigation(cfg)
    rows, records, failures = [], [], 0
    for b in bonds:
        problem = resolve_problem(cfg, bond=b)
        noise = resolve_noise(cfg["noise"], problem.n_qubits)
        _check_stretch(cfg, problem, noise, mitigations)
        e_ref = reference_energy(problem)
        for s in _ensembles(cfg, problem, noise, mitigations, workers):
            rows.append((float(b), s.config, s.minimum, s.median, e_ref, len(s.energies), s.n_failed))
            records += [t.to_json() for t in s.trials]
            failures += s.n_failed
    cols = ("geometry", "config", "E_min", "E_median", "E_FCI", "n_ok", "n_failed")
    return Report("curve", Table(cols, rows), records=records, failures=failures)


@dataclass
class _LandscapeRow:
    """Energies along one theta1 row; estimators are rebuilt in each worker."""

    problem: Problem
    noise: tuple
    mitigations: tuple
    theta0: float
    theta2: tuple
    seed: int

    def __call__(self, item):
        i, theta1 = item
        ideal = MitigatedEstimator(ansatz(self.problem), self.problem.hamiltonian, (),
                                   offset=self.problem.spec.nuclear_repulsion)
        ests = [MitigatedEstimator(ansatz(self.problem), self.problem.hamiltonian, self.noise, m.rc, m.zne,
                                   offset=self.problem.spec.nuclear_repulsion) for m in self.mitigations]
        rows = []
        for j, t2 in enumerate(self.theta2):
            th = np.array([self.theta0, theta1, t2])
            e0 = ideal(th)
            es = [e(th, seed=[self.seed, i, j]) for e in ests]
            rows.append((float(np.rad2deg(theta1)), float(np.rad2deg(t2)), e0, *es, *[e - e0 for e in es]))
        return rows


def _grid(spec, n) -> np.ndarray:
    lo, hi = spec
    return np.deg2rad(np.linspace(float(lo), float(hi), int(n)))


def cmd_landscape(cfg: ExperimentConfig, workers: int | None = None) -> Report:
    problem = resolve_problem(cfg)
    if problem.n_qubits != 4 or ansatz(problem).n_params != 3:
        raise ConfigError("the landscape experiment needs a three-parameter (H2-like) ansatz")
    noise = resolve_noise(cfg["noise"], problem.n_qubits)
    mitigations = resolve_mitigation(cfg)
    n = int(cfg["resolution"])
    t1, t2 = _grid(cfg["theta1_deg"], n), _grid(cfg["theta2_deg"], n)
    job = _LandscapeRow(problem, noise, tuple(mitigations), float(np.deg2rad(cfg["theta0_deg"])),
                        tuple(t2), cfg.seed)
    chunks = parallel_map(job, list(enumerate(t1)), workers)
    rows = [r for chunk in chunks for r in chunk]
    names = [_label(m.name) for m in mitigations]
    cols = ("theta1_deg", "theta2_deg", "E_ideal", *[f"E_{k}" for k in names], *[f"dev_{k}" for k in names])
    table = Table(cols, rows)
    summary = [f"max |dev_{k}| = {max(abs(v) for v in table.column(f'dev_{k}')):.3e}" for k in names]
    return Report("landscape", table, summary=summary)


def _label(name: str) -> str:
    return name.replace("+", "_")


@dataclass
class _PrecisionJob:
    problem: Problem
    theta: tuple
    repeats: int
    seed: int

    def __call__(self, item):
        k, noise, n_rand = item
        h, tm, off = self.problem.hamiltonian, ansatz(self.problem), self.problem.spec.nuclear_repulsion
        ideal = MitigatedEstimator(tm, h, (), offset=off)(self.theta)
        inf = MitigatedEstimator(tm, h, noise, RCConfig.infinite(), offset=off)(self.theta)
        est = MitigatedEstimator(tm, h, noise, RCConfig.finite(n_rand), offset=off)
        samples = [est(self.theta, seed=[self.seed, k, n_rand, rep]) for rep in range(self.repeats)]
        return ideal, inf, samples


def cmd_precision(cfg: ExperimentConfig, workers: int | None = None) -> Report:
    problem = resolve_problem(cfg)
    theta = tuple(np.deg2rad(cfg["theta_deg"]))
    repeats = int(cfg["repeats"])
    if repeats < 2:
        raise ConfigError("precision needs at least two repeats")
    sweep = [resolve_noise(entry, problem.n_qubits) for entry in cfg["noise_sweep"]]
    items = [(k, noise, int(n)) for k, noise in enumerate(sweep) for n in cfg["n_rand_list"]]
    results = parallel_map(_PrecisionJob(problem, theta, repeats, cfg.seed), items, workers)
    rows, samples = [], []
    for (k, noise, n), (ideal, inf, es) in zip(items, results):
        label = _noise_label(noise)
        es = np.array(es)
        std = float(es.std(ddof=1))
        rows.append((label, n, repeats, float(es.mean()), std, std / np.sqrt(repeats), inf, ideal,
                     float(es.mean()) - inf))
        samples += [(label, n, rep, float(e), float(e) - ideal) for rep, e in enumerate(es)]
    cols = ("noise", "n_rand", "repeats", "mean", "std", "stderr", "E_infinite", "E_ideal", "mean_minus_infinite")
    extra = {"samples": Table(("noise", "n_rand", "repeat", "energy", "error"), samples)}
    return Report("precision", Table(cols, rows), extra)


def _noise_label(noise) -> str:
    return json.dumps([noise_to_json(s) for s in noise], sort_keys=True) if noise else "none"


def cmd_linearity(cfg: ExperimentConfig, workers: int | None = None) -> Report:
    problem = resolve_problem(cfg)
    noise = resolve_noise(cfg["noise"], problem.n_qubits)
    factors = tuple(int(r) for r in cfg["factors"])
    try:
        zne = ZNEConfig(factors, "linear")
    except ValueError as exc:
        raise ConfigError(str(exc)) from exc
    theta = np.deg2rad(cfg["theta_deg"])
    tm, h = ansatz(problem), problem.hamiltonian
    modes = {"no_rc": RCConfig.off(), "rc_infinite": RCConfig.infinite(),
             f"rc_finite_{int(cfg['n_rand'])}": RCConfig.finite(int(cfg["n_rand"]))}
    values = {}
    for name, rc in modes.items():
        est = MitigatedEstimator(tm, h, noise, rc, zne)
        per_r = []
        for r in factors:
            rng = np.random.default_rng(np.random.SeedSequence(cfg.seed, spawn_key=(r,)))
            per_r.append(est.term_values(theta, r, rng).mean(axis=1))
        values[name] = np.array(per_r).T  # (terms, factors)
    labels = [p.label for p in est.terms.paulis]
    coeffs = est.terms.coeffs
    rows = []
    for t, label in enumerate(labels):
        for j, r in enumerate(factors):
            rows.append((label, float(coeffs[t]), r, *[float(values[m][t, j]) for m in modes]))
    vander = np.vander(np.array(factors, dtype=float), 2, increasing=True)
    resid = {}
    for m in modes:
        fit = np.linalg.lstsq(vander, values[m].T, rcond=None)[0]
        resid[m] = np.max(np.abs(vander @ fit - values[m].T), axis=0)
    res_rows = [(label, float(coeffs[t]), *[float(resid[m][t]) for m in modes]) for t, label in enumerate(labels)]
    names = list(modes)
    cols = ("term", "coefficient", "r", *[f"E_{m}" for m in names])
    extra = {"residuals": Table(("term", "coefficient", *[f"residual_{m}" for m in names]), res_rows)}
    nonid = [k for k, p in enumerate(est.terms.paulis) if not p.is_identity()]
    better = sum(resid["rc_infinite"][k] < resid["no_rc"][k] for k in nonid)
    summary = [f"infinite RC more linear on {better} of {len(nonid)} non-identity terms"]
    return Report("linearity", Table(cols, rows), extra, summary=summary)


def cmd_twirl_inspect(cfg: ExperimentConfig, workers: int | None = None) -> Report:
    n = int(cfg["n_qubits"])
    noise = resolve_noise(cfg["noise"], n)
    support, r = error_channel(noise, n)
    ptm = ChannelPTM(r)
    tw = twirl_ptm(ptm)
    k = ptm.n_qubits
    labels = [_pauli_label(a, k) for a in range(4 ** k)]
    rows = [("ptm", labels[a], labels[b], float(r[a, b])) for a in range(4 ** k) for b in range(4 ** k)]
    rows += [("twirled_diagonal", labels[a], labels[a], float(tw.matrix[a, a])) for a in range(4 ** k)]
    probs = pauli_error_probabilities(tw)
    rows += [("pauli_error_probability", labels[a], "", float(probs[a])) for a in range(4 ** k)]
    before, after = infidelity(ptm), infidelity(tw)
    rows += [("infidelity_before", "", "", before), ("infidelity_after", "", "", after),
             ("infidelity_difference", "", "", after - before),
             ("support", " ".join(map(str, support)), "", float(len(support)))]
    summary = [f"support {support}; infidelity before {before:.6e}, after {after:.6e}",
               "largest Pauli error probabilities: " + ", ".join(
                   f"{labels[a]}={probs[a]:.3e}" for a in np.argsort(-probs)[:5] if a != 0)]
    return Report("twirl-inspect", Table(("quantity", "row", "col", "value"), rows), summary=summary)


def _pauli_label(a: int, k: int) -> str:
    return "".join("IXYZ"[(a >> (2 * (k - 1 - q))) & 3] for q in range(k)) if k else "I"


def cmd_calibrate(cfg: ExperimentConfig, workers: int | None = None) -> Report:
    n = int(cfg["n_qubits"])
    target = float(cfg["infidelity"])
    rows = []
    for kind in cfg["models"]:
        try:
            spec = calibrated(kind, target, n)
        except ValueError as exc:
            raise ConfigError(str(exc)) from exc
        d = noise_to_json(spec)
        key = "t" if kind == "relaxation" else "epsilon" if kind == "over_rotation" else "phi"
        s = d[key]
        deg = float(np.rad2deg(s)) if key == "phi" else float("nan")
        rows.append((kind, key, target, s, deg, noise_infidelity(spec, n)))
    summary = [f"{r[0]:24s} {r[1]} = {r[3]!r}" + (f" ({r[4]:.4f} deg)" if r[1] == "phi" else "") for r in rows]
    return Report("calibrate", Table(("model", "parameter", "target", "strength", "strength_deg",
                                      "achieved"), rows), summary=summary)


COMMANDS = {
    "curve": cmd_curve,
    "landscape": cmd_landscape,
    "precision": cmd_precision,
    "linearity": cmd_linearity,
    "ensemble": cmd_ensemble,
    "twirl-inspect": cmd_twirl_inspect,
    "calibrate": cmd_calibrate,
}


def run_experiment(cfg: ExperimentConfig, workers: int | None = None) -> Report:
    return COMMANDS[cfg.kind](cfg, workers)
