"""Derivative-free optimizers and the multi-trial VQE harness."""

from __future__ import annotations

import json
import os
from concurrent.futures import ProcessPoolExecutor
from dataclasses import asdict, dataclass, field
from typing import Callable, Sequence

import numpy as np
from scipy.optimize import minimize

from .circuit import Circuit
from .mitigate import Measurement, MitigatedEstimator, MitigationConfig
from .molham import Problem
from .noisesim import NoiseSpec, noise_to_json
from .uccsd import prepend_reference, uccsd_template

INIT_RANGE = np.pi / 10
WORKERS_ENV = "TWIRLZNE_WORKERS"


@dataclass(frozen=True)
class OptimizerConfig:
    method: str = "powell"
    max_evals: int = 400
    xtol: float = 1e-4
    ftol: float = 1e-6
    bounds: tuple[tuple[float, float], ...] | None = None
    simplex_step: float = 0.1

    def __post_init__(self):
        if self.method not in ("powell", "nelder_mead"):
            raise ValueError(f"unknown optimizer {self.method!r}")
        if self.max_evals < 1:
            raise ValueError("evaluation budget must be at least 1")
        if self.xtol <= 0 or self.ftol <= 0:
            raise ValueError("tolerances must be positive")

    def to_json(self) -> dict:
        d = asdict(self)
        d["bounds"] = None if self.bounds is None else [list(b) for b in self.bounds]
        return d


@dataclass
class OptimizeResult:
    x: np.ndarray
    fun: float
    trace: list[tuple[np.ndarray, float]]
    truncated: bool

    @property
    def n_evals(self) -> int:
        return len(self.trace)

    def incumbents(self) -> list[float]:
        return list(np.minimum.accumulate([f for _, f in self.trace]))


class _BudgetExhausted(Exception):
    pass


class _Counted:
    """Objective wrapper enforcing a hard evaluation cap and recording the trace."""

    def __init__(self, f: Callable, budget: int):
        self.f = f
        self.budget = budget
        self.trace: list[tuple[np.ndarray, float]] = []

    def __call__(self, x):
        if len(self.trace) >= self.budget:
            raise _BudgetExhausted
        x = np.array(x, dtype=float)
        val = float(self.f(x))
        self.trace.append((x, val))
        return val

    def best(self) -> tuple[np.ndarray, float]:
        k = int(np.argmin([v for _, v in self.trace]))
        return self.trace[k]


def _run(f, x0, cfg: OptimizerConfig, method: str, options: dict) -> OptimizeResult:
    counted = _Counted(f, cfg.max_evals)
    truncated = False
    try:
        res = minimize(counted, np.asarray(x0, dtype=float), method=method, bounds=cfg.bounds, options=options)
        truncated = not res.success and len(counted.trace) >= cfg.max_evals
    except _BudgetExhausted:
        truncated = True
    x, fun = counted.best()
    return OptimizeResult(x, fun, counted.trace, truncated)


def powell_minimize(f: Callable, x0: Sequence[float], cfg: OptimizerConfig = OptimizerConfig()) -> OptimizeResult:
    """Powell's conjugate-direction search; returns the best point evaluated."""
    return _run(f, x0, cfg, "Powell", {"xtol": cfg.xtol, "ftol": cfg.ftol, "maxfev": cfg.max_evals})


def nelder_mead_minimize(f: Callable, x0: Sequence[float],
                         cfg: OptimizerConfig = OptimizerConfig("nelder_mead")) -> OptimizeResult:
    x0 = np.asarray(x0, dtype=float)
    simplex = np.vstack([x0] + [x0 + cfg.simplex_step * e for e in np.eye(len(x0))])
    return _run(f, x0, cfg, "Nelder-Mead", {"xatol": cfg.xtol, "fatol": cfg.ftol, "maxfev": cfg.max_evals,
                                             "initial_simplex": simplex})


def minimize_with(cfg: OptimizerConfig, f: Callable, x0) -> OptimizeResult:
    if cfg.method == "powell":
        return powell_minimize(f, x0, cfg)
    return nelder_mead_minimize(f, x0, cfg)


# --------------------------------------------------------------------------
# trials


def ansatz(problem: Problem) -> Circuit:
    """UCC-SD template with the Hartree-Fock preparation, acting on ``|0...0>``."""
    return prepend_reference(uccsd_template(problem.spec), problem.spec)


def make_estimator(problem: Problem, noise: Sequence[NoiseSpec], mitigation: MitigationConfig,
                   measurement: Measurement = Measurement()) -> MitigatedEstimator:
    return MitigatedEstimator(ansatz(problem), problem.hamiltonian, tuple(noise), mitigation.rc, mitigation.zne,
                              measurement, offset=problem.spec.nuclear_repulsion)


def initial_theta(seed: int, n_params: int) -> np.ndarray:
    rng = np.random.default_rng(np.random.SeedSequence(seed, spawn_key=(0,)))
    return rng.uniform(-INIT_RANGE, INIT_RANGE, n_params)


@dataclass
class TrialRecord:
    seed: int
    config: str
    initial_theta: list[float]
    final_theta: list[float]
    final_energy: float
    n_evals: int
    trace: list[tuple[list[float], float]]
    truncated: bool
    mitigation: dict
    noise: list[dict]
    optimizer: dict
    measurement: dict
    error: str | None = None

    @property
    def ok(self) -> bool:
        return self.error is None

    def to_json(self) -> str:
        return json.dumps(asdict(self))

    @classmethod
    def from_json(cls, text: str) -> "TrialRecord":
        d = json.loads(text)
        d["trace"] = [(list(t), float(e)) for t, e in d["trace"]]
        return cls(**d)


def run_trial(problem: Problem, noise: Sequence[NoiseSpec], mitigation: MitigationConfig,
              optimizer: OptimizerConfig, seed: int, measurement: Measurement = Measurement(),
              estimator: MitigatedEstimator | None = None) -> TrialRecord:
    """One VQE run from a random start drawn from ``seed``."""
    noise = tuple(noise)
    est = estimator or make_estimator(problem, noise, mitigation, measurement)
    x0 = initial_theta(seed, est.template.n_params)
    calls = [0]

    def objective(theta):
        calls[0] += 1
        return est(theta, seed=[seed, 1, calls[0]])

    meta = dict(seed=int(seed), config=mitigation.name, initial_theta=[float(v) for v in x0],
                mitigation=mitigation.to_json(), noise=[noise_to_json(s) for s in noise],
                optimizer=optimizer.to_json(), measurement=asdict(measurement))
    try:
        res = minimize_with(optimizer, objective, x0)
    except Exception as exc:  # a failed evaluation aborts the trial, recorded for the summary
        return TrialRecord(final_theta=[], final_energy=float("nan"), n_evals=calls[0], trace=[],
                           truncated=False, error=f"{type(exc).__name__}: {exc}", **meta)
    trace = [([float(v) for v in x], float(e)) for x, e in res.trace]
    return TrialRecord(final_theta=[float(v) for v in res.x], final_energy=float(res.fun), n_evals=res.n_evals,
                       trace=trace, truncated=res.truncated, **meta)


def trial_seeds(base_seed: int, n_trials: int) -> list[int]:
    children = np.random.SeedSequence(base_seed).spawn(n_trials)
    return [int(c.generate_state(1, dtype=np.uint32)[0]) for c in children]


@dataclass
class EnsembleSummary:
    config: str
    energies: list[float]
    n_failed: int
    minimum: float
    median: float
    q1: float
    q3: float
    trials: list[TrialRecord] = field(default_factory=list, repr=False)

    @classmethod
    def from_trials(cls, config: str, trials: Sequence[TrialRecord]) -> "EnsembleSummary":
        energies = [t.final_energy for t in trials if t.ok]
        failed = sum(not t.ok for t in trials)
        if energies:
            q1, med, q3 = np.percentile(energies, [25, 50, 75])
            mn = min(energies)
        else:
            q1 = med = q3 = mn = float("nan")
        return cls(config, energies, failed, float(mn), float(med), float(q1), float(q3), list(trials))

    def to_json(self) -> dict:
        d = asdict(self)
        d.pop("trials")
        return d


def default_workers() -> int:
    return max(1, int(os.environ.get(WORKERS_ENV, "1")))


def parallel_map(fn: Callable, items: Sequence, workers: int | None = None) -> list:
    """``[fn(x) for x in items]`` on a process pool, results in input order."""
    workers = default_workers() if workers is None else workers
    if workers <= 1 or len(items) <= 1:
        return [fn(x) for x in items]
    with ProcessPoolExecutor(max_workers=workers) as pool:
        return list(pool.map(fn, items))


@dataclass
class _TrialJob:
    problem: Problem
    noise: tuple
    mitigation: MitigationConfig
    optimizer: OptimizerConfig
    measurement: Measurement
    estimator: MitigatedEstimator | None = field(default=None, repr=False)

    def __getstate__(self):
        state = dict(self.__dict__)
        state["estimator"] = None
        return state

    def __call__(self, seed: int) -> TrialRecord:
        if self.estimator is None:
            self.estimator = make_estimator(self.problem, self.noise, self.mitigation, self.measurement)
        return run_trial(self.problem, self.noise, self.mitigation, self.optimizer, seed, self.measurement,
                         self.estimator)


def run_ensemble(problem: Problem, noise: Sequence[NoiseSpec], mitigation: MitigationConfig,
                 optimizer: OptimizerConfig, n_trials: int, base_seed: int = 0,
                 measurement: Measurement = Measurement(), workers: int | None = None) -> EnsembleSummary:
    """Independent trials with seeds derived from ``base_seed``."""
    if n_trials < 1:
        raise ValueError("n_trials must be at least 1")
    job = _TrialJob(problem, tuple(noise), mitigation, optimizer, measurement)
    trials = parallel_map(job, trial_seeds(base_seed, n_trials), workers)
    return EnsembleSummary.from_trials(mitigation.name, trials)
