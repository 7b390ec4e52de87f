"""End-to-end acceptance checks, one test per criterion.

Each test records a PASS/FAIL line that is printed in the terminal summary.
The experiment settings come from the JSON files in ``configs/`` so the suite
exercises the same inputs as the command-line runs.
"""

import itertools
import json
import time
from pathlib import Path

import numpy as np
import pytest

from twirlzne.circuit import Circuit, EasyCycle, Gate, HardCycle
from twirlzne.cli import main
from twirlzne.engine import CompiledCircuit
from twirlzne.experiments import ExperimentConfig, Table, run_experiment
from twirlzne.mitigate import MitigationConfig, twirl_ptm, twirl_ptm_bruteforce, twirled_noisy_circuit
from twirlzne.molham import fci_energy
from twirlzne.noisesim import (ChannelPTM, IZRotation, OverRotation, Relaxation, RingCrosstalk, XIRotation,
                               attach_noise, basis_state_ptm, error_channel)
from twirlzne.vqe import OptimizerConfig, run_trial

CONFIGS = Path(__file__).resolve().parents[1] / "configs"

CHEMICAL_ACCURACY = 1.6e-3
MAX_EVALS = 400
BASELINE_SECONDS = 10.0
TWIRL_TOL = 1e-12
TWIRL_SECONDS = 60.0
DRESSING_TOL = 1e-12
REDUCTION = 10.0
LANDSCAPE_SECONDS = 30 * 60.0
POWER_LAW_DEVIATION = 0.20
MIN_LINEAR_TERMS = 10
COHERENT_PHIS_DEG = (1.8, 3.6, 5.4)


def _config(name, **overrides):
    obj = json.loads((CONFIGS / name).read_text())
    obj.update(overrides)
    return ExperimentConfig.from_json(obj)


def _ensemble_errors(name, **overrides):
    report = run_experiment(_config(name, **overrides))
    assert report.failures == 0
    return dict(zip(report.table.column("config"), report.table.column("min_abs_error")))


def _ordering(errs):
    ok = errs["rc+zne"] * REDUCTION <= errs["none"] and errs["rc+zne"] < min(errs["rc"], errs["zne"])
    detail = " ".join(f"{k}={v:.2e}" for k, v in errs.items())
    return ok, f"{detail} (x{errs['none'] / errs['rc+zne']:.0f})"


def test_c1_noiseless_baseline(h2, accept):
    e_fci = fci_energy(h2)
    oks = []
    for method in ("powell", "nelder_mead"):
        t0 = time.perf_counter()
        rec = run_trial(h2, (), MitigationConfig("none"), OptimizerConfig(method, max_evals=MAX_EVALS), seed=0)
        dt = time.perf_counter() - t0
        err = abs(rec.final_energy - e_fci)
        ok = rec.ok and err < CHEMICAL_ACCURACY and rec.n_evals <= MAX_EVALS and dt < BASELINE_SECONDS
        oks.append(accept(1, ok, f"{method}: |E-E_FCI|={err:.1e} evals={rec.n_evals} {dt:.1f}s"))
    assert all(oks)


def test_c2_twirl_correctness(accept):
    t0 = time.perf_counter()
    models = [OverRotation(0.02)]
    for phi in np.deg2rad(COHERENT_PHIS_DEG):
        models += [XIRotation(phi), IZRotation(phi), RingCrosstalk(phi)]
    worst_off = worst_brute = 0.0
    cptp = True
    for m in models:
        _, r = error_channel(m, 4)
        ch = ChannelPTM(r)
        tw = twirl_ptm(ch)
        worst_off = max(worst_off, np.abs(tw.matrix - np.diag(np.diag(tw.matrix))).max())
        worst_brute = max(worst_brute, np.abs(tw.matrix - twirl_ptm_bruteforce(ch).matrix).max())
        cptp &= tw.is_cptp()
    dt = time.perf_counter() - t0
    ok = worst_off < TWIRL_TOL and worst_brute < TWIRL_TOL and cptp and dt < TWIRL_SECONDS
    accept(2, ok, f"{len(models)} channels: off-diag={worst_off:.1e} vs brute force={worst_brute:.1e} "
                  f"cptp={cptp} {dt:.1f}s")
    assert ok


def test_c3_exhaustive_dressing_matches_infinite_twirl(accept):
    c = Circuit(2, (
        EasyCycle({0: (Gate("ry", (0.7,)),), 1: (Gate("rx", (0.3,)),)}),
        HardCycle(((0, 1),)),
        EasyCycle({0: (Gate("h"),), 1: (Gate("rz", (0.2,)),)}),
    ))
    frames = np.array(list(itertools.product(range(4), range(4))))
    init = basis_state_ptm(0, 2).reshape(-1)
    worst = 0.0
    for m in (OverRotation(0.3), XIRotation(0.2), IZRotation(0.2), RingCrosstalk(0.2), Relaxation(10, 2, 0.2, 0.5)):
        cp = CompiledCircuit(attach_noise(c, (m,)), "ptm", dressed=True)
        avg = cp.run(None, init, (frames[:, :1], frames[:, 1:])).mean(axis=1)
        inf = CompiledCircuit(twirled_noisy_circuit(c, (m,)), "ptm").run(None, init)[:, 0]
        worst = max(worst, np.abs(avg - inf).max())
    ok = worst < DRESSING_TOL
    accept(3, ok, f"max |16-dressing average - infinite twirl| = {worst:.1e}")
    assert ok


@pytest.mark.slow
@pytest.mark.parametrize("model", ["over_rotation", "xi_rotation", "iz_rotation", "crosstalk"])
def test_c4_headline_error_reduction(model, accept):
    ok, detail = _ordering(_ensemble_errors(f"ensemble_{model}.json"))
    accept(4, ok, f"{model}: {detail}")
    assert ok


def test_c5_landscape_restoration(accept):
    t0 = time.perf_counter()
    report = run_experiment(_config("landscape.json"))
    dt = time.perf_counter() - t0
    assert len(report.table.rows) == 21 * 21
    dev = {k: max(abs(v) for v in report.table.column(f"dev_{k}")) for k in ("none", "rc", "zne", "rc_zne")}
    ok = dev["rc_zne"] < min(dev["none"], dev["rc"], dev["zne"]) and dt < LANDSCAPE_SECONDS
    accept(5, ok, " ".join(f"{k}={v:.2e}" for k, v in dev.items()) + f" {dt:.0f}s")
    assert ok


def test_c6_precision_law(accept):
    report = run_experiment(_config("precision.json"))
    t = report.table
    oks = []
    for label in dict.fromkeys(t.column("noise")):
        rows = [r for r in t.rows if r[0] == label]
        n = np.array([r[1] for r in rows], dtype=float)
        std = np.array([r[4] for r in rows])
        c = np.exp(np.mean(np.log(std * np.sqrt(n))))
        dev = float(np.max(np.abs(std / (c / np.sqrt(n)) - 1)))
        model = json.loads(label)[0]["model"]
        oks.append(accept(6, dev <= POWER_LAW_DEVIATION, f"{model}: max deviation from 1/sqrt(N) = {dev:.1%}"))
    assert len(oks) == 3 and all(oks)


@pytest.mark.parametrize("model", ["over_rotation", "xi_rotation", "iz_rotation", "crosstalk"])
def test_c7_linearization(model, accept):
    report = run_experiment(_config(f"linearity_{model}.json"))
    res = report.extra["residuals"]
    nonid = [r for r in res.rows if set(r[0]) != {"I"}]
    better = sum(r[res.columns.index("residual_rc_infinite")] < r[res.columns.index("residual_no_rc")]
                 for r in nonid)
    ok = len(nonid) == 14 and better >= MIN_LINEAR_TERMS
    accept(7, ok, f"{model}: {better}/{len(nonid)} terms")
    assert ok


@pytest.mark.slow
def test_c8_sampling_mode(accept):
    ok, detail = _ordering(_ensemble_errors("ensemble_sampling.json"))
    accept(8, ok, f"over_rotation, 1e5 shots: {detail}")
    assert ok


@pytest.mark.slow
def test_c9_mixed_noise(accept):
    errs = _ensemble_errors("ensemble_mixed_10.json")
    ok = errs["rc+zne"] < errs["none"]
    accept(9, ok, f"10% coherent: rc+zne={errs['rc+zne']:.2e} none={errs['none']:.2e}")
    assert ok


REPLAY = {
    "ensemble_sampling.json": {"n_trials": 2, "rc_mode": "finite", "n_rand": 4,
                               "optimizer": {"method": "nelder_mead", "max_evals": 20}},
    "landscape.json": {"resolution": 4},
    "precision.json": {"repeats": 4, "n_rand_list": [2, 4]},
    "linearity_crosstalk.json": {"n_rand": 3},
    "curve.json": {"n_trials": 1, "bonds": [0.5, 1.5], "rc_mode": "finite", "n_rand": 3,
                   "optimizer": {"method": "powell", "max_evals": 15}},
    "calibrate.json": {},
    "twirl_inspect.json": {},
}


def test_c10_determinism(tmp_path, accept, capsys):
    identical = []
    for name, overrides in REPLAY.items():
        cfg = tmp_path / name
        cfg.write_text(json.dumps({**json.loads((CONFIGS / name).read_text()), **overrides}))
        kind = json.loads(cfg.read_text())["kind"]
        runs = []
        for k, workers in enumerate((1, 2, 1)):
            out = tmp_path / f"{cfg.stem}_{k}" / "out.csv"
            assert main([kind, "--config", str(cfg), "--out", str(out), "--workers", str(workers)]) == 0
            runs.append({p.name: p.read_bytes() for p in sorted(out.parent.iterdir())})
        Table.from_csv(runs[0]["out.csv"].decode())
        identical.append(runs[0] == runs[1] == runs[2])
    capsys.readouterr()
    ok = all(identical)
    accept(10, ok, f"{sum(identical)}/{len(identical)} experiments byte-identical over 3 runs (workers 1, 2, 1)")
    assert ok
