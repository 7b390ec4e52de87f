import itertools

import numpy as np
import pytest
from hypothesis import given
from hypothesis import strategies as st
from scipy.stats import unitary_group

from oracles import (NOISE_CASES, embed, frac_cnot, pauli, relaxation_ptm, rx, rz, sup_kraus, sup_unitary, unitary_infidelity,
                     unvec, vec, zz)
from twirlzne.circuit import Circuit, EasyCycle, Gate, HardCycle
from twirlzne.noisesim import (CALIBRATION, ChannelPTM, IZRotation, ModeError, OverRotation, Relaxation,
                               RingCrosstalk, SingleQubitCrosstalk, XIRotation, attach_noise, basis_state_ptm,
                               calibrated, choi_from_ptm, cnot_noise, crosstalk_pairs, density_to_ptm_vector,
                               easy_noise, error_channel, fractional_cnot, infidelity, mixed_noise,
                               noise_from_json, noise_infidelity, noise_to_json, noise_unitary,
                               pauli_channel_ptm, pauli_error_probabilities, ptm_from_kraus, ptm_vector_to_density,
                               relaxation_channel, ring_neighbors, sample_expectation, simulate, zz_rotation)
from twirlzne.pauli import DenseState, PauliSum, expectation


def ptm_from_sup(s: np.ndarray) -> np.ndarray:
    """``R[a, b] = tr(P_a L(P_b)) / d`` from a column-stacked superoperator."""
    d = int(round(np.sqrt(len(s))))
    n = d.bit_length() - 1
    ps = [pauli("".join(ls)) for ls in itertools.product("IXYZ", repeat=n)]
    return np.array([[np.trace(pa @ unvec(s @ vec(pb))).real / d for pb in ps] for pa in ps])


def random_kraus(rng, n_kraus, dim):
    g = rng.normal(size=(n_kraus * dim, dim)) + 1j * rng.normal(size=(n_kraus * dim, dim))
    q, _ = np.linalg.qr(g)
    return [q[k * dim:(k + 1) * dim] for k in range(n_kraus)]


# --------------------------------------------------------------------------
# PTM machinery


@given(st.integers(0, 2 ** 31), st.integers(1, 2), st.integers(1, 3))
def test_ptm_from_kraus_matches_liouville(seed, n, n_kraus):
    ks = random_kraus(np.random.default_rng(seed), n_kraus, 1 << n)
    r = ptm_from_kraus(ks)
    np.testing.assert_allclose(r, ptm_from_sup(sup_kraus(ks)), atol=1e-12)
    ch = ChannelPTM(r)
    assert ch.is_cptp()
    np.testing.assert_allclose(choi_from_ptm(r), ch.to_choi(), atol=1e-14)
    np.testing.assert_allclose(ChannelPTM.from_choi(ch.to_choi()).matrix, r, atol=1e-12)


def test_non_cptp_is_detected():
    assert not ChannelPTM(np.diag([1.0, 1.0, 1.0, -1.0])).is_cptp()  # transpose-like map
    assert not ChannelPTM(np.diag([0.5, 1.0, 1.0, 1.0])).is_cptp()  # trace decreasing


def test_compose_order():
    a = ChannelPTM.from_unitary(rx(0.3))
    b = ChannelPTM.from_unitary(rz(0.7))
    want = ptm_from_sup(sup_unitary(rz(0.7) @ rx(0.3)))
    np.testing.assert_allclose(b.compose(a).matrix, want, atol=1e-14)


@given(st.integers(0, 2 ** 31))
def test_ptm_vector_round_trip(seed):
    rng = np.random.default_rng(seed)
    g = rng.normal(size=(4, 4)) + 1j * rng.normal(size=(4, 4))
    rho = g @ g.conj().T
    rho /= np.trace(rho)
    v = density_to_ptm_vector(rho)
    np.testing.assert_allclose(v.reshape(-1)[7], np.trace(rho @ pauli("XZ")).real, atol=1e-14)
    np.testing.assert_allclose(ptm_vector_to_density(v), rho, atol=1e-14)


def test_basis_state_ptm():
    v = basis_state_ptm(0b10, 2).reshape(-1)
    rho = np.zeros((4, 4))
    rho[2, 2] = 1
    np.testing.assert_allclose(v, density_to_ptm_vector(rho).reshape(-1))


def test_infidelity_formulas():
    u = unitary_group.rvs(4, random_state=3)
    assert infidelity(ChannelPTM.from_unitary(u)) == pytest.approx(unitary_infidelity(u), abs=1e-14)
    p = 0.01
    dep = ChannelPTM(np.diag([1, 1 - 4 * p / 3, 1 - 4 * p / 3, 1 - 4 * p / 3]))
    assert infidelity(dep) == pytest.approx(2 * p / 3)


def test_pauli_channel_probabilities_round_trip(rng):
    probs = rng.dirichlet(np.ones(16))
    ch = pauli_channel_ptm(probs)
    np.testing.assert_allclose(pauli_error_probabilities(ch), probs, atol=1e-14)
    assert ch.is_cptp() and ch.is_diagonal()


# --------------------------------------------------------------------------
# models


def test_fractional_cnot():
    np.testing.assert_allclose(fractional_cnot(1.0), np.array(
        [[1, 0, 0, 0], [0, 1, 0, 0], [0, 0, 0, 1], [0, 0, 1, 0]]), atol=1e-15)
    np.testing.assert_allclose(fractional_cnot(0.5) @ fractional_cnot(0.5), fractional_cnot(1.0), atol=1e-15)
    np.testing.assert_allclose(fractional_cnot(0.02), frac_cnot(0.02), atol=1e-14)


def test_ring_geometry():
    assert ring_neighbors(0, 4) == (1, 3)
    assert ring_neighbors(0, 2) == (1,)
    assert crosstalk_pairs(0, 1, 4) == [(0, 3), (1, 2)]
    assert crosstalk_pairs(1, 2, 4) == [(1, 0), (2, 3)]
    assert crosstalk_pairs(0, 1, 2) == []


@pytest.mark.parametrize("spec,qubits,where,oracle", [
    (OverRotation(0.02), (0, 1), "post", frac_cnot(0.02)),
    (XIRotation(0.1), (0,), "pre", rx(0.1)),
    (IZRotation(0.1), (1,), "pre", rz(0.1)),
])
def test_noise_unitaries(spec, qubits, where, oracle):
    q, u, w = noise_unitary(spec, (0, 1), 4)
    assert (q, w) == (qubits, where)
    np.testing.assert_allclose(u, oracle, atol=1e-14)


def test_crosstalk_unitary():
    q, u, w = noise_unitary(RingCrosstalk(0.2), (0, 1), 4)
    assert q == (0, 1, 2, 3) and w == "post"
    want = embed(zz(0.2), (0, 3), 4) @ embed(zz(0.2), (1, 2), 4)
    np.testing.assert_allclose(u, want, atol=1e-14)
    np.testing.assert_allclose(zz_rotation(0.2), zz(0.2), atol=1e-15)


def test_single_qubit_crosstalk_placement():
    ops = easy_noise((SingleQubitCrosstalk(0.1),), 4)
    assert [op.qubits for op in ops] == [(0, 1), (1, 2), (2, 3), (3, 0)]
    assert [op.qubits for op in easy_noise((SingleQubitCrosstalk(0.1),), 2)] == [(0, 1)]
    assert not cnot_noise((SingleQubitCrosstalk(0.1),), (0, 1), 4).post
    with pytest.raises(ModeError):
        noise_unitary(SingleQubitCrosstalk(0.1), (0, 1), 4)


@given(st.floats(0.5, 50), st.floats(0.05, 1), st.floats(0, 1), st.floats(1e-4, 3))
def test_relaxation_matches_closed_form(t1, t2_frac, p, t):
    t2 = t2_frac * 2 * t1
    ch = relaxation_channel(Relaxation(t1, t2, p, t))
    np.testing.assert_allclose(ch.matrix, relaxation_ptm(t1, t2, p, t), atol=1e-12)
    assert ch.is_cptp()


@pytest.mark.parametrize("kw", [dict(t1=0, t2=1, p=0, t=1), dict(t1=1, t2=3, p=0, t=1),
                                dict(t1=1, t2=1, p=2, t=1), dict(t1=1, t2=1, p=0, t=0)])
def test_relaxation_validation(kw):
    with pytest.raises(ValueError):
        Relaxation(**kw)


def test_relaxation_attaches_to_both_qubits_after_gate():
    hn = cnot_noise((Relaxation(10, 2, 0, 0.1),), (2, 3), 4)
    assert not hn.pre and [op.qubits for op in hn.post] == [(2,), (3,)]


def test_noise_json_round_trip():
    for spec in (OverRotation(0.02), XIRotation(0.1), IZRotation(0.2), RingCrosstalk(0.3),
                 Relaxation(10, 1.73, 0.1, 0.01), SingleQubitCrosstalk(0.05)):
        assert noise_from_json(noise_to_json(spec)) == spec
    assert noise_from_json({"model": "crosstalk", "phi_deg": 3.6}) == RingCrosstalk(np.deg2rad(3.6))
    with pytest.raises(ValueError):
        noise_from_json({"model": "nope"})


# --------------------------------------------------------------------------
# simulation


def _toy_circuit():
    return Circuit(3, (
        EasyCycle({0: (Gate("h"),), 1: (Gate("ry", (0.4,)),)}),
        HardCycle(((0, 1),)),
        EasyCycle({2: (Gate("rx", (0.9,)),)}),
        HardCycle(((1, 2),)),
        EasyCycle({0: (Gate("s"),)}),
    ))


@pytest.mark.parametrize("models", [
    (OverRotation(0.1),), (XIRotation(0.2),), (IZRotation(0.2),), (RingCrosstalk(0.2),),
    (SingleQubitCrosstalk(0.1),), (Relaxation(10, 2, 0.2, 0.3),),
    (RingCrosstalk(0.1), Relaxation(10, 1.73, 0.0, 0.05)),
])
def test_simulate_matches_liouville_oracle(models):
    c = _toy_circuit()
    n = 3
    s = np.eye(64, dtype=complex)
    nc = attach_noise(c, models)

    def op_sup(op):
        if op.is_unitary:
            return sup_unitary(embed(op.unitary, op.qubits, n))
        # Kraus operators from the Choi matrix of the local channel
        choi = choi_from_ptm(op.ptm)
        w, v = np.linalg.eigh(choi)
        d = 1 << len(op.qubits)
        ks = [np.sqrt(max(x, 0)) * v[:, k].reshape(d, d).T for k, x in enumerate(w) if x > 1e-14]
        return sup_kraus([embed(k, op.qubits, n) for k in ks])

    for k, cyc in enumerate(c.cycles):
        if k % 2 == 0:
            for q, seq in cyc.gates.items():
                for g in seq:
                    s = sup_unitary(embed(g.matrix(), (q,), n)) @ s
            for op in nc.easy[k // 2]:
                s = op_sup(op) @ s
        else:
            hn = nc.hard[k // 2]
            for op in hn.pre:
                s = op_sup(op) @ s
            for cn in cyc.cnots:
                s = sup_unitary(embed(frac_cnot(1.0), cn, n)) @ s
            for op in hn.post:
                s = op_sup(op) @ s
    rho0 = np.zeros((8, 8), dtype=complex)
    rho0[0, 0] = 1
    want = unvec(s @ vec(rho0))
    got = simulate(nc, DenseState.basis("000")).to_density().data
    np.testing.assert_allclose(got, want, atol=1e-12)


def test_unitary_noise_statevector_equals_density():
    c = _toy_circuit()
    nc = attach_noise(c, (OverRotation(0.1), RingCrosstalk(0.2)))
    sv = simulate(nc, DenseState.basis("000"))
    dm = simulate(nc, DenseState.basis("000").to_density())
    assert sv.kind == "statevector" and dm.kind == "density_matrix"
    np.testing.assert_allclose(sv.to_density().data, dm.data, atol=1e-13)


def test_simulate_rejects_unbound(h2_ansatz):
    with pytest.raises(ValueError):
        simulate(attach_noise(h2_ansatz, None), DenseState.basis("0000"))


@pytest.mark.parametrize("name", list(NOISE_CASES))
def test_noisy_h2_energies_frozen(h2, h2_ansatz, frozen, name):
    spec = noise_from_json(NOISE_CASES[name])
    for key, th in (("fixed", [np.deg2rad(8.6), 0, 0]), ("generic", [0.11, -0.23, 0.17])):
        out = simulate(attach_noise(h2_ansatz.bind(th), spec), DenseState.basis("0000"))
        e = expectation(out, h2.hamiltonian) + h2.spec.nuclear_repulsion
        assert e == pytest.approx(frozen["noisy"][name][f"{key}/r1/none"], abs=1e-11)


def test_sampling_is_unbiased_and_seeded():
    h = PauliSum.from_dict({"II": 0.5, "ZI": 0.3, "XX": -0.4})
    psi = DenseState.from_vector(np.array([0.6, 0.0, 0.0, 0.8]))
    exact = expectation(psi, h)
    draws = [sample_expectation(psi, h, 2000, s) for s in range(300)]
    assert np.mean(draws) == pytest.approx(exact, abs=4 * np.std(draws) / np.sqrt(300))
    assert sample_expectation(psi, h, 100, 7) == sample_expectation(psi, h, 100, 7)
    with pytest.raises(ValueError):
        sample_expectation(psi, h, 0, 1)


# --------------------------------------------------------------------------
# calibration


@pytest.mark.parametrize("kind", sorted(CALIBRATION))
def test_calibrated_strengths_frozen(kind, frozen):
    spec = calibrated(kind)
    value = spec.t if kind == "relaxation" else spec.epsilon if kind == "over_rotation" else spec.phi
    assert value == pytest.approx(frozen["calibration"][kind], rel=1e-9)
    assert noise_infidelity(spec) == pytest.approx(1e-3, rel=1e-9)


def test_calibration_infidelity_is_on_gate_support():
    # Rz on the target alone would give 2/3 sin^2; the CNOT's two qubits give 4/5 sin^2
    phi = 0.1
    assert noise_infidelity(IZRotation(phi)) == pytest.approx(0.8 * np.sin(phi / 2) ** 2)
    sup, r = error_channel(IZRotation(phi))
    assert sup == (1,) and r.shape == (4, 4)


def test_error_channel_conjugates_post_noise():
    # CNOT . post = pre-equivalent . CNOT, so the ideal CNOT after the returned channel equals the noisy gate
    sup, r = error_channel(OverRotation(0.1), 2)
    cn = ptm_from_kraus([frac_cnot(1.0)])
    noisy = ptm_from_kraus([frac_cnot(0.1) @ frac_cnot(1.0)])
    np.testing.assert_allclose(cn @ r, noisy, atol=1e-14)


@pytest.mark.parametrize("frac", [0.1, 0.5, 0.9])
def test_mixed_noise_totals(frac):
    models = mixed_noise(frac)
    kinds = [type(m).__name__ for m in models]
    assert kinds == ["Relaxation", "RingCrosstalk"]
    support = (0, 1, 2, 3)
    total = noise_infidelity(models, support=support)
    parts = [noise_infidelity(m, support=support) for m in models]
    assert parts[1] / sum(parts) == pytest.approx(frac, rel=1e-9)
    assert total == pytest.approx(1e-3, rel=2e-3)


def test_calibration_unreachable():
    from twirlzne.noisesim import calibrate_strength

    with pytest.raises(ValueError):
        calibrate_strength(lambda s: OverRotation(s), 0.9, 1.0)
    with pytest.raises(ValueError):
        calibrated("unknown")
