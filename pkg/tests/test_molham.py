import numpy as np
import pytest

from oracles import annihilator, integral_hamiltonian
from twirlzne.molham import (FermionOperator, IntegralParseError, MoleculeSpec, data_path, fci_energy,
                             fixture_references, h2_geometries, hartree_fock_bits, hartree_fock_state,
                             hf_energy, jordan_wigner, load_h2, load_pauli_sum, load_problem,
                             number_operator, parse_integrals, particle_number_matrix,
                             problem_from_pauli_sum, write_pauli_sum)
from twirlzne.pauli import to_matrix


@pytest.mark.parametrize("n,ops", [
    (3, [(1, True)]),
    (3, [(2, False)]),
    (4, [(0, True), (3, False)]),
    (4, [(2, False), (1, True)]),
    (4, [(3, True), (2, True), (0, False), (1, False)]),
])
def test_jordan_wigner_matches_dense_ladders(n, ops):
    want = np.eye(1 << n, dtype=complex)
    for p, dag in ops:
        a = annihilator(p, n)
        want = want @ (a.conj().T if dag else a)
    got = to_matrix(jordan_wigner(FermionOperator.ladder(n, *ops)))
    np.testing.assert_allclose(got, want, atol=1e-14)


def test_canonical_anticommutation():
    n = 3
    for p in range(n):
        for q in range(n):
            ap = jordan_wigner(FermionOperator.ladder(n, (p, False)))
            aq_dag = jordan_wigner(FermionOperator.ladder(n, (q, True)))
            anti = to_matrix(ap @ aq_dag + aq_dag @ ap)
            np.testing.assert_allclose(anti, np.eye(8) * (p == q), atol=1e-14)


def test_h2_hamiltonian_matches_dense_assembly(h2):
    h, enuc, nelec = integral_hamiltonian(data_path("h2_0.7414.ints"))
    np.testing.assert_allclose(to_matrix(h2.hamiltonian), h, atol=1e-12)
    assert h2.spec.nuclear_repulsion == enuc
    assert h2.spec.n_electrons == nelec == 2


def test_h2_structure(h2, frozen):
    assert h2.n_qubits == 4
    assert len(h2.hamiltonian) == frozen["h2"]["n_terms"] == 15
    assert h2.hamiltonian.is_hermitian()
    assert all(complex(c).imag == 0 for c in h2.hamiltonian.terms.values())


def test_h2_energies_frozen(h2, frozen):
    assert fci_energy(h2) == pytest.approx(frozen["h2"]["fci"], abs=1e-10)
    assert frozen["h2"]["fci_power_iteration"] == pytest.approx(frozen["h2"]["fci"], abs=1e-9)
    assert hf_energy(h2) == pytest.approx(frozen["h2"]["hf"], abs=1e-10)
    assert fci_energy(h2) == pytest.approx(-1.1372701747, abs=1e-9)
    assert hf_energy(h2) == pytest.approx(-1.1166843871, abs=1e-9)


@pytest.mark.parametrize("bond", h2_geometries())
def test_fixture_references(bond):
    p = load_h2(bond)
    ref = fixture_references()["h2"][f"{bond:g}"]
    assert fci_energy(p) == pytest.approx(ref["fci"], abs=1e-8)
    assert hf_energy(p) == pytest.approx(ref["hf"], abs=1e-8)
    assert p.reference == ref


def test_particle_number_conserved(h2):
    n_op = particle_number_matrix(4)
    h = to_matrix(h2.hamiltonian)
    np.testing.assert_allclose(h @ n_op - n_op @ h, 0, atol=1e-12)
    np.testing.assert_allclose(np.diag(n_op).real, [bin(k).count("1") for k in range(16)])


def test_number_operator_is_sum_of_occupations():
    m = to_matrix(jordan_wigner(number_operator(2)))
    np.testing.assert_allclose(np.diag(m).real, [0, 1, 1, 2])


def test_hartree_fock_state(h2):
    assert hartree_fock_bits(h2.spec) == 0b1100
    assert hartree_fock_state(h2.spec).data[0b1100] == 1


def test_fermion_operator_adjoint_and_errors():
    op = FermionOperator.ladder(3, (0, True), (2, False), coeff=2j)
    np.testing.assert_allclose(to_matrix(jordan_wigner(op.adjoint())),
                               to_matrix(jordan_wigner(op)).conj().T, atol=1e-14)
    with pytest.raises(IndexError):
        FermionOperator.ladder(2, (2, True))


def test_parse_comments_and_constant():
    text = "# H-like toy\nnorb 2 nelec 1 enuc 0.5\n0 0.25\n1 0 0 -1.0  # occupied\n"
    spec, op = parse_integrals(text, name="toy")
    assert spec == MoleculeSpec("toy", spec.geometry, 1, 2, 0.5)
    m = to_matrix(jordan_wigner(op))
    # a_0 a_0^+ is one on |0> of orbital 0
    assert m[0, 0] == pytest.approx(0.25 - 1.0)
    assert m[0b10, 0b10] == pytest.approx(0.25)


@pytest.mark.parametrize("text,msg", [
    ("", "missing header"),
    ("norb 2 nelec 1\n", "header"),
    ("norb 2 nelec x enuc 0\n", "bad header"),
    ("norb 2 nelec 1 enuc 0\n1 0 -1.0\n", ":2: malformed"),
    ("norb 2 nelec 1 enuc 0\n3 0 0 1.0\n", "malformed"),
    ("norb 2 nelec 1 enuc 0\n1 0 5 1.0\n", "out of range"),
    ("norb 2 nelec 3 enuc 0\n", "exceeds"),
])
def test_parse_errors(text, msg):
    with pytest.raises(IntegralParseError, match=msg):
        parse_integrals(text)


def test_load_problem_names_geometry(tmp_path):
    src = data_path("h2_1.ints").read_text()
    path = tmp_path / "h2_1.ints"
    path.write_text(src)
    p = load_problem(path)
    assert p.spec.name == "h2" and p.spec.geometry == 1.0


def test_pauli_sum_file_round_trip(tmp_path, h2):
    path = tmp_path / "h.txt"
    write_pauli_sum(h2.hamiltonian, path)
    assert load_pauli_sum(path) == h2.hamiltonian
    p = problem_from_pauli_sum(path, 2, h2.spec.nuclear_repulsion)
    assert fci_energy(p) == pytest.approx(fci_energy(h2), abs=1e-12)
