"""Regenerate the bundled molecular integral fixtures with PySCF.

    python scripts/generate_fixtures.py            # H2 sweep
    python scripts/generate_fixtures.py --lih      # also LiH (stretch)

PySCF is only needed here, not by the package.  Integrals are written in the
annihilators-first convention read by ``twirlzne.molham.parse_integrals``;
the normal-ordered second-quantized Hamiltonian is rewritten into that form
by explicit anticommutation.  HF and FCI totals are stored in
``references.json`` next to the integral files.
"""

import argparse
import json
from pathlib import Path

from pyscf import ao2mo, fci, gto, scf

DATA = Path(__file__).resolve().parents[1] / "src" / "twirlzne" / "data"
H2_BONDS = [0.3, 0.5, 0.7414, 1.0, 1.5, 2.0, 2.5]
LIH_BONDS = [1.0, 1.5949, 2.5]


def anti_normal_order(ops, coeff, out):
    """Rewrite a product of ladder ops so all annihilators precede creators."""
    for k in range(len(ops) - 1):
        (i, di), (j, dj) = ops[k], ops[k + 1]
        if di and not dj:
            swapped = ops[:k] + [(j, dj), (i, di)] + ops[k + 2:]
            anti_normal_order(swapped, -coeff, out)
            if i == j:
                anti_normal_order(ops[:k] + ops[k + 2:], coeff, out)
            return
    key = tuple(ops)
    out[key] = out.get(key, 0.0) + coeff


def spin_orbital_hamiltonian(h1, eri):
    """Normal-ordered terms {ops: coeff} over interleaved spin-orbitals."""
    norb = h1.shape[0]
    terms = {}
    for p in range(norb):
        for q in range(norb):
            if abs(h1[p, q]) < 1e-14:
                continue
            for s in range(2):
                key = ((2 * p + s, True), (2 * q + s, False))
                terms[key] = terms.get(key, 0.0) + h1[p, q]
    # 1/2 sum (pr|qs) a+_p a+_q a_s a_r  with chemists' notation (pr|qs)
    for p in range(norb):
        for q in range(norb):
            for r in range(norb):
                for s in range(norb):
                    v = eri[p, r, q, s]
                    if abs(v) < 1e-14:
                        continue
                    for a in range(2):
                        for b in range(2):
                            P, Q, R, S = 2 * p + a, 2 * q + b, 2 * r + a, 2 * s + b
                            if P == Q or R == S:
                                continue
                            key = ((P, True), (Q, True), (S, False), (R, False))
                            terms[key] = terms.get(key, 0.0) + 0.5 * v
    return terms


def molecule(atom, basis="sto-3g"):
    mol = gto.M(atom=atom, basis=basis, unit="Angstrom", verbose=0)
    mf = scf.RHF(mol)
    mf.conv_tol = 1e-12
    mf.kernel()
    c = mf.mo_coeff
    h1 = c.T @ mf.get_hcore() @ c
    eri = ao2mo.restore(1, ao2mo.kernel(mol, c), c.shape[1])
    e_fci = fci.FCI(mf).kernel()[0]
    return mol, mf, h1, eri, e_fci


def write_ints(path, h1, eri, nelec, enuc):
    norm = {}
    for key, coeff in spin_orbital_hamiltonian(h1, eri).items():
        anti_normal_order(list(key), coeff, norm)
    lines = [f"norb {2 * h1.shape[0]} nelec {nelec} enuc {float(enuc)!r}"]
    for key in sorted(norm, key=lambda k: (len(k), k)):
        v = float(norm[key])
        if abs(v) < 1e-14:
            continue
        idx = " ".join(str(i) for i, _ in key)
        order = len(key) // 2
        lines.append(f"{order} {idx} {v!r}" if idx else f"0 {v!r}")
    path.write_text("\n".join(lines) + "\n")


def main():
    ap = argparse.ArgumentParser()
    ap.add_argument("--lih", action="store_true")
    args = ap.parse_args()
    refs_path = DATA / "references.json"
    refs = json.loads(refs_path.read_text()) if refs_path.exists() else {}
    jobs = [("h2", b, f"H 0 0 0; H 0 0 {b}") for b in H2_BONDS]
    if args.lih:
        jobs += [("lih", b, f"Li 0 0 0; H 0 0 {b}") for b in LIH_BONDS]
    for name, bond, atom in jobs:
        mol, mf, h1, eri, e_fci = molecule(atom)
        write_ints(DATA / f"{name}_{bond:g}.ints", h1, eri, mol.nelectron, mol.energy_nuc())
        refs.setdefault(name, {})[f"{bond:g}"] = {"hf": float(mf.e_tot), "fci": float(e_fci), "enuc": float(mol.energy_nuc())}
        print(f"{name} {bond:g}: HF {mf.e_tot:.10f}  FCI {e_fci:.10f}")
    refs_path.write_text(json.dumps(refs, indent=2, sort_keys=True) + "\n")


if __name__ == "__main__":
    main()
