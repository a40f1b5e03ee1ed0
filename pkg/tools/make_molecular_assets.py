"""Regenerate the molecular Hamiltonian data files.

Not part of the installed package: needs pyscf and openfermion, which the
package itself never imports.

    python tools/make_molecular_assets.py
"""
from pathlib import Path

import numpy as np
from openfermion import InteractionOperator, bravyi_kitaev, get_fermion_operator
from openfermion.chem.molecular_data import spinorb_from_spatial
from pyscf import ao2mo, gto, scf

OUT = Path(__file__).resolve().parents[1] / "src" / "vqshadow" / "data"

MOLECULES = [
    ("h2_631g_bk.txt", "H 0 0 0; H 0 0 0.735", "6-31g"),
    ("lih_sto3g_bk.txt", "Li 0 0 0; H 0 0 1.6", "sto-3g"),
]


def qubit_hamiltonian(atom, basis):
    mol = gto.M(atom=atom, basis=basis, unit="Angstrom")
    mf = scf.RHF(mol)
    mf.conv_tol = 1e-12
    mf.kernel()
    c = mf.mo_coeff
    h1 = c.T @ mf.get_hcore() @ c
    norb = c.shape[1]
    eri = ao2mo.restore(1, ao2mo.kernel(mol, c), norb)
    # chemist (pq|rs) -> openfermion <pq|sr> ordering
    h2 = np.asarray(eri.transpose(0, 2, 3, 1), order="C")
    one, two = spinorb_from_spatial(h1, h2)
    op = InteractionOperator(mol.energy_nuc(), one, 0.5 * two)
    qop = bravyi_kitaev(get_fermion_operator(op))
    qop.compress(1e-10)
    return qop, 2 * norb, mf.e_tot


def main():
    OUT.mkdir(parents=True, exist_ok=True)
    for fname, atom, basis in MOLECULES:
        qop, nq, e_hf = qubit_hamiltonian(atom, basis)
        lines = []
        for term, coeff in sorted(qop.terms.items()):
            letters = ["I"] * nq
            for q, p in term:
                letters[q] = p
            lines.append(f"{float(np.real(coeff))!r} {''.join(letters)}")
        header = [
            f"# {atom.replace(';', ',')} / {basis} / Bravyi-Kitaev, {nq} qubits, {len(lines)} terms",
            f"# generated by tools/make_molecular_assets.py (pyscf RHF, E_HF = {e_hf:.10f} Ha)",
        ]
        (OUT / fname).write_text("\n".join(header + lines) + "\n")
        print(fname, nq, len(lines))


if __name__ == "__main__":
    main()
