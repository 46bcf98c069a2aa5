"""Shared oracles for the test suite.

The main tool is a dense Pauli-string builder: operators are assembled in
the full 2^(chains * N) spin space with explicit Kronecker products and
then restricted to a SectorBasis. This is slow and memory-hungry but
completely independent of the sparse construction code under test.
"""

import numpy as np

I2 = np.eye(2)
SX = np.array([[0.0, 1.0], [1.0, 0.0]])
SY = np.array([[0.0, -1.0j], [1.0j, 0.0]])
SZ = np.diag([1.0, -1.0])
NUM = np.diag([0.0, 1.0])  # spin down = one excitation


def pauli_string(n_spins: int, ops: dict) -> np.ndarray:
    """Kronecker product with the given single-site operators inserted;
    spin 0 is the most significant factor."""
    out = np.array([[1.0]], dtype=np.complex128)
    for q in range(n_spins):
        out = np.kron(out, ops.get(q, I2))
    return out


def dense_xy_ring(n_spins: int, sites: list) -> np.ndarray:
    """(1/2) sum over the ring of (x x + y y) on the given spin indices,
    taken cyclically."""
    n = len(sites)
    h = np.zeros((2**n_spins, 2**n_spins), dtype=np.complex128)
    for j in range(n):
        a, b = sites[j], sites[(j + 1) % n]
        h += 0.5 * (pauli_string(n_spins, {a: SX, b: SX})
                    + pauli_string(n_spins, {a: SY, b: SY}))
    return h


def dense_ancilla_ring(n_spins: int, sites: list, m: float) -> np.ndarray:
    n = len(sites)
    h = np.zeros((2**n_spins, 2**n_spins), dtype=np.complex128)
    pref = 1.0 / (4.0 * m)
    for j in range(n):
        a, b = sites[j], sites[(j + 1) % n]
        h += pref * (np.eye(2**n_spins) - pauli_string(n_spins, {a: SZ}))
        h -= pref * 0.5 * (pauli_string(n_spins, {a: SX, b: SX})
                           + pauli_string(n_spins, {a: SY, b: SY}))
    return h


def spin_index(chain: int, site: int, n_sites: int) -> int:
    return chain * n_sites + site


def config_to_fock(cfg, n_chains: int, n_sites: int) -> int:
    """Full-space basis index of a sector configuration (spin 0 is the MSB)."""
    total = n_chains * n_sites
    idx = 0
    for c, occ in enumerate(cfg):
        for s in occ:
            idx |= 1 << (total - 1 - spin_index(c, s, n_sites))
    return idx


def restrict_to_sector(full: np.ndarray, basis) -> np.ndarray:
    """Matrix elements of a full-space operator between sector configurations."""
    layout = basis.layout
    n_chains = len(layout.chains)
    n = layout.n_sites
    fock = [config_to_fock(basis.config(i), n_chains, n)
            for i in range(basis.dimension)]
    return full[np.ix_(fock, fock)]
