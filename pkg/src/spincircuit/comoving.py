"""Momentum-block reduction for full-ring ancilla gate dynamics.

All the expensive dynamics in this package involve at most two mobile rail
excitations coupled to one ancilla ring, with every added term spanning the
whole ring. The total Hamiltonian then commutes with the simultaneous
one-site shift of all chains, and the problem splits into momentum blocks
in a frame comoving with the first rail excitation:

* one mobile particle: block p has dimension D (the truncated ancilla
  sector size), with Hamiltonian
      exp(-i theta_p) S^-1 + exp(+i theta_p) S + H_anc + c * (toggle at
      relative site 0),
  where S shifts the relative ancilla configuration and theta_p = 2 pi p/N;

* two mobile particles (one per rail): block P has dimension N * D over
  (relative separation y, relative ancilla configuration).

Blocks are small enough to diagonalize densely, which sidesteps the
stiffness of the gap regime (spectral scale 1/m > 2 N^2) entirely. The
generic sparse path in :mod:`spincircuit.propagate` provides the
cross-check at small N.
"""

from __future__ import annotations

from dataclasses import dataclass
from itertools import combinations

import numpy as np
import scipy.sparse as sp

WEIGHT_CUTOFF = 1e-14


class AncRegister:
    """Truncated ancilla configuration register (particle count <= k_max)."""

    def __init__(self, n: int, k_max: int):
        self.n = n
        self.k_max = k_max
        states: list[tuple[int, ...]] = []
        for k in range(k_max + 1):
            states.extend(combinations(range(n), k))
        self.states = states
        self.index = {s: i for i, s in enumerate(states)}
        self.dim = len(states)
        self.vac = self.index[()]

    def uniform_vector(self) -> np.ndarray:
        v = np.zeros(self.dim, dtype=np.complex128)
        for x in range(self.n):
            v[self.index[(x,)]] = 1.0 / np.sqrt(self.n)
        return v

    def h_anc_matrix(self, m: float) -> sp.csr_matrix:
        pref = 1.0 / (4.0 * m)
        rows, cols, vals = [], [], []
        for i, occ in enumerate(self.states):
            occ_set = set(occ)
            if occ:
                rows.append(i)
                cols.append(i)
                vals.append(pref * 2.0 * len(occ))
            for s in occ:
                for d in (1, -1):
                    t = (s + d) % self.n
                    if t in occ_set:
                        continue
                    j = self.index[tuple(sorted((occ_set - {s}) | {t}))]
                    rows.append(j)
                    cols.append(i)
                    vals.append(-pref)
        return sp.coo_matrix((vals, (rows, cols)), shape=(self.dim, self.dim)).tocsr()

    def shift_matrix(self) -> sp.csr_matrix:
        """Permutation B -> B + 1 (every occupied site shifted by one)."""
        rows = np.empty(self.dim, dtype=np.int64)
        for i, occ in enumerate(self.states):
            rows[i] = self.index[tuple(sorted((x + 1) % self.n for x in occ))]
        return sp.coo_matrix(
            (np.ones(self.dim), (rows, np.arange(self.dim))), shape=(self.dim, self.dim)
        ).tocsr()

    def toggle_matrix(self, site: int, axis: str) -> sp.csr_matrix:
        """Pauli x (or y) on one ancilla site, with truncation drop."""
        rows, cols, vals = [], [], []
        for i, occ in enumerate(self.states):
            occ_set = set(occ)
            creating = site not in occ_set
            target = tuple(sorted(occ_set | {site})) if creating else \
                tuple(x for x in occ if x != site)
            j = self.index.get(target)
            if j is None:
                continue
            if axis == "x":
                amp = 1.0
            else:
                amp = 1.0j if creating else -1.0j
            rows.append(j)
            cols.append(i)
            vals.append(amp)
        return sp.coo_matrix((vals, (rows, cols)), shape=(self.dim, self.dim),
                             dtype=np.complex128).tocsr()

    def doublet_pauli(self, axis: str) -> sp.csr_matrix:
        """X or Y between the vacuum and the uniform one-particle state."""
        u = self.uniform_vector()
        vac = np.zeros(self.dim, dtype=np.complex128)
        vac[self.vac] = 1.0
        if axis == "x":
            mat = np.outer(vac, u.conj()) + np.outer(u, vac.conj())
        else:
            mat = -1j * np.outer(vac, u.conj()) + 1j * np.outer(u, vac.conj())
        return sp.csr_matrix(mat)


@dataclass(frozen=True)
class RingCoupling:
    """One site-coupling term: strength times an x- or y-toggle of the
    ancilla site adjacent to the mobile particle."""

    strength: float
    axis: str


def one_particle_block(reg: AncRegister, p: int, m: float,
                       couplings: tuple[RingCoupling, ...],
                       effective: bool = False) -> np.ndarray:
    """Dense comoving Hamiltonian of momentum block p for a single rail
    excitation coupled to the ancilla.

    ``effective`` replaces the site couplings by their ground-doublet
    projection (net strength / sqrt(N) times the doublet Pauli).
    """
    theta = 2.0 * np.pi * p / reg.n
    shift = reg.shift_matrix()
    h = np.exp(-1j * theta) * shift.getH() + np.exp(1j * theta) * shift
    h = h + reg.h_anc_matrix(m)
    for cpl in couplings:
        if effective:
            h = h + (cpl.strength / np.sqrt(reg.n)) * reg.doublet_pauli(cpl.axis)
        else:
            h = h + cpl.strength * reg.toggle_matrix(0, cpl.axis)
    return h.toarray()


def two_particle_block(reg: AncRegister, p_total: int, m: float,
                       c1: RingCoupling, c2: RingCoupling,
                       effective: bool = False) -> np.ndarray:
    """Dense comoving Hamiltonian of total-momentum block P for one
    excitation on each rail (relative separation y) plus the ancilla.

    Index layout: y * D + b.
    """
    n, d = reg.n, reg.dim
    dim = n * d
    theta = 2.0 * np.pi * p_total / n
    shift = reg.shift_matrix()
    h_anc = reg.h_anc_matrix(m)
    rows, cols, vals = [], [], []

    def add_block(y_to: int, y_from: int, mat: sp.spmatrix, scale: complex):
        coo = sp.coo_matrix(mat)
        rows.extend(y_to * d + coo.row)
        cols.extend(y_from * d + coo.col)
        vals.extend(scale * coo.data)

    eye = sp.identity(d, format="coo")
    for y in range(n):
        # particle 1 hops drag the comoving frame
        add_block((y - 1) % n, y, shift.getH(), np.exp(-1j * theta))
        add_block((y + 1) % n, y, shift, np.exp(1j * theta))
        # particle 2 hops change only the separation
        add_block((y - 1) % n, y, eye, 1.0)
        add_block((y + 1) % n, y, eye, 1.0)
        add_block(y, y, h_anc, 1.0)
        if effective:
            net = c1.strength + c2.strength
            if net != 0.0:
                add_block(y, y, reg.doublet_pauli(c1.axis), net / np.sqrt(n))
        else:
            add_block(y, y, reg.toggle_matrix(0, c1.axis), c1.strength)
            add_block(y, y, reg.toggle_matrix(y, c2.axis), c2.strength)
    mat = sp.coo_matrix((vals, (rows, cols)), shape=(dim, dim)).tocsr()
    return mat.toarray()


class BlockPropagator:
    """Exact evolution within one momentum block via dense diagonalization."""

    def __init__(self, h: np.ndarray):
        defect = float(np.max(np.abs(h - h.conj().T)))
        if defect > 1e-12:
            raise ValueError(f"block Hamiltonian not Hermitian (defect {defect:g})")
        self.evals, self.evecs = np.linalg.eigh(h)

    def apply(self, vec: np.ndarray, t: float) -> np.ndarray:
        c = self.evecs.conj().T @ vec
        return self.evecs @ (np.exp(-1j * self.evals * t) * c)


def momentum_amplitudes(site_amps: np.ndarray) -> np.ndarray:
    """Coefficients over momentum eigenstates of a one-excitation chain state."""
    n = len(site_amps)
    return np.fft.fft(site_amps) / np.sqrt(n)


def ring_energy(n: int, p: np.ndarray | int) -> np.ndarray | float:
    return 2.0 * np.cos(2.0 * np.pi * np.asarray(p) / n)


def two_particle_initial(reg: AncRegister, p_total: int, g1: np.ndarray,
                         g2: np.ndarray, anc_vec: np.ndarray,
                         free_time: float = 0.0) -> np.ndarray:
    """Block-P component of |packet 1> |packet 2> |anc_vec>, optionally
    free-evolved for ``free_time`` (used to build reference states)."""
    n = reg.n
    y = np.arange(n)
    pp = np.arange(n)
    coef = g1[(p_total - pp) % n] * g2[pp]
    if free_time:
        coef = coef * np.exp(-1j * (ring_energy(n, (p_total - pp) % n)
                                    + ring_energy(n, pp)) * free_time)
    profile = (np.exp(2j * np.pi * np.outer(y, pp) / n) @ coef) / np.sqrt(n)
    return np.kron(profile, anc_vec)
