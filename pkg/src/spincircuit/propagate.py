"""Time evolution under sparse Hermitian operators.

The workhorse is an adaptive Lanczos (Krylov) approximation of
exp(-i H t) psi. The first step is sized from a power-iteration estimate of
the spectral norm, which matters in the gap regime where the ancilla terms
carry scale 1/m > 2 N^2. A dense spectral-decomposition oracle is provided
for cross-checks on small problems.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np
from scipy.linalg import eigh_tridiagonal

from .basis import ChainLayout, ChainRole, SectorBasis, SectorSpec, at_most, \
    enumerate_basis, reexpress_indices
from .operators import AncillaParams, SparseOperator, assemble_hamiltonian, h_effective
from .states import StateVector


class EvolveError(Exception):
    pass


@dataclass
class EvolveConfig:
    tolerance: float = 1e-10          # target 2-norm error per unit time
    max_krylov_dim: int = 48
    oracle_threshold: int = 1024      # dense-oracle cross-check size limit
    max_halvings: int = 60

    def __post_init__(self):
        if self.tolerance <= 0:
            raise ValueError("tolerance must be positive")
        if self.max_krylov_dim < 4:
            raise ValueError("max_krylov_dim must be at least 4")


@dataclass
class TruncationEscalation:
    k_sequence: tuple[int, ...] = (1, 2, 3)
    threshold: float = 1e-6

    def __post_init__(self):
        if list(self.k_sequence) != sorted(set(self.k_sequence)):
            raise ValueError("k_sequence must be strictly increasing")


@dataclass
class TruncatedEvolveResult:
    state: StateVector
    achieved_k: int
    converged: bool
    norm_differences: list[float] = field(default_factory=list)


def _lanczos_attempt(matvec, v0: np.ndarray, dt: float, m: int, tol_abs: float):
    """One Krylov step of exp(-i dt H) v0. Returns (result, ok)."""
    dim = v0.shape[0]
    nrm0 = np.linalg.norm(v0)
    V = np.zeros((m, dim), dtype=np.complex128)
    V[0] = v0 / nrm0
    alpha = np.zeros(m)
    beta = np.zeros(m)
    k = 0
    for j in range(m):
        w = matvec(V[j])
        alpha[j] = np.vdot(V[j], w).real
        w = w - alpha[j] * V[j]
        if j > 0:
            w = w - beta[j - 1] * V[j - 1]
        # full reorthogonalization; Krylov dims are small
        w = w - V[: j + 1].T @ (np.conj(V[: j + 1]) @ w)
        b = np.linalg.norm(w)
        k = j + 1
        if b < 1e-14 * max(1.0, abs(alpha[: k]).max()):
            beta[j] = 0.0
            break  # invariant subspace: the small problem is exact
        beta[j] = b
        if j + 1 < m:
            V[j + 1] = w / b
    evals, evecs = eigh_tridiagonal(alpha[:k], beta[: k - 1])
    small = evecs @ (np.exp(-1j * dt * evals) * evecs[0].conj())
    approx = nrm0 * (V[:k].T @ small)
    if beta[k - 1] == 0.0:
        return approx, 0.0, True
    err = 2.0 * nrm0 * beta[k - 1] * abs(small[-1])
    return approx, err, err <= tol_abs


def evolve(h: SparseOperator, psi: StateVector, t: float,
           cfg: EvolveConfig | None = None) -> StateVector:
    """exp(-i H t) psi with adaptive Lanczos stepping."""
    cfg = cfg or EvolveConfig()
    if h.basis_hash != psi.basis_hash:
        raise EvolveError("operator and state bases differ")
    if t == 0.0:
        return StateVector(psi.basis, psi.amplitudes.copy())
    v = psi.amplitudes.copy()
    matvec = h.matrix.dot
    hnorm = h.spectral_norm_estimate()
    dt = abs(t) if hnorm == 0.0 else min(abs(t), max(1.0 / hnorm, 1e-12))
    dt *= np.sign(t) if t != 0 else 1.0
    remaining = t
    halvings = 0
    while abs(remaining) > 0:
        step = remaining if abs(remaining) <= abs(dt) else dt
        tol_abs = cfg.tolerance * abs(step)
        approx, err, ok = _lanczos_attempt(matvec, v, step, cfg.max_krylov_dim, tol_abs)
        if not ok:
            halvings += 1
            if halvings > cfg.max_halvings:
                raise EvolveError("Krylov step failed to converge after 60 halvings")
            dt = dt / 2.0
            continue
        v = approx
        remaining -= step
        if err < 0.1 * tol_abs and abs(step) == abs(dt):
            dt *= 1.5
    return StateVector(psi.basis, v)


class DenseOracle:
    """Full spectral decomposition; exact eigenphases up to eigensolver accuracy."""

    def __init__(self, h: SparseOperator):
        self.basis = h.basis
        self.basis_hash = h.basis_hash
        self.evals, self.evecs = np.linalg.eigh(h.dense())

    def evolve(self, psi: StateVector, t: float) -> StateVector:
        if psi.basis_hash != self.basis_hash:
            raise EvolveError("operator and state bases differ")
        coeffs = self.evecs.conj().T @ psi.amplitudes
        out = self.evecs @ (np.exp(-1j * self.evals * t) * coeffs)
        return StateVector(self.basis, out)


def evolve_dense(h: SparseOperator, psi: StateVector, t: float) -> StateVector:
    return DenseOracle(h).evolve(psi, t)


def _with_ancilla_truncation(basis: SectorBasis, k_max: int) -> SectorBasis:
    cons = []
    for chain, con in zip(basis.layout.chains, basis.spec.constraints):
        cons.append(at_most(k_max) if chain.role is ChainRole.ANCILLA else con)
    return enumerate_basis(basis.layout, SectorSpec(tuple(cons)))


def reexpress(state: StateVector, dst: SectorBasis) -> StateVector:
    """Carry amplitudes over to a basis with a different ancilla truncation.

    Configurations missing from the destination must carry no weight.
    """
    src_idx, dst_idx = reexpress_indices(state.basis, dst)
    out = np.zeros(dst.dimension, dtype=np.complex128)
    out[dst_idx] = state.amplitudes[src_idx]
    lost = 1.0 - float(np.sum(np.abs(state.amplitudes[src_idx]) ** 2))
    if lost > 1e-10:
        raise EvolveError(f"state has weight {lost:g} outside the target sector")
    return StateVector(dst, out, normalize=True)


def evolve_with_truncation(layout: ChainLayout, blocks, psi: StateVector, t: float,
                           ancilla: AncillaParams,
                           cfg: EvolveConfig | None = None,
                           esc: TruncationEscalation | None = None,
                           ) -> TruncatedEvolveResult:
    """Re-run the evolution at increasing ancilla particle-number caps until
    the final states stop moving."""
    cfg = cfg or EvolveConfig()
    esc = esc or TruncationEscalation()
    prev_state = None
    prev_basis = None
    diffs: list[float] = []
    achieved = esc.k_sequence[0]
    for k in esc.k_sequence:
        basis_k = _with_ancilla_truncation(psi.basis, k)
        psi_k = reexpress(psi, basis_k)
        h = assemble_hamiltonian(basis_k, blocks, ancilla=ancilla)
        final = evolve(h, psi_k, t, cfg)
        achieved = k
        if prev_state is not None:
            src_idx, dst_idx = reexpress_indices(prev_basis, basis_k)
            prev_in_k = np.zeros(basis_k.dimension, dtype=np.complex128)
            prev_in_k[dst_idx] = prev_state.amplitudes[src_idx]
            diff = float(np.linalg.norm(final.amplitudes - prev_in_k))
            diffs.append(diff)
            if diff < esc.threshold:
                return TruncatedEvolveResult(final, k, True, diffs)
        prev_state, prev_basis = final, basis_k
    return TruncatedEvolveResult(prev_state, achieved, False, diffs)


def leakage_norm(layout: ChainLayout, blocks, psi_i: StateVector, dt: float,
                 params: AncillaParams, cfg: EvolveConfig | None = None) -> float:
    """2-norm distance between full and doublet-projected evolution of the
    initial packet state over one gate traversal."""
    cfg = cfg or EvolveConfig()
    basis = psi_i.basis
    anc_ids = [c.ident for c in layout.chains if c.role is ChainRole.ANCILLA]
    if len(anc_ids) != 1:
        raise EvolveError("leakage_norm needs exactly one ancilla chain")
    h_full = assemble_hamiltonian(basis, blocks, ancilla=params)
    h_eff = h_effective(basis, h_full, anc_ids[0])
    full = evolve(h_full, psi_i, dt, cfg)
    eff = evolve(h_eff, psi_i, dt, cfg)
    return float(np.linalg.norm(full.amplitudes - eff.amplitudes))
