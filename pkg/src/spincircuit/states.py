"""Momentum eigenstates, Gaussian packets, dual-rail logical states, readout.

All constructors return unit-norm vectors over a SectorBasis. Positions live
on a ring, so centers and widths are circular statistics.
"""

from __future__ import annotations

import csv
import math
from dataclasses import dataclass, field

import numpy as np

from .basis import ChainLayout, ChainRole, SectorBasis
from .operators import projector_ground_doublet

NORM_TOL = 1e-12
IMAGE_WEIGHT_CUTOFF = 1e-16


class StateError(Exception):
    pass


@dataclass(frozen=True)
class PacketParams:
    """Gaussian packet: center x0 (sites, mod N), carrier mode p0, width dx.

    The momentum width is always the conjugate N / (2 pi dx).
    """

    x0: float
    p0: int
    dx: float

    def __post_init__(self):
        if self.dx <= 0:
            raise ValueError("packet width must be positive")

    def dp(self, n_sites: int) -> float:
        return n_sites / (2.0 * math.pi * self.dx)


def default_packet_width(n_sites: int) -> int:
    """The dispersion-optimal width scale, ceil(N^(1/3))."""
    return max(1, math.ceil(n_sites ** (1.0 / 3.0) - 1e-9))


class StateVector:
    def __init__(self, basis: SectorBasis, amplitudes: np.ndarray, normalize: bool = False):
        amplitudes = np.asarray(amplitudes, dtype=np.complex128)
        if amplitudes.shape != (basis.dimension,):
            raise StateError("amplitude vector does not match basis dimension")
        nrm = np.linalg.norm(amplitudes)
        if normalize:
            if nrm == 0:
                raise StateError("cannot normalize the zero vector")
            amplitudes = amplitudes / nrm
        elif abs(nrm - 1.0) > NORM_TOL:
            raise StateError(f"state is not normalized (norm {nrm!r})")
        self.basis = basis
        self.basis_hash = basis.hash
        self.amplitudes = amplitudes

    def norm(self) -> float:
        return float(np.linalg.norm(self.amplitudes))

    def overlap(self, other: "StateVector") -> complex:
        if other.basis_hash != self.basis_hash:
            raise StateError("basis mismatch in overlap")
        return complex(np.vdot(self.amplitudes, other.amplitudes))

    def save(self, path) -> None:
        np.savez(path, basis_hash=self.basis_hash, amplitudes=self.amplitudes)

    @classmethod
    def load(cls, path, basis: SectorBasis) -> "StateVector":
        data = np.load(path)
        if str(data["basis_hash"]) != basis.hash:
            raise StateError("state file basis hash does not match the given basis")
        return cls(basis, data["amplitudes"])

    def dump_csv(self, path) -> None:
        """Per chain and site: single-excitation amplitude (all other chains in
        vacuum) and the marginal excitation probability."""
        layout = self.basis.layout
        n = layout.n_sites
        marg = excitation_marginals(self)
        with open(path, "w", newline="") as fh:
            writer = csv.writer(fh)
            writer.writerow(["chain", "site", "prob_marginal", "abs_amp_single", "phase_single"])
            for c, chain in enumerate(layout.chains):
                for x in range(n):
                    cfg = tuple((x,) if k == c else () for k in range(len(layout.chains)))
                    try:
                        amp = self.amplitudes[self.basis.index_of(cfg)]
                    except KeyError:
                        amp = 0.0j
                    writer.writerow([
                        chain.ident, x, f"{marg[c, x]:.17g}",
                        f"{abs(amp):.17g}", f"{float(np.angle(amp)):.17g}",
                    ])


def product_state(basis: SectorBasis, local_vectors: dict[str, np.ndarray]) -> StateVector:
    """Tensor product of per-chain local-sector vectors.

    Chains not mentioned are placed in the vacuum.
    """
    layout = basis.layout
    vec = np.ones(1, dtype=np.complex128)
    for c, chain in enumerate(layout.chains):
        if chain.ident in local_vectors:
            local = np.asarray(local_vectors[chain.ident], dtype=np.complex128)
            if local.shape != (basis.dims[c],):
                raise StateError(f"local vector for {chain.ident!r} has wrong length")
        else:
            local = np.zeros(basis.dims[c], dtype=np.complex128)
            try:
                local[basis.local_index[c][()]] = 1.0
            except KeyError:
                raise StateError(f"chain {chain.ident!r} cannot be in vacuum in this sector")
        vec = np.kron(vec, local)
    return StateVector(basis, vec, normalize=True)


def single_particle_vector(basis: SectorBasis, chain_id: str,
                           site_amps: np.ndarray) -> np.ndarray:
    """Local-sector vector with amplitude site_amps[x] on the one-excitation-
    at-x configuration of the chain."""
    c = basis.layout.chain_index(chain_id)
    n = basis.layout.n_sites
    local = np.zeros(basis.dims[c], dtype=np.complex128)
    table = basis.local_index[c]
    for x in range(n):
        key = (x,)
        if key not in table:
            raise StateError(f"chain {chain_id!r} sector does not allow one excitation")
        local[table[key]] = site_amps[x]
    return local


def momentum_site_amplitudes(n: int, p: int) -> np.ndarray:
    x = np.arange(n)
    return np.exp(2j * np.pi * p * x / n) / np.sqrt(n)


def packet_site_amplitudes(n: int, params: PacketParams) -> np.ndarray:
    """Wrapped-Gaussian envelope with carrier phase, unnormalized.

    Image terms are added until their weight falls below 1e-16.
    """
    x = np.arange(n, dtype=float)
    amps = np.zeros(n, dtype=np.complex128)
    carrier = np.exp(2j * np.pi * params.p0 * x / n)
    alpha = 0
    while True:
        added = 0.0
        for a in ((alpha, -alpha) if alpha else (0,)):
            env = np.exp(-((a * n + x - params.x0) ** 2) / (2.0 * params.dx**2))
            amps += carrier * env
            added = max(added, float(env.max()))
        if alpha and added < IMAGE_WEIGHT_CUTOFF:
            break
        alpha += 1
    return amps


def packet_momentum_amplitudes(n: int, params: PacketParams) -> np.ndarray:
    """Coefficients over momentum eigenstates: wrapped Gaussian of width
    dp around p0, with phase exp(-2 pi i p x0 / N)."""
    p = np.arange(n, dtype=float)
    dp = params.dp(n)
    amps = np.zeros(n, dtype=np.complex128)
    carrier = np.exp(-2j * np.pi * p * params.x0 / n)
    alpha = 0
    while True:
        added = 0.0
        for a in ((alpha, -alpha) if alpha else (0,)):
            env = np.exp(-((a * n + p - params.p0) ** 2) / (2.0 * dp**2))
            amps += carrier * env
            added = max(added, float(env.max()))
        if alpha and added < IMAGE_WEIGHT_CUTOFF:
            break
        alpha += 1
    return amps / np.linalg.norm(amps)


def momentum_eigenstate(basis: SectorBasis, chain_id: str, p: int) -> StateVector:
    n = basis.layout.n_sites
    if not 0 <= p < n:
        raise StateError(f"momentum index {p} out of range for N={n}")
    local = single_particle_vector(basis, chain_id, momentum_site_amplitudes(n, p))
    return product_state(basis, {chain_id: local})


def gaussian_packet(basis: SectorBasis, chain_id: str, params: PacketParams) -> StateVector:
    n = basis.layout.n_sites
    local = single_particle_vector(basis, chain_id, packet_site_amplitudes(n, params))
    return product_state(basis, {chain_id: local})


def uniform_single_excitation(basis: SectorBasis, chain_id: str) -> StateVector:
    n = basis.layout.n_sites
    local = single_particle_vector(basis, chain_id, np.full(n, 1.0 / np.sqrt(n)))
    return product_state(basis, {chain_id: local})


def logical_state(basis: SectorBasis, qubit: int, bit: int,
                  params: PacketParams) -> StateVector:
    """Dual-rail logical basis state: the packet rides rail ``bit`` of the
    qubit's pair; every other chain is in vacuum."""
    if bit not in (0, 1):
        raise StateError("bit must be 0 or 1")
    pairs = basis.layout.rail_pairs()
    if not 0 <= qubit < len(pairs):
        raise StateError(f"no qubit {qubit} in layout")
    chain_id = pairs[qubit][bit]
    return gaussian_packet(basis, chain_id, params)


@dataclass
class QubitReadout:
    p0: float
    p1: float
    p_leak: float


@dataclass
class LogicalReadout:
    qubits: list[QubitReadout]
    packet_centers: dict[str, tuple[float | None, float]]
    ancilla_return_fidelity: float | None


def excitation_marginals(state: StateVector) -> np.ndarray:
    """(chain, site) matrix of excitation probabilities."""
    layout = state.basis.layout
    out = np.zeros((len(layout.chains), layout.n_sites))
    probs = np.abs(state.amplitudes) ** 2
    for i in range(state.basis.dimension):
        cfg = state.basis.config(i)
        w = probs[i]
        if w == 0.0:
            continue
        for c, occ in enumerate(cfg):
            for x in occ:
                out[c, x] += w
    return out


def packet_center(state: StateVector, chain_id: str) -> tuple[float | None, float]:
    """Circular mean and standard deviation of the excitation position on a
    chain, in sites. Center is None when the distribution has no resultant
    (symmetric or empty)."""
    layout = state.basis.layout
    c = layout.chain_index(chain_id)
    n = layout.n_sites
    w = excitation_marginals(state)[c]
    total = w.sum()
    if total < 1e-12:
        raise StateError(f"no excitation weight on chain {chain_id!r}")
    w = w / total
    z = np.sum(w * np.exp(2j * np.pi * np.arange(n) / n))
    r = abs(z)
    if r < 1e-6:
        return None, n / np.sqrt(12.0)  # center undefined; near-uniform spread
    center = (np.angle(z) * n / (2.0 * np.pi)) % n
    width = np.sqrt(max(0.0, -2.0 * np.log(r))) * n / (2.0 * np.pi)
    return float(center), float(width)


def readout(state: StateVector, layout: ChainLayout | None = None) -> LogicalReadout:
    """Number-operator readout of every dual-rail qubit plus leakage and
    ancilla bookkeeping.

    The state is first projected onto the ancilla ground doublet; leakage
    per qubit is whatever weight is not a clean one-excitation pattern on
    its rail pair after that projection.
    """
    basis = state.basis
    layout = layout or basis.layout
    psi = state.amplitudes
    anc_ids = [c.ident for c in layout.chains if c.role is ChainRole.ANCILLA]
    anc_return = None
    for anc in anc_ids:
        p0 = projector_ground_doublet(basis, anc)
        psi = p0.matrix.dot(psi)
    if anc_ids:
        c = layout.chain_index(anc_ids[0])
        vac_weight = 0.0
        for i in range(basis.dimension):
            if len(basis.config(i)[c]) == 0:
                vac_weight += abs(state.amplitudes[i]) ** 2
        anc_return = float(vac_weight)

    probs = np.abs(psi) ** 2
    qubits = []
    for rail0, rail1 in layout.rail_pairs():
        a = layout.chain_index(rail0)
        b = layout.chain_index(rail1)
        p0 = p1 = 0.0
        for i in range(basis.dimension):
            cfg = basis.config(i)
            na, nb = len(cfg[a]), len(cfg[b])
            if (na, nb) == (1, 0):
                p0 += probs[i]
            elif (na, nb) == (0, 1):
                p1 += probs[i]
        qubits.append(QubitReadout(float(p0), float(p1), float(1.0 - p0 - p1)))

    centers = {}
    marg = excitation_marginals(state)
    for c, chain in enumerate(layout.chains):
        if marg[c].sum() >= 1e-12:
            centers[chain.ident] = packet_center(state, chain.ident)
    return LogicalReadout(qubits, centers, anc_return)
