"""Hamiltonians and coupling operators as sparse matrices on a SectorBasis.

All builders walk the enumerated configurations directly, so operators come
out exactly number-conserving where the underlying terms are. Couplings that
change the ancilla excitation count silently drop matrix elements that leave
the truncated sector; that is the truncation knob, not an error.
"""

from __future__ import annotations

import json
import struct
import warnings
from dataclasses import dataclass

import numpy as np
import scipy.sparse as sp

from .basis import Chain, ChainLayout, ChainRole, SectorBasis

ENTRY_DROP = 1e-15
HERMITICITY_TOL = 1e-14

FULL_RING = None  # sentinel for site_range spanning the whole ring


class OperatorError(Exception):
    pass


@dataclass(frozen=True)
class GateBlock:
    """One interaction zone on the chains.

    kind: "z", "x", "vx", "vy", or "cphase_nonlocal".
    chains: identifiers the block couples (1 for z; 2 otherwise).
    site_range: (start, stop) taken mod N, or None for the full ring.
    strength: the added-term coefficient (a phase rate for z/x/cphase,
    a site-coupling strength for vx/vy).
    """

    kind: str
    chains: tuple[str, ...]
    strength: float
    site_range: tuple[int, int] | None = FULL_RING

    def __post_init__(self):
        if self.kind not in ("z", "x", "vx", "vy", "cphase_nonlocal"):
            raise ValueError(f"unknown gate block kind {self.kind!r}")
        n_expected = 1 if self.kind == "z" else 2
        if len(self.chains) != n_expected:
            raise ValueError(f"{self.kind} block couples {n_expected} chain(s)")


@dataclass(frozen=True)
class AncillaParams:
    """Ancilla chain parameters: Hamiltonian prefactor 1/(4m), site coupling e."""

    m: float
    e: float

    def __post_init__(self):
        if self.m <= 0:
            raise ValueError("m must be positive")

    def gap_regime(self, n_sites: int) -> bool:
        return 1.0 / self.m > 2.0 * n_sites**2


class SparseOperator:
    """Hermitian sparse operator tagged with the basis it acts on."""

    def __init__(self, basis: SectorBasis, matrix: sp.spmatrix, check: bool = True):
        matrix = sp.csr_matrix(matrix)
        if matrix.shape != (basis.dimension, basis.dimension):
            raise OperatorError("matrix shape does not match basis dimension")
        if check:
            defect = abs(matrix - matrix.getH())
            if defect.nnz and defect.max() > HERMITICITY_TOL:
                raise OperatorError(f"operator is not Hermitian (defect {defect.max():g})")
        self.basis = basis
        self.basis_hash = basis.hash
        self.matrix = matrix

    def __add__(self, other: "SparseOperator") -> "SparseOperator":
        if other.basis_hash != self.basis_hash:
            raise OperatorError("basis mismatch in operator sum")
        return SparseOperator(self.basis, self.matrix + other.matrix, check=False)

    def __rmul__(self, scalar: float) -> "SparseOperator":
        return SparseOperator(self.basis, scalar * self.matrix, check=False)

    def apply(self, vec: np.ndarray) -> np.ndarray:
        return self.matrix.dot(vec)

    def dense(self) -> np.ndarray:
        return self.matrix.toarray()

    def spectral_norm_estimate(self, iters: int = 30) -> float:
        """Power-iteration estimate of the operator 2-norm (deterministic start)."""
        dim = self.basis.dimension
        v = np.ones(dim) / np.sqrt(dim)
        nrm = 0.0
        for _ in range(iters):
            w = self.matrix.dot(v)
            nrm = np.linalg.norm(w)
            if nrm == 0.0:
                return 0.0
            v = w / nrm
        return float(nrm)

    # -- serialization: sorted coordinate triplets with a basis-hash header --

    MAGIC = b"SPOP1\n"

    def save(self, path) -> None:
        coo = self.matrix.tocoo()
        order = np.lexsort((coo.col, coo.row))
        rows = coo.row[order].astype(np.int64)
        cols = coo.col[order].astype(np.int64)
        vals = coo.data[order].astype(np.complex128)
        header = json.dumps(
            {"basis_hash": self.basis_hash, "dimension": self.basis.dimension,
             "nnz": int(len(vals))},
            sort_keys=True,
        ).encode()
        with open(path, "wb") as fh:
            fh.write(self.MAGIC)
            fh.write(struct.pack("<I", len(header)))
            fh.write(header)
            fh.write(rows.tobytes())
            fh.write(cols.tobytes())
            fh.write(vals.tobytes())

    @classmethod
    def load(cls, path, basis: SectorBasis) -> "SparseOperator":
        with open(path, "rb") as fh:
            if fh.read(len(cls.MAGIC)) != cls.MAGIC:
                raise OperatorError("bad operator file magic")
            (hlen,) = struct.unpack("<I", fh.read(4))
            header = json.loads(fh.read(hlen))
            if header["basis_hash"] != basis.hash:
                raise OperatorError("operator file basis hash does not match the given basis")
            nnz = header["nnz"]
            rows = np.frombuffer(fh.read(8 * nnz), dtype=np.int64)
            cols = np.frombuffer(fh.read(8 * nnz), dtype=np.int64)
            vals = np.frombuffer(fh.read(16 * nnz), dtype=np.complex128)
        dim = header["dimension"]
        mat = sp.coo_matrix((vals, (rows, cols)), shape=(dim, dim))
        return cls(basis, mat)


def _range_sites(n: int, site_range: tuple[int, int] | None) -> frozenset[int]:
    if site_range is FULL_RING:
        return frozenset(range(n))
    start, stop = site_range
    length = (stop - start) % n
    if length == 0 and stop != start:
        length = n
    return frozenset((start + j) % n for j in range(length))


def _finish(basis: SectorBasis, rows, cols, vals) -> SparseOperator:
    vals = np.asarray(vals, dtype=np.complex128)
    keep = np.abs(vals) >= ENTRY_DROP
    mat = sp.coo_matrix(
        (vals[keep], (np.asarray(rows)[keep], np.asarray(cols)[keep])),
        shape=(basis.dimension, basis.dimension),
    )
    mat.sum_duplicates()
    return SparseOperator(basis, mat)


def h_xy_ring(basis: SectorBasis, chain_id: str) -> SparseOperator:
    """Ring XY coupling (1/2) sum_j (x_j x_{j+1} + y_j y_{j+1}) on one chain.

    In an excitation-number sector this is nearest-neighbour hopping with
    unit amplitude.
    """
    c = basis.layout.chain_index(chain_id)
    n = basis.layout.n_sites
    rows, cols, vals = [], [], []
    for i in range(basis.dimension):
        cfg = basis.config(i)
        occ = set(cfg[c])
        for s in cfg[c]:
            for d in (1, -1):
                t = (s + d) % n
                if t in occ:
                    continue
                new_occ = tuple(sorted((occ - {s}) | {t}))
                j = basis.index_of(cfg[:c] + (new_occ,) + cfg[c + 1:])
                rows.append(j)
                cols.append(i)
                vals.append(1.0)
    return _finish(basis, rows, cols, vals)


def h_z_gate(basis: SectorBasis, chain_id: str, phi: float,
             site_range: tuple[int, int] | None = FULL_RING) -> SparseOperator:
    """phi * (number of excitations of the chain inside the range); diagonal."""
    c = basis.layout.chain_index(chain_id)
    if basis.layout.chains[c].role is not ChainRole.RAIL1:
        warnings.warn(f"z gate placed on non-rail-1 chain {chain_id!r}", stacklevel=2)
    sites = _range_sites(basis.layout.n_sites, site_range)
    rows, cols, vals = [], [], []
    for i in range(basis.dimension):
        count = sum(1 for s in basis.config(i)[c] if s in sites)
        if count:
            rows.append(i)
            cols.append(i)
            vals.append(phi * count)
    return _finish(basis, rows, cols, vals)


def h_x_gate(basis: SectorBasis, rail0_id: str, rail1_id: str, phi: float,
             site_range: tuple[int, int] | None = FULL_RING) -> SparseOperator:
    """Rung coupling (phi/2) sum_j (x_j^0 x_j^1 + y_j^0 y_j^1): same-site
    hopping between the two rails with amplitude phi."""
    if rail0_id == rail1_id:
        raise OperatorError("x gate needs two distinct chains")
    a = basis.layout.chain_index(rail0_id)
    b = basis.layout.chain_index(rail1_id)
    sites = _range_sites(basis.layout.n_sites, site_range)
    rows, cols, vals = [], [], []
    for i in range(basis.dimension):
        cfg = basis.config(i)
        for src, dst in ((a, b), (b, a)):
            occ_d = set(cfg[dst])
            for s in cfg[src]:
                if s not in sites or s in occ_d:
                    continue
                new = list(cfg)
                new[src] = tuple(x for x in cfg[src] if x != s)
                new[dst] = tuple(sorted(occ_d | {s}))
                try:
                    j = basis.index_of(tuple(new))
                except KeyError:
                    continue
                rows.append(j)
                cols.append(i)
                vals.append(phi)
    return _finish(basis, rows, cols, vals)


def h_cphase_nonlocal(basis: SectorBasis, rail1_a: str, rail1_b: str,
                      phi: float) -> SparseOperator:
    """Long-range diagonal coupling phi * sum_{i<=j} n_i^a n_j^b.

    The i = j term is included as printed in the defining double sum.
    """
    if rail1_a == rail1_b:
        raise OperatorError("cphase needs two distinct chains")
    a = basis.layout.chain_index(rail1_a)
    b = basis.layout.chain_index(rail1_b)
    rows, cols, vals = [], [], []
    for idx in range(basis.dimension):
        cfg = basis.config(idx)
        count = sum(1 for i in cfg[a] for j in cfg[b] if i <= j)
        if count:
            rows.append(idx)
            cols.append(idx)
            vals.append(phi * count)
    return _finish(basis, rows, cols, vals)


def h_ancilla(basis: SectorBasis, anc_id: str, m: float) -> SparseOperator:
    """Gapped ancilla ring (1/4m) sum_j (1 - z_j - (x_j x_{j+1} + y_j y_{j+1})/2).

    Positive semidefinite; annihilates both the vacuum and the uniform
    single-excitation state.
    """
    if m <= 0:
        raise OperatorError("m must be positive")
    c = basis.layout.chain_index(anc_id)
    n = basis.layout.n_sites
    pref = 1.0 / (4.0 * m)
    rows, cols, vals = [], [], []
    for i in range(basis.dimension):
        cfg = basis.config(i)
        occ = set(cfg[c])
        if occ:
            rows.append(i)
            cols.append(i)
            vals.append(pref * 2.0 * len(occ))
        for s in cfg[c]:
            for d in (1, -1):
                t = (s + d) % n
                if t in occ:
                    continue
                new_occ = tuple(sorted((occ - {s}) | {t}))
                j = basis.index_of(cfg[:c] + (new_occ,) + cfg[c + 1:])
                rows.append(j)
                cols.append(i)
                vals.append(-pref)
    return _finish(basis, rows, cols, vals)


def v_site_coupling(basis: SectorBasis, rail1_id: str, anc_id: str, e: float,
                    axis: str = "x",
                    site_range: tuple[int, int] | None = FULL_RING) -> SparseOperator:
    """Site coupling e * sum_j n_j^rail (x_j^anc or y_j^anc).

    Conserves the rail excitation number; changes the ancilla count by one.
    Elements that would leave the ancilla truncation are dropped.
    """
    if axis not in ("x", "y"):
        raise OperatorError("axis must be 'x' or 'y'")
    r = basis.layout.chain_index(rail1_id)
    c = basis.layout.chain_index(anc_id)
    sites = _range_sites(basis.layout.n_sites, site_range)
    table = basis.local_index[c]
    rows, cols, vals = [], [], []
    for i in range(basis.dimension):
        cfg = basis.config(i)
        occ_anc = set(cfg[c])
        for s in cfg[r]:
            if s not in sites:
                continue
            creating = s not in occ_anc
            new_anc = tuple(sorted(occ_anc | {s})) if creating else \
                tuple(x for x in cfg[c] if x != s)
            if new_anc not in table:
                continue  # truncated away
            j = basis.index_of(cfg[:c] + (new_anc,) + cfg[c + 1:])
            if axis == "x":
                amp = e
            else:
                amp = 1j * e if creating else -1j * e
            rows.append(j)
            cols.append(i)
            vals.append(amp)
    return _finish(basis, rows, cols, vals)


def number_operator(basis: SectorBasis, chain_id: str) -> SparseOperator:
    """Diagonal excitation count of one chain."""
    c = basis.layout.chain_index(chain_id)
    rows, cols, vals = [], [], []
    for i in range(basis.dimension):
        k = len(basis.config(i)[c])
        if k:
            rows.append(i)
            cols.append(i)
            vals.append(float(k))
    return _finish(basis, rows, cols, vals)


def doublet_x_operator(basis: SectorBasis, anc_id: str) -> SparseOperator:
    """Logical X on the ancilla ground doublet: |vac><unif| + |unif><vac|
    on the ancilla factor, zero elsewhere."""
    c = basis.layout.chain_index(anc_id)
    n = basis.layout.n_sites
    table = basis.local_index[c]
    if () not in table or any((x,) not in table for x in range(n)):
        raise OperatorError("ancilla sector must allow zero and one excitation")
    rows, cols, vals = [], [], []
    for i in range(basis.dimension):
        cfg = basis.config(i)
        if len(cfg[c]) != 0:
            continue
        for x in range(n):
            j = basis.index_of(cfg[:c] + ((x,),) + cfg[c + 1:])
            rows.extend([j, i])
            cols.extend([i, j])
            vals.extend([1.0 / np.sqrt(n)] * 2)
    return _finish(basis, rows, cols, vals)


def projector_ground_doublet(basis: SectorBasis, anc_id: str) -> SparseOperator:
    """Rank-2 projector |vac><vac| + |uniform><uniform| on the ancilla factor."""
    c = basis.layout.chain_index(anc_id)
    n = basis.layout.n_sites
    table = basis.local_index[c]
    if () not in table:
        raise OperatorError("ancilla sector must allow zero excitations")
    singles = [(x,) for x in range(n)]
    if any(s not in table for s in singles):
        raise OperatorError("ancilla sector must allow one excitation")
    rows, cols, vals = [], [], []
    seen = set()
    for i in range(basis.dimension):
        cfg = basis.config(i)
        anc = cfg[c]
        if len(anc) == 0:
            rows.append(i)
            cols.append(i)
            vals.append(1.0)
        elif len(anc) == 1 and i not in seen:
            # whole single-excitation block of this non-ancilla configuration
            block = [basis.index_of(cfg[:c] + (s,) + cfg[c + 1:]) for s in singles]
            seen.update(block)
            for a in block:
                for b in block:
                    rows.append(a)
                    cols.append(b)
                    vals.append(1.0 / n)
    return _finish(basis, rows, cols, vals)


def h_effective(basis: SectorBasis, h_total: SparseOperator,
                anc_id: str) -> SparseOperator:
    """Conjugate the Hamiltonian by the ancilla ground-doublet projector."""
    if h_total.basis_hash != basis.hash:
        raise OperatorError("operator basis does not match")
    p = projector_ground_doublet(basis, anc_id)
    mat = p.matrix @ h_total.matrix @ p.matrix
    mat.data[np.abs(mat.data) < ENTRY_DROP] = 0.0
    mat.eliminate_zeros()
    return SparseOperator(basis, mat)


def zero_operator(basis: SectorBasis) -> SparseOperator:
    return SparseOperator(
        basis, sp.csr_matrix((basis.dimension, basis.dimension), dtype=np.complex128)
    )


def assemble_hamiltonian(basis: SectorBasis, blocks=(),
                         ancilla: AncillaParams | None = None) -> SparseOperator:
    """Free ring terms for every chain plus the given gate blocks.

    Rail chains get the XY ring; ancilla chains get the gapped ancilla ring,
    which requires ``ancilla`` parameters.
    """
    layout = basis.layout
    h = zero_operator(basis)
    for chain in layout.chains:
        if chain.role is ChainRole.ANCILLA:
            if ancilla is None:
                raise OperatorError("layout has an ancilla chain but no AncillaParams")
            h = h + h_ancilla(basis, chain.ident, ancilla.m)
        else:
            h = h + h_xy_ring(basis, chain.ident)
    for blk in blocks:
        h = h + block_operator(basis, blk)
    return h


def block_operator(basis: SectorBasis, blk: GateBlock) -> SparseOperator:
    if blk.kind == "z":
        return h_z_gate(basis, blk.chains[0], blk.strength, blk.site_range)
    if blk.kind == "x":
        return h_x_gate(basis, blk.chains[0], blk.chains[1], blk.strength, blk.site_range)
    if blk.kind == "vx":
        return v_site_coupling(basis, blk.chains[0], blk.chains[1], blk.strength,
                               "x", blk.site_range)
    if blk.kind == "vy":
        return v_site_coupling(basis, blk.chains[0], blk.chains[1], blk.strength,
                               "y", blk.site_range)
    if blk.kind == "cphase_nonlocal":
        return h_cphase_nonlocal(basis, blk.chains[0], blk.chains[1], blk.strength)
    raise OperatorError(f"unknown block kind {blk.kind!r}")
