"""Excitation-number-restricted bases for multi-chain spin systems.

Each chain is a periodic ring of N spin-1/2 sites; a configuration records
the set of sites carrying an excitation (a down spin on the all-up vacuum).
The global basis is the product, chain by chain, of per-chain sectors that
either fix the excitation count (``Exactly``) or cap it (``AtMost``).
Enumeration order is deterministic and part of the on-disk contract:
per chain, configurations are ordered by particle number and then
lexicographically in the occupied-site tuple; globally the first chain is
the slowest index.
"""

from __future__ import annotations

import hashlib
import itertools
import json
from dataclasses import dataclass, field
from enum import Enum
from math import comb
from typing import Iterable, Sequence

DIMENSION_CAP = 2**24

Config = tuple[tuple[int, ...], ...]  # occupied sites, one tuple per chain


class CapacityError(Exception):
    """Requested basis exceeds the configured dimension cap."""


class ChainRole(Enum):
    RAIL0 = "rail0"
    RAIL1 = "rail1"
    ANCILLA = "ancilla"


@dataclass(frozen=True)
class Chain:
    ident: str
    role: ChainRole


@dataclass
class ChainLayout:
    """A set of equal-length periodic chains, plus any gate blocks on them.

    ``blocks`` is opaque to this module; operators interpret it.
    """

    n_sites: int
    chains: tuple[Chain, ...]
    blocks: tuple = ()

    def __post_init__(self):
        if self.n_sites < 3:
            raise ValueError(f"ring length must be >= 3, got {self.n_sites}")
        self.chains = tuple(self.chains)
        idents = [c.ident for c in self.chains]
        if len(set(idents)) != len(idents):
            raise ValueError("chain identifiers must be unique")

    def chain_index(self, ident: str) -> int:
        for i, c in enumerate(self.chains):
            if c.ident == ident:
                return i
        raise KeyError(f"unknown chain {ident!r}")

    def chain(self, ident: str) -> Chain:
        return self.chains[self.chain_index(ident)]

    def rail_pairs(self) -> list[tuple[str, str]]:
        """(rail0, rail1) identifier pairs, in chain order of the rail0s.

        Pairing convention: the k-th RAIL0 chain belongs with the k-th
        RAIL1 chain.
        """
        r0 = [c.ident for c in self.chains if c.role is ChainRole.RAIL0]
        r1 = [c.ident for c in self.chains if c.role is ChainRole.RAIL1]
        if len(r0) != len(r1):
            raise ValueError("every dual-rail qubit needs one rail-0 and one rail-1 chain")
        return list(zip(r0, r1))


@dataclass(frozen=True)
class Constraint:
    kind: str  # "exactly" | "at_most"
    k: int

    def __post_init__(self):
        if self.kind not in ("exactly", "at_most"):
            raise ValueError(f"bad constraint kind {self.kind!r}")
        if self.k < 0:
            raise ValueError("constraint count must be >= 0")

    def counts(self, n_sites: int) -> range:
        if self.k > n_sites:
            raise ValueError(f"constraint k={self.k} exceeds ring length {n_sites}")
        if self.kind == "exactly":
            return range(self.k, self.k + 1)
        return range(0, self.k + 1)


def exactly(k: int) -> Constraint:
    return Constraint("exactly", k)


def at_most(k: int) -> Constraint:
    return Constraint("at_most", k)


@dataclass(frozen=True)
class SectorSpec:
    constraints: tuple[Constraint, ...]  # one per chain, in layout order

    def dimension(self, layout: ChainLayout) -> int:
        if len(self.constraints) != len(layout.chains):
            raise ValueError("need one constraint per chain")
        d = 1
        for c in self.constraints:
            d *= sum(comb(layout.n_sites, k) for k in c.counts(layout.n_sites))
        return d


class SectorBasis:
    """Enumerated product basis with bidirectional index maps.

    The global index of a configuration is mixed-radix over per-chain local
    indices: ``index = sum(local_index[c] * stride[c])`` with the last chain
    the fastest-running digit.
    """

    def __init__(self, layout: ChainLayout, spec: SectorSpec):
        if len(spec.constraints) != len(layout.chains):
            raise ValueError("need one constraint per chain")
        dim = spec.dimension(layout)
        if dim > DIMENSION_CAP:
            raise CapacityError(f"basis dimension {dim} exceeds cap {DIMENSION_CAP}")
        self.layout = layout
        self.spec = spec
        n = layout.n_sites
        self.local_states: list[list[tuple[int, ...]]] = []
        self.local_index: list[dict[tuple[int, ...], int]] = []
        for con in spec.constraints:
            states: list[tuple[int, ...]] = []
            for k in con.counts(n):
                states.extend(itertools.combinations(range(n), k))
            self.local_states.append(states)
            self.local_index.append({s: i for i, s in enumerate(states)})
        self.dims = tuple(len(s) for s in self.local_states)
        strides = []
        acc = 1
        for d in reversed(self.dims):
            strides.append(acc)
            acc *= d
        self.strides = tuple(reversed(strides))
        self.dimension = acc

    # -- index arithmetic ---------------------------------------------------

    def index_of(self, config: Config) -> int:
        if len(config) != len(self.dims):
            raise ValueError("configuration has wrong number of chains")
        idx = 0
        for occ, table, stride in zip(config, self.local_index, self.strides):
            idx += table[tuple(sorted(occ))] * stride
        return idx

    def config(self, index: int) -> Config:
        if not 0 <= index < self.dimension:
            raise IndexError(index)
        out = []
        for states, stride in zip(self.local_states, self.strides):
            q, index = divmod(index, stride)
            out.append(states[q])
        return tuple(out)

    def local_indices(self, index: int) -> tuple[int, ...]:
        out = []
        for stride in self.strides:
            q, index = divmod(index, stride)
            out.append(q)
        return tuple(out)

    def iter_configs(self) -> Iterable[Config]:
        for i in range(self.dimension):
            yield self.config(i)

    @property
    def states(self) -> list[Config]:
        return [self.config(i) for i in range(self.dimension)]

    def vacuum_index(self) -> int:
        return self.index_of(tuple(() for _ in self.dims))

    # -- translation --------------------------------------------------------

    def translate(self, index: int) -> int:
        """Index of the configuration with every occupied site shifted +1 mod N
        on every chain (the simultaneous one-site shift of all rings)."""
        n = self.layout.n_sites
        cfg = self.config(index)
        shifted = tuple(tuple(sorted((x + 1) % n for x in occ)) for occ in cfg)
        return self.index_of(shifted)

    def translation_permutation(self):
        import numpy as np

        perm = np.empty(self.dimension, dtype=np.int64)
        for i in range(self.dimension):
            perm[i] = self.translate(i)
        return perm

    # -- serialization ------------------------------------------------------

    def descriptor(self) -> dict:
        enum_hash = hashlib.sha256()
        for states in self.local_states:
            enum_hash.update(json.dumps(states, separators=(",", ":")).encode())
        return {
            "version": 1,
            "n_sites": self.layout.n_sites,
            "chains": [{"id": c.ident, "role": c.role.value} for c in self.layout.chains],
            "sector": [{"kind": c.kind, "k": c.k} for c in self.spec.constraints],
            "dimension": self.dimension,
            "enumeration_hash": enum_hash.hexdigest(),
        }

    def descriptor_json(self) -> str:
        return json.dumps(self.descriptor(), sort_keys=True, separators=(",", ":"))

    @property
    def hash(self) -> str:
        return hashlib.sha256(self.descriptor_json().encode()).hexdigest()


def enumerate_basis(layout: ChainLayout, spec: SectorSpec) -> SectorBasis:
    return SectorBasis(layout, spec)


def translate_config(basis: SectorBasis, state_index: int) -> int:
    return basis.translate(state_index)


def reexpress_indices(src: SectorBasis, dst: SectorBasis) -> "tuple":
    """Map every source basis index to the matching index in ``dst``.

    Returns (src_indices, dst_indices) for the configurations present in
    both bases. Chains must agree between the two layouts.
    """
    import numpy as np

    if src.layout.n_sites != dst.layout.n_sites or src.layout.chains != dst.layout.chains:
        raise ValueError("bases live on different layouts")
    src_idx, dst_idx = [], []
    for i in range(src.dimension):
        cfg = src.config(i)
        try:
            j = dst.index_of(cfg)
        except KeyError:
            continue
        src_idx.append(i)
        dst_idx.append(j)
    return np.asarray(src_idx, dtype=np.int64), np.asarray(dst_idx, dtype=np.int64)
