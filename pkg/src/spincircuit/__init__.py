"""Simulator for packet-based quantum gates on periodic XY spin chains."""

from .basis import (CapacityError, Chain, ChainLayout, ChainRole, Constraint,
                    SectorBasis, SectorSpec, at_most, enumerate_basis, exactly,
                    translate_config)
from .operators import (AncillaParams, GateBlock, OperatorError, SparseOperator,
                        assemble_hamiltonian, block_operator, h_ancilla,
                        h_cphase_nonlocal, h_effective, h_x_gate, h_xy_ring,
                        h_z_gate, projector_ground_doublet, v_site_coupling)
from .states import (LogicalReadout, PacketParams, StateError, StateVector,
                     default_packet_width, gaussian_packet, logical_state,
                     momentum_eigenstate, packet_center, readout)
from .propagate import (EvolveConfig, EvolveError, TruncationEscalation,
                        evolve, evolve_dense, evolve_with_truncation,
                        leakage_norm)
from .analytic import (FockLabel, ParitySector, PerturbationContext,
                       fock_spectrum, gap_certificate, jw_mode_energy,
                       perturbed_overlap_and_shift, sum_bound, vprime_element)
from .harness import (CircuitSpec, GateResult, decompose_single_qubit,
                      run_circuit, run_entangling_gate, run_x_gate, run_z_gate,
                      scaling_params, sweep_leakage)

__version__ = "0.1.0"

__all__ = [name for name in dir() if not name.startswith("_")]
