import numpy as np
import pytest

from spincircuit.basis import (Chain, ChainLayout, ChainRole, SectorSpec,
                               at_most, enumerate_basis, exactly)
from spincircuit.operators import h_xy_ring
from spincircuit.states import (PacketParams, StateError, StateVector,
                                default_packet_width, excitation_marginals,
                                gaussian_packet, logical_state,
                                momentum_eigenstate, momentum_site_amplitudes,
                                packet_center, packet_momentum_amplitudes,
                                packet_site_amplitudes, product_state, readout,
                                single_particle_vector,
                                uniform_single_excitation)


def single_chain(n):
    layout = ChainLayout(n, (Chain("r1", ChainRole.RAIL1),))
    return enumerate_basis(layout, SectorSpec((exactly(1),)))


def qubit_basis(n):
    layout = ChainLayout(n, (Chain("r0", ChainRole.RAIL0),
                             Chain("r1", ChainRole.RAIL1)))
    return enumerate_basis(layout, SectorSpec((at_most(1), at_most(1))))


def test_default_packet_width():
    assert default_packet_width(8) == 2
    assert default_packet_width(27) == 3
    assert default_packet_width(64) == 4


def test_packet_params_validation():
    with pytest.raises(ValueError):
        PacketParams(0.0, 1, 0.0)
    assert abs(PacketParams(0.0, 1, 4.0).dp(64) - 64 / (8 * np.pi)) < 1e-14


def test_statevector_normalization_checks():
    basis = single_chain(4)
    with pytest.raises(StateError):
        StateVector(basis, np.ones(basis.dimension))
    sv = StateVector(basis, np.ones(basis.dimension), normalize=True)
    assert abs(sv.norm() - 1.0) < 1e-14
    with pytest.raises(StateError):
        StateVector(basis, np.ones(3))


def test_momentum_eigenstate_is_hopping_eigenvector():
    n = 8
    basis = single_chain(n)
    h = h_xy_ring(basis, "r1")
    for p in range(n):
        psi = momentum_eigenstate(basis, "r1", p)
        hv = h.apply(psi.amplitudes)
        want = 2.0 * np.cos(2.0 * np.pi * p / n)
        assert np.linalg.norm(hv - want * psi.amplitudes) < 1e-12


def test_momentum_range_checked():
    basis = single_chain(6)
    with pytest.raises(StateError):
        momentum_eigenstate(basis, "r1", 6)


def test_packet_fourier_pair():
    # position-space and momentum-space constructions agree up to a global
    # phase fixed by the carrier at x0
    n = 32
    params = PacketParams(x0=8.0, p0=8, dx=3.0)
    site = packet_site_amplitudes(n, params)
    site = site / np.linalg.norm(site)
    g = np.fft.fft(site) / np.sqrt(n)
    g_direct = packet_momentum_amplitudes(n, params)
    phase = np.exp(2j * np.pi * params.p0 * params.x0 / n)
    assert np.max(np.abs(g - phase * g_direct)) < 1e-10


def test_packet_center_and_width():
    n = 64
    basis = single_chain(n)
    psi = gaussian_packet(basis, "r1", PacketParams(20.0, 16, 4.0))
    center, width = packet_center(psi, "r1")
    assert abs(center - 20.0) < 1e-6
    # probability width is dx / sqrt(2) for the amplitude convention used
    assert abs(width - 4.0 / np.sqrt(2.0)) < 0.05


def test_packet_center_wraps():
    n = 32
    basis = single_chain(n)
    psi = gaussian_packet(basis, "r1", PacketParams(0.5, 8, 3.0))
    center, _ = packet_center(psi, "r1")
    assert min(abs(center - 0.5), abs(center - 0.5 - n)) < 1e-6


def test_uniform_state_center_undefined():
    n = 8
    basis = single_chain(n)
    psi = uniform_single_excitation(basis, "r1")
    center, spread = packet_center(psi, "r1")
    assert center is None
    assert spread > 2.0


def test_product_state_vacuum_default():
    basis = qubit_basis(6)
    amp = np.zeros(6)
    amp[2] = 1.0
    local = single_particle_vector(basis, "r0", amp)
    psi = product_state(basis, {"r0": local})
    idx = basis.index_of(((2,), ()))
    assert abs(psi.amplitudes[idx] - 1.0) < 1e-14


def test_logical_state_and_readout():
    n = 16
    basis = qubit_basis(n)
    params = PacketParams(4.0, 4, 2.0)
    for bit in (0, 1):
        psi = logical_state(basis, 0, bit, params)
        out = readout(psi)
        probs = (out.qubits[0].p0, out.qubits[0].p1)
        assert abs(probs[bit] - 1.0) < 1e-10
        assert abs(probs[1 - bit]) < 1e-12
        assert out.qubits[0].p_leak < 1e-10
    with pytest.raises(StateError):
        logical_state(basis, 1, 0, params)
    with pytest.raises(StateError):
        logical_state(basis, 0, 2, params)


def test_excitation_marginals_sum():
    basis = qubit_basis(8)
    psi = logical_state(basis, 0, 1, PacketParams(2.0, 2, 2.0))
    marg = excitation_marginals(psi)
    assert marg.shape == (2, 8)
    assert abs(marg[1].sum() - 1.0) < 1e-12
    assert marg[0].sum() < 1e-14


def test_overlap_basis_mismatch():
    a = uniform_single_excitation(single_chain(6), "r1")
    b = uniform_single_excitation(single_chain(7), "r1")
    with pytest.raises(StateError):
        a.overlap(b)


def test_momentum_site_amplitudes_orthonormal():
    n = 10
    mat = np.array([momentum_site_amplitudes(n, p) for p in range(n)])
    gram = mat.conj() @ mat.T
    assert np.max(np.abs(gram - np.eye(n))) < 1e-12


def test_save_load_and_csv(tmp_path):
    basis = qubit_basis(6)
    psi = logical_state(basis, 0, 0, PacketParams(2.0, 1, 1.5))
    path = tmp_path / "state.npz"
    psi.save(path)
    back = StateVector.load(path, basis)
    assert np.array_equal(psi.amplitudes, back.amplitudes)
    csv_path = tmp_path / "state.csv"
    psi.dump_csv(csv_path)
    lines = csv_path.read_text().strip().splitlines()
    assert len(lines) == 1 + 2 * 6
