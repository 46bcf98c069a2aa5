import math
from itertools import combinations
from math import comb

import numpy as np
import pytest

from spincircuit.analytic import (EVEN, ODD, AnalyticError, FockLabel,
                                  ParitySector, PerturbationContext,
                                  conserving_finals, fock_energies,
                                  fock_spectrum, gap_certificate,
                                  jw_mode_energy, perturbed_overlap_and_shift,
                                  sector_for_count, sum_bound, sum_bound_brute,
                                  vprime_brute, vprime_element)
from spincircuit.basis import (Chain, ChainLayout, ChainRole, SectorSpec,
                               enumerate_basis, exactly)
from spincircuit.operators import h_ancilla


def anc_sector_basis(n, k):
    layout = ChainLayout(n, (Chain("anc", ChainRole.ANCILLA),))
    return enumerate_basis(layout, SectorSpec((exactly(k),)))


def test_parity_sectors():
    assert sector_for_count(0) == EVEN
    assert sector_for_count(3) == ODD
    assert np.array_equal(EVEN.momenta(4), np.array([0.5, 1.5, 2.5, 3.5]))
    assert np.array_equal(ODD.momenta(4), np.array([0.0, 1.0, 2.0, 3.0]))
    with pytest.raises(ValueError):
        ParitySector(0)


def test_mode_energy_values():
    n, m = 8, 0.02
    assert jw_mode_energy(n, m, ODD, 0) == 0.0
    want = math.sin(math.pi * 2.5 / n) ** 2 / m
    assert abs(jw_mode_energy(n, m, EVEN, 2) - want) < 1e-12
    with pytest.raises(AnalyticError):
        jw_mode_energy(n, m, ODD, n)


def test_fock_label():
    lab = FockLabel(6, (0, 2))
    assert lab.sector == EVEN
    assert np.array_equal(lab.momenta(), np.array([0.5, 2.5]))
    with pytest.raises(AnalyticError):
        FockLabel(6, (2, 0))


def test_fock_energies_match_dense_diagonalization():
    # every excitation-count sector of the ancilla ring is diagonalized by
    # fermionic modes with parity-dependent quantization
    for n in (6, 8):
        m = 1.0 / (2.0 * n**2 + 1.0)
        for k in range(4):
            basis = anc_sector_basis(n, k)
            evals = np.sort(np.linalg.eigvalsh(h_ancilla(basis, "anc", m).dense()))
            want = fock_energies(n, m, k)
            assert len(evals) == comb(n, k)
            assert np.max(np.abs(evals - want)) < 1e-10


def test_exactly_two_zero_energy_states():
    n = 8
    m = 1.0 / (2.0 * n**2 + 1.0)
    spec = fock_spectrum(n, m, 3)
    assert int(np.sum(np.abs(spec) < 1e-6)) == 2


def test_gap_certificate():
    n = 6
    bound, holds = gap_certificate(n, 1.0 / (2.0 * n**2 + 1.0), 0.5)
    assert holds
    assert bound > 1.0
    bound2, holds2 = gap_certificate(n, 1.0, 0.5)
    assert not holds2


def test_vprime_selection_rule():
    ctx = PerturbationContext(n=6, m=1.0 / 73.0, e=0.37, p=2)
    # momentum-violating finals vanish identically
    assert vprime_element(ctx, (ctx.p - 2) % 6, (3.0,)) == 0.0
    assert vprime_element(ctx, 0, (0.5, 2.5)) == 0.0
    with pytest.raises(AnalyticError):
        vprime_element(ctx, 0, (1.5,))  # one-fermion finals take integers
    with pytest.raises(AnalyticError):
        vprime_element(ctx, 0, (2.5, 0.5))


def test_vprime_single_particle_magnitude():
    n, e = 8, 0.37
    ctx = PerturbationContext(n=n, m=1.0 / 129.0, e=e, p=2)
    for a in range(1, n):
        v = vprime_element(ctx, (ctx.p - a) % n, (float(a),))
        assert abs(abs(v) - e / math.sqrt(2.0 * n)) < 1e-14


def test_vprime_closed_forms_match_brute_force():
    e = 0.37
    for n in (6, 8):
        for sign in (1, -1):
            ctx = PerturbationContext(n=n, m=1.0 / (2.0 * n**2 + 1.0), e=e,
                                      p=n // 4, sign=sign)
            for q, alphas in conserving_finals(ctx):
                closed = vprime_element(ctx, q, alphas)
                brute = vprime_brute(ctx, q, alphas)
                assert abs(closed - brute) < 1e-12
                assert abs(closed) <= e / math.sqrt(n) + 1e-12


def test_conserving_finals_count():
    n = 6
    ctx = PerturbationContext(n=n, m=1.0 / 73.0, e=0.2, p=1)
    finals = list(conserving_finals(ctx))
    assert len(finals) == (n - 1) + comb(n, 2)


def test_sum_bound_matches_brute_force():
    for n in (6, 8):
        ctx = PerturbationContext(n=n, m=1.0 / (2.0 * n**2 + 1.0), e=0.37,
                                  p=n // 4)
        assert abs(sum_bound(ctx) - sum_bound_brute(ctx)) < 1e-10
    zero = PerturbationContext(n=6, m=1.0 / 73.0, e=0.0, p=1)
    assert sum_bound(zero) == 0.0


def test_perturbed_ket_matches_second_order_sums():
    # at weak coupling the dense-diagonalization defect and shift approach
    # the leading-order sums over the conserving finals
    n, m, e = 6, 1.0 / 73.0, 0.05
    for sign in (1, -1):
        ctx = PerturbationContext(n=n, m=m, e=e, p=n // 4, sign=sign)
        defect, shift = perturbed_overlap_and_shift(ctx)
        d2 = 0.0
        s2 = 0.0
        e_ref = ctx.reference_energy()
        for q, alphas in conserving_finals(ctx):
            v = vprime_element(ctx, q, alphas)
            if v == 0.0:
                continue
            # two-fermion bras in this convention have norm (n-1)/n, not 1
            norm2 = 1.0 if len(alphas) == 1 else (n - 1.0) / n
            de = e_ref - ctx.final_energy(q, alphas)
            d2 += abs(v) ** 2 / norm2 / de**2
            s2 += abs(v) ** 2 / norm2 / de
        assert defect == pytest.approx(math.sqrt(d2), rel=0.15)
        assert shift == pytest.approx(s2, rel=0.15)
        assert defect < 0.01


def test_perturbed_shift_scales_quadratically():
    n, m = 6, 1.0 / 73.0
    _, s1 = perturbed_overlap_and_shift(
        PerturbationContext(n=n, m=m, e=0.04, p=1))
    _, s2 = perturbed_overlap_and_shift(
        PerturbationContext(n=n, m=m, e=0.02, p=1))
    assert s1 / s2 == pytest.approx(4.0, rel=0.05)
