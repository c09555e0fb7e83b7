import math

import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from rsbounds import ensemble as ens
from rsbounds.kronig_penney import kp_scattering, kp_xi
from rsbounds.montecarlo import (ChainProduct, EnumerationBudgetExceeded, MonteCarloEstimate,
                                 chain_scattering, chain_spectral_shift, chain_transmission,
                                 exact_expectation_trace, lyapunov_mc, lyapunov_samples,
                                 pair_concatenation_correction, pair_correction_bound, sample_couplings,
                                 spectral_shift_mc, telescoped_bound, whole_chain_scattering)
from rsbounds.potential import FormalDelta, Realization, gaussian_truncated
from rsbounds.scattering import GridScatterer, ScatteringData, lambda_matrix


def test_estimate_from_samples():
    est = MonteCarloEstimate.from_samples(np.array([1.0, 2.0, 3.0, 4.0]), 7, 5)
    assert est.mean == 2.5
    assert est.stderr == pytest.approx(np.std([1, 2, 3, 4], ddof=1) / 2)
    assert (est.n_sites, est.n_realizations, est.master_seed) == (7, 4, 5)
    with pytest.raises(ValueError):
        MonteCarloEstimate.from_samples(np.array([1.0]), 1, 0)


def test_sampling(pm1):
    assert np.all(sample_couplings(ens.point_mass(0.3), 4, 0, 1).couplings == 0.3)
    r = sample_couplings(pm1, 10_000, 0, 42)
    assert abs(r.couplings.mean()) <= 4 / math.sqrt(2 * 10_000 + 1)
    again = sample_couplings(pm1, 10_000, 0, 42)
    np.testing.assert_array_equal(r.couplings, again.couplings)
    other = sample_couplings(pm1, 10_000, 1, 42)
    assert not np.array_equal(r.couplings, other.couplings)


def test_sampling_streams_do_not_depend_on_length(pm1):
    # each realization owns its stream, so drawing a longer chain extends it
    short = sample_couplings(pm1, 5, 3, 9).couplings
    longer = sample_couplings(pm1, 50, 3, 9).couplings
    assert short.size == 11 and longer.size == 101


def test_free_chain(kp):
    logT, prod = chain_transmission(Realization(np.zeros(21)), kp, 2.0)
    assert logT == pytest.approx(0.0, abs=1e-14)
    M = prod.M * 2.0**prod.exponent
    np.testing.assert_allclose(M @ M.conj().T, np.eye(2), atol=1e-13)


def test_single_site(kp):
    logT, _ = chain_transmission(Realization([2.0]), kp, 1.0)
    assert logT == pytest.approx(0.5 * math.log(0.5), abs=1e-14)


@pytest.mark.parametrize("seed", range(5))
def test_chain_matches_whole_chain_solve_point_interaction(kp, pm1, seed):
    r = sample_couplings(ens.uniform(-3, 3), 5, seed, 11)
    logT, _ = chain_transmission(r, kp, 2.0)
    direct = whole_chain_scattering(r, FormalDelta(), 2.0)
    assert logT == pytest.approx(math.log(abs(direct.T)), abs=1e-8)
    s = chain_scattering(r, kp, 2.0)
    assert s.T == pytest.approx(direct.T, abs=1e-8)
    assert s.R == pytest.approx(direct.R, abs=1e-8)
    assert s.L == pytest.approx(direct.L, abs=1e-8)


def test_chain_matches_whole_chain_solve_grid():
    p = gaussian_truncated(0.1, 0.15)
    sc = GridScatterer(p, steps=256)
    r = sample_couplings(ens.uniform(-4, 6, 8), 3, 0, 4)
    s = chain_scattering(r, sc, 3.0)
    direct = whole_chain_scattering(r, p, 3.0, steps=256)
    assert s.T == pytest.approx(direct.T, abs=1e-8)
    assert s.R == pytest.approx(direct.R, abs=1e-8)


@settings(max_examples=30, deadline=None)
@given(c=st.lists(st.floats(-5, 5), min_size=1, max_size=6), E=st.floats(0.05, 50))
def test_transmission_identity(kp, c, E):
    couplings = np.array(c + c[:1] * (len(c) % 2 == 0))
    r = Realization(couplings)
    logT, prod = chain_transmission(r, kp, E)
    full = prod.full_lambda(E, r.n)
    lam = full.M * 2.0**full.exponent
    rhs = 0.25 * np.sum(np.abs(lam) ** 2) + 0.5
    assert math.exp(-2 * logT) == pytest.approx(rhs, rel=1e-10)
    s = chain_scattering(r, kp, E)
    np.testing.assert_allclose(lambda_matrix(s), lam, rtol=1e-9, atol=1e-12)


def test_renormalization_is_transparent(kp, pm1):
    r = sample_couplings(pm1, 2000, 0, 3)
    a, pa = chain_transmission(r, kp, 0.7, rescale_exponent=8)
    b, pb = chain_transmission(r, kp, 0.7, rescale_exponent=4)
    assert a == pytest.approx(b, abs=1e-12)
    assert 2.0**-8 <= np.max(np.abs(pa.M)) <= 2.0**8
    assert 2.0**-4 <= np.max(np.abs(pb.M)) <= 2.0**4


def test_determinant_survives_rescaling(kp, pm1):
    # short enough that the product stays well conditioned
    r = sample_couplings(pm1, 6, 0, 3)
    for rescale in (1, 2, 4, 8):
        _, prod = chain_transmission(r, kp, 0.7, rescale_exponent=rescale)
        assert prod.exponent != 0 or rescale == 8
        assert prod.det_defect() < 1e-6


def test_long_chain_does_not_overflow(kp):
    # gap of the periodic chain: |T| ~ e^{-gamma * 2e5}
    logT, prod = chain_transmission(Realization(np.full(200_001, 2.0)), kp, 1.0)
    gamma = math.acosh(math.cos(1.0) + math.sin(1.0))
    assert -logT / 200_001 == pytest.approx(gamma, rel=1e-4)
    assert prod.exponent > 1000


def test_periodic_chain_lyapunov(kp):
    # a periodic chain in a gap: exact exponent arccosh|cos k + (alpha/2k) sin k|
    gamma = math.acosh(math.cos(1.0) + math.sin(1.0))
    est = lyapunov_mc(ens.point_mass(2.0), kp, 1.0, 4000, 2, 0)
    assert est.mean == pytest.approx(gamma, abs=2e-4)
    assert est.mean <= ens.gamma_tilde(ens.point_mass(2.0), kp, 1.0)


def test_lyapunov_free(kp):
    est = lyapunov_mc(ens.point_mass(0.0), kp, 2.0, 50, 4, 0)
    assert abs(est.mean) < 1e-14 and est.stderr < 1e-14


def test_lyapunov_below_bound(kp, pm1):
    for E in (0.5, 2.0):
        est = lyapunov_mc(pm1, kp, E, 1000, 40, 1)
        assert est.mean + 3 * est.stderr <= ens.gamma_tilde(pm1, kp, E)


def test_lyapunov_validation(kp, pm1):
    with pytest.raises(ValueError):
        lyapunov_mc(pm1, kp, 1.0, 0, 10, 0)
    with pytest.raises(ValueError):
        lyapunov_mc(pm1, kp, 1.0, 10, 1, 0)


def test_worker_count_does_not_change_results(kp, pm1):
    a = lyapunov_samples(pm1, kp, 1.0, 200, 37, 5, workers=1)
    b = lyapunov_samples(pm1, kp, 1.0, 200, 37, 5, workers=8)
    assert a.tobytes() == b.tobytes()
    xa = spectral_shift_mc(pm1, kp, [1.0, 2.0], 16, 9, 5, workers=1)
    xb = spectral_shift_mc(pm1, kp, [1.0, 2.0], 16, 9, 5, workers=4)
    assert xa == xb


# -- spectral shift ---------------------------------------------------------------

def test_spectral_shift_trivial(kp):
    E = np.array([0.5, 1.0, 4.0])
    np.testing.assert_array_equal(chain_spectral_shift(Realization(np.zeros(9)), kp, E), 0.0)
    assert chain_spectral_shift(Realization([2.0]), kp, [1.0])[0] == pytest.approx(0.25, abs=1e-14)


def test_periodic_chain_inside_telescoped_bound(kp):
    r = Realization(np.full(5, 2.0))
    E = np.geomspace(0.1, 200, 60)
    xi = chain_spectral_shift(r, kp, E)
    for e, x in zip(E, xi):
        rb = telescoped_bound(r, kp, e)
        assert abs(x - kp_xi(2.0, e)) <= rb + 1e-12


def test_telescoped_and_unwrapped_agree(kp):
    r = sample_couplings(ens.uniform(-3, 3), 3, 0, 8)
    E = np.geomspace(0.2, 30, 40)
    a = chain_spectral_shift(r, kp, E)
    b = chain_spectral_shift(r, kp, E, method="unwrap", anchor_energy=1e5)
    np.testing.assert_allclose(a, b, atol=1e-9)


def test_grid_spectral_shift_routes_agree():
    sc = GridScatterer(gaussian_truncated(), steps=256)
    r = Realization([1.5, -2.0, 3.0])
    E = np.geomspace(0.5, 20, 12)
    a = chain_spectral_shift(r, sc, E)
    b = chain_spectral_shift(r, sc, E, method="unwrap", anchor_energy=1e4)
    np.testing.assert_allclose(a, b, atol=1e-8)


def test_pair_correction_examples():
    transparent = ScatteringData(1.0, 1.0 + 0j, 0j, 0j)
    other = kp_scattering(2.0, 1.0)
    assert pair_concatenation_correction(transparent, other) == 0.0
    a = 1 / math.sqrt(2)
    s1 = ScatteringData(1.0, a * 1j, a + 0j, a + 0j)
    s2 = ScatteringData(1.0, a * 1j, a + 0j, a + 0j)
    assert pair_concatenation_correction(s1, s2) == pytest.approx(0.0, abs=1e-15)
    assert pair_correction_bound(s1, s2) == pytest.approx(1 / math.pi)


@pytest.mark.parametrize("alphas", [(2.0, 2.0), (1.0, -3.0), (5.0, 0.5)])
def test_pair_additivity(kp, alphas):
    a1, a2 = alphas
    r = Realization([a1, a2, 0.0])
    for E in (0.3, 1.0, 4.0, 25.0):
        chain = 3 * chain_spectral_shift(r, kp, [E])[0]
        # site one sits at -1, site two at the origin
        s1 = kp_scattering(a1, E).translated(-1.0)
        s2 = kp_scattering(a2, E)
        xi12 = pair_concatenation_correction(s1, s2)
        assert chain == pytest.approx(kp_xi(a1, E) + kp_xi(a2, E) + xi12, abs=1e-8)
        assert abs(xi12) <= pair_correction_bound(s1, s2)


# -- enumeration ------------------------------------------------------------------

def test_enumeration_examples(kp, pm1):
    assert exact_expectation_trace(ens.point_mass(0.0), kp, 1.0, 3) == pytest.approx(2.0)
    assert exact_expectation_trace(ens.point_mass(2.0), kp, 1.0, 0) == pytest.approx(6.0)
    tr3 = np.trace(ens.a_recursion(pm1, kp, 1.0, 3)).real
    assert exact_expectation_trace(pm1, kp, 1.0, 1) == pytest.approx(tr3, rel=1e-10)


def test_enumeration_uses_full_product_trace(kp):
    # brute force over the 3^3 words, straight from the definition
    kappa = ens.Discrete([0.5, -1.0, 2.0], [0.2, 0.3, 0.5])
    E, n = 1.7, 1
    total = 0.0
    for i in range(3):
        for j in range(3):
            for k in range(3):
                r = Realization([kappa.atoms[i], kappa.atoms[j], kappa.atoms[k]])
                w = kappa.weights[i] * kappa.weights[j] * kappa.weights[k]
                total += w * (4 * math.exp(-2 * chain_transmission(r, kp, E)[0]) - 2)
    assert exact_expectation_trace(kappa, kp, E, n) == pytest.approx(total, rel=1e-10)


def test_enumeration_budget(kp, pm1):
    with pytest.raises(EnumerationBudgetExceeded):
        exact_expectation_trace(pm1, kp, 1.0, 20, budget=10**6)


def test_chain_product_det_defect():
    p = ChainProduct(3, np.diag([2.0**-3, 2.0**-3]) + 0j)
    assert p.det_defect() == pytest.approx(0.0, abs=1e-15)
