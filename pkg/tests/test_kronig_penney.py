import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from rsbounds import ensemble as ens
from rsbounds.kronig_penney import (kp_beta_plus, kp_beta_plus_published, kp_beta_plus_scalar_formula,
                                    kp_ensemble_ab, kp_ensemble_ab_published, kp_fundamental_matrix,
                                    kp_mean_xi_bound, kp_r_envelope, kp_scattering, kp_xi)
from rsbounds.scattering import ScatteringError, scattering_from_fundamental

SQ2 = np.sqrt(2.0)


def test_free_point_interaction():
    s = kp_scattering(0.0, 1.0)
    assert s.T == 1 and s.R == 0 and s.L == 0


def test_coupling_two_at_unit_energy():
    s = kp_scattering(2.0, 1.0)
    assert s.T == pytest.approx((1 - 1j) / 2)
    assert s.R == pytest.approx(-(1 + 1j) / 2)
    assert s.L == s.R
    assert abs(s.T) ** 2 == pytest.approx(0.5)


def test_reflection_decays_at_high_energy():
    # |R| = b / sqrt(1 + b^2) with b = alpha / (2 sqrt(E)) = 0.1
    assert abs(kp_scattering(2.0, 100.0).R) == pytest.approx(0.1 / np.sqrt(1.01), rel=1e-14)


def test_rejects_nonpositive_energy():
    with pytest.raises(ScatteringError):
        kp_scattering(1.0, 0.0)


def test_xi_values():
    assert kp_xi(0.0, 3.0) == 0.0
    assert kp_xi(2.0, 1.0) == pytest.approx(0.25, abs=1e-15)
    assert kp_xi(-2.0, 1.0) == pytest.approx(-0.25, abs=1e-15)


@settings(max_examples=80, deadline=None)
@given(alpha=st.floats(-40, 40), E=st.floats(1e-3, 1e5))
def test_xi_equals_minus_phase_of_transmission(alpha, E):
    # det S = T^2 - R^2 = T / conj(T) here, so xi = -arg(T)/pi on the principal branch
    s = kp_scattering(alpha, E)
    assert kp_xi(alpha, E) == pytest.approx(-np.angle(s.T) / np.pi, abs=1e-12)
    assert -np.angle(s.det_s()) / (2 * np.pi) == pytest.approx(kp_xi(alpha, E), abs=1e-12)
    assert max(s.unitarity_defects().values()) < 1e-14


@settings(max_examples=40, deadline=None)
@given(alpha=st.floats(-40, 40), E=st.floats(1e-2, 1e4))
def test_fundamental_matrix_reproduces_closed_form(alpha, E):
    s = scattering_from_fundamental(kp_fundamental_matrix(alpha, E), E)
    ref = kp_scattering(alpha, E)
    assert s.T == pytest.approx(ref.T, abs=1e-9)
    assert s.R == pytest.approx(ref.R, abs=1e-9)


def test_ensemble_ab_examples(kp, pm1):
    a, b = kp_ensemble_ab(ens.point_mass(0.0), 1.0)
    assert (a, b) == (1.0, 0.0)
    # matrix expectation with Lt = diag-phase-corrected Lambda: |b| = 2 sqrt(2), a^2 - |b|^2 = 1
    a, b = kp_ensemble_ab(ens.point_mass(2.0), 1.0)
    assert a == pytest.approx(3.0)
    assert abs(b) == pytest.approx(2 * SQ2)
    a, b = kp_ensemble_ab(pm1, 1.0)
    assert a == pytest.approx(1.5)
    assert abs(b) == pytest.approx(0.5)
    assert kp_beta_plus(pm1, 1.0) == pytest.approx(2.0)


@pytest.mark.parametrize("kappa", [ens.point_mass(2.0), ens.bernoulli(1, -1), ens.bernoulli(0, 2, 0.3),
                                   ens.Discrete([-1.5, 0.5, 3.0], [0.2, 0.5, 0.3])])
@pytest.mark.parametrize("E", [0.3, 1.0, 7.0, 150.0])
def test_closed_form_matches_generic_ensemble(kp, kappa, E):
    a, b = kp_ensemble_ab(kappa, E)
    m = ens.ensemble_matrices(kappa, kp, E)
    assert m.a == pytest.approx(a, abs=1e-12)
    assert m.b == pytest.approx(b, abs=1e-12)


def test_published_variants(pm1):
    a, b = kp_ensemble_ab_published(pm1, 1.0)
    assert a == pytest.approx(1.25) and abs(b) == pytest.approx(0.25)
    assert kp_beta_plus_published(pm1, 1.0) == pytest.approx(1.5)
    assert kp_beta_plus_scalar_formula(pm1, 1.0) == pytest.approx(1.75)
    a, b = kp_ensemble_ab_published(ens.point_mass(2.0), 1.0)
    assert a == pytest.approx(2.0) and b == pytest.approx(-1 + 1j)
    assert kp_beta_plus_published(ens.point_mass(2.0), 1.0) == pytest.approx(2 + np.sqrt(5) / 2)


def test_r_envelope_examples(pm1):
    assert kp_r_envelope(ens.point_mass(0.0), 5.0) == (0.0, 0.0)
    assert kp_r_envelope(ens.point_mass(2.0), 100.0) == pytest.approx((0.11, 0.12))
    assert kp_r_envelope(pm1, 100.0) == pytest.approx((0.0525, 0.055))


@pytest.mark.parametrize("kappa", [ens.point_mass(2.0), ens.bernoulli(1, -1), ens.uniform(-2, 3)])
def test_exact_reflection_ratio_inside_envelope(kp, kappa):
    for E in np.geomspace(4.0, 1e5, 20):
        lo, hi = kp_r_envelope(kappa, E)
        alphas, w = kappa.nodes()
        aR = np.abs(kp_scattering(alphas, E).R)
        exact = w @ (aR / (1 - aR))
        assert lo - 1e-15 <= exact <= hi + 1e-15


def test_mean_xi_bound(kp, pm1):
    for E in (0.5, 3.0, 80.0):
        for kappa in (pm1, ens.point_mass(2.0), ens.uniform(0, 3)):
            assert abs(ens.mean_single_site_xi(kappa, kp, E)) <= kp_mean_xi_bound(kappa, E) + 1e-15
