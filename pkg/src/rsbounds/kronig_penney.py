"""Closed forms for a lattice of point interactions (Kronig-Penney model)."""
from __future__ import annotations

import numpy as np

from .scattering import ScatteringData, ScatteringError, free_propagator


def _k(E):
    E = np.asarray(E, dtype=float)
    if np.any(E <= 0):
        raise ScatteringError("energy must be positive")
    return np.sqrt(E)


def kp_scattering(alpha, E) -> ScatteringData:
    """``T = 1/(1 + i alpha/2k)``, ``R = L = -i (alpha/2k) T``."""
    k = _k(E)
    beta = np.asarray(alpha, dtype=float) / (2 * k)
    T = 1.0 / (1.0 + 1j * beta)
    R = -1j * beta * T
    if np.ndim(T) == 0:
        return ScatteringData(float(E), complex(T), complex(R), complex(R))
    return ScatteringData(np.broadcast_to(E, T.shape), T, R, R.copy())


def kp_xi(alpha, E):
    """Single-site spectral shift ``arctan(alpha / 2 sqrt(E)) / pi``."""
    out = np.arctan(np.asarray(alpha, dtype=float) / (2 * _k(E))) / np.pi
    return float(out) if np.ndim(out) == 0 else out


def kp_fundamental_matrix(alpha, E) -> np.ndarray:
    """Real ``(psi, psi')`` propagator across one cell with a point interaction at its centre."""
    k = _k(E)
    alpha, k = np.broadcast_arrays(np.asarray(alpha, dtype=float), k)
    jump = np.zeros(alpha.shape + (2, 2))
    jump[..., 0, 0] = 1.0
    jump[..., 1, 1] = 1.0
    jump[..., 1, 0] = alpha
    half = free_propagator(k, 0.5)
    return half @ jump @ half


class KronigPenneyScatterer:
    """Scatterer protocol implementation backed by the closed forms."""

    def __call__(self, alpha, E) -> ScatteringData:
        return kp_scattering(alpha, E)

    def xi(self, alpha, E_grid) -> np.ndarray:
        alpha = np.atleast_1d(np.asarray(alpha, dtype=float))
        E = np.atleast_1d(np.asarray(E_grid, dtype=float))
        return kp_xi(alpha[..., None], E)

    def __repr__(self):
        return "KronigPenneyScatterer()"


def _moments(kappa):
    a, w = kappa.nodes()
    return float(w @ a), float(w @ a**2), float(w @ np.abs(a))


def kp_ensemble_ab(kappa, E) -> tuple[float, complex]:
    """``a`` and ``b`` of ``E{Lt^dagger Lt}`` from the closed-form moments.

    ``a = 1 + <alpha^2>/(2E)`` and
    ``b = e^{ik} (i <alpha>/k + <alpha^2>/(2E))``.
    """
    k = float(_k(E))
    m1, m2, _ = _moments(kappa)
    a = 1.0 + m2 / (2 * E)
    b = np.exp(1j * k) * (1j * m1 / k + m2 / (2 * E))
    return a, complex(b)


def kp_beta_plus(kappa, E) -> float:
    a, b = kp_ensemble_ab(kappa, E)
    return a + abs(b)


def kp_ensemble_ab_published(kappa, E) -> tuple[float, complex]:
    """The literature closed form ``a = 1 + <a^2>/4E``, ``b = i<a>/2k - <a^2>/4E``.

    Kept only for side-by-side comparison; it disagrees with the matrix
    expectation (see :func:`kp_ensemble_ab`).
    """
    k = float(_k(E))
    m1, m2, _ = _moments(kappa)
    return 1.0 + m2 / (4 * E), complex(1j * m1 / (2 * k) - m2 / (4 * E))


def kp_beta_plus_published(kappa, E) -> float:
    """Literature closed form ``1 + <a^2>/4E + (1/2k) sqrt(<a^2>/4E + <a>^2)``."""
    k = float(_k(E))
    m1, m2, _ = _moments(kappa)
    return 1.0 + m2 / (4 * E) + np.sqrt(m2 / (4 * E) + m1 * m1) / (2 * k)


def kp_beta_plus_scalar_formula(kappa, E) -> float:
    """``a + |E{R/T^2}|``: the scalar ``b`` formula without the factor two."""
    m1, m2, _ = _moments(kappa)
    k = float(_k(E))
    a = 1.0 + m2 / (2 * E)
    # R/T^2 = -i beta (1 + i beta) = -i beta + beta^2
    return a + abs(complex(m2 / (4 * E), -m1 / (2 * k)))


def kp_r_envelope(kappa, E) -> tuple[float, float]:
    """Two-sided envelope of ``E{|R|/(1-|R|)}``:

    ``<|a|>/2k + <a^2>/4E  <=  E{|R|/(1-|R|)}  <=  <|a|>/2k + <a^2>/2E``.
    """
    k = float(_k(E))
    _, m2, mabs = _moments(kappa)
    return mabs / (2 * k) + m2 / (4 * E), mabs / (2 * k) + m2 / (2 * E)


def kp_mean_xi_bound(kappa, E) -> float:
    """``<|alpha|> / (2 pi sqrt(E))`` bounds ``|E{xi_alpha(E)}|``."""
    _, _, mabs = _moments(kappa)
    return mabs / (2 * np.pi * float(_k(E)))
