"""Monte Carlo estimates over disorder realizations, plus exact small-chain oracles.

Every realization is one statistical sample.  Its couplings come from a
counter-based Philox stream keyed by the master seed, with the realization
index in the high counter word, so results do not depend on evaluation order
or on how realizations are split across workers.
"""
from __future__ import annotations

import itertools
import math
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass

import numpy as np

from .kronig_penney import kp_fundamental_matrix
from .potential import FormalDelta, Realization
from .scattering import (ScatteringData, fundamental_matrix, lambda_tilde, phase_matrix,
                         scattering_from_fundamental, unwrap_phase, ScatteringError)

DEFAULT_RESCALE_EXPONENT = 8
CHUNK = 16
ENUMERATION_BUDGET = 10**7
_LN2 = math.log(2.0)


class EnumerationBudgetExceeded(ValueError):
    pass


@dataclass(frozen=True)
class MonteCarloEstimate:
    mean: float
    stderr: float
    n_sites: int
    n_realizations: int
    master_seed: int

    @classmethod
    def from_samples(cls, samples: np.ndarray, n_sites: int, master_seed: int) -> "MonteCarloEstimate":
        samples = np.asarray(samples, dtype=float)
        if samples.size < 2:
            raise ValueError("at least two realizations are needed for an error estimate")
        return cls(float(samples.mean()), float(samples.std(ddof=1) / math.sqrt(samples.size)),
                   int(n_sites), int(samples.size), int(master_seed))


@dataclass(frozen=True)
class ChainProduct:
    """Renormalized product: the true product is ``2**exponent * M``."""

    exponent: int
    M: np.ndarray

    @property
    def log_scale(self) -> float:
        return self.exponent * _LN2

    def det_defect(self) -> float:
        """Relative deviation of ``det(true product)`` from one.

        Only informative while the product is well conditioned: once
        ``|M|^2 4^exponent`` approaches ``1/eps`` the determinant is lost to
        cancellation even though ``|T|`` is still accurate.
        """
        d = complex(self.M[0, 0] * self.M[1, 1] - self.M[0, 1] * self.M[1, 0])
        return abs(math.log(abs(d)) + 2 * self.log_scale) if d != 0 else math.inf

    def full_lambda(self, E: float, n: int) -> "ChainProduct":
        """Attach the outer phase factors ``U^{n+1/2}`` on both sides."""
        U = phase_matrix(E, n + 0.5)
        return ChainProduct(self.exponent, U @ self.M @ U)


# -- sampling --------------------------------------------------------------------

def realization_rng(master_seed: int, realization_index: int) -> np.random.Generator:
    if master_seed < 0 or realization_index < 0:
        raise ValueError("seed and index must be nonnegative")
    bitgen = np.random.Philox(key=master_seed % 2**128, counter=realization_index << 128)
    return np.random.Generator(bitgen)


def sample_couplings(kappa, n: int, realization_index: int, master_seed: int) -> Realization:
    """``2n+1`` i.i.d. draws from ``kappa`` for one realization."""
    if n < 0:
        raise ValueError("n must be nonnegative")
    rng = realization_rng(master_seed, realization_index)
    return Realization(kappa.sample(rng, 2 * n + 1))


# -- products --------------------------------------------------------------------

def _site_factors(couplings: np.ndarray, scatterer, E) -> np.ndarray:
    """``Lt`` for every site; shape ``couplings.shape + E.shape + (2, 2)``."""
    uniq, inv = np.unique(couplings, return_inverse=True)
    E = np.asarray(E, dtype=float)
    s = scatterer(uniq.reshape(uniq.shape + (1,) * E.ndim),
                  np.broadcast_to(E, uniq.shape + E.shape))
    return lambda_tilde(s)[inv.reshape(couplings.shape)]


def _renormalize(m00, m01, m10, m11, expo, lo, hi):
    mag = np.maximum(np.maximum(np.abs(m00), np.abs(m01)), np.maximum(np.abs(m10), np.abs(m11)))
    out = (mag > hi) | (mag < lo)
    if np.any(out):
        _, e = np.frexp(mag)
        e = np.where(out, e, 0)
        scale = np.ldexp(1.0, -e)
        m00, m01, m10, m11 = m00 * scale, m01 * scale, m10 * scale, m11 * scale
        expo = expo + e
    return m00, m01, m10, m11, expo


def _product(factors: np.ndarray, rescale_exponent: int = DEFAULT_RESCALE_EXPONENT):
    """Left-to-right product over axis 0 of ``factors`` (sites, ..., 2, 2)."""
    lo, hi = 2.0 ** -rescale_exponent, 2.0 ** rescale_exponent
    f = factors
    m00, m01, m10, m11 = (f[0, ..., 0, 0].copy(), f[0, ..., 0, 1].copy(),
                          f[0, ..., 1, 0].copy(), f[0, ..., 1, 1].copy())
    expo = np.zeros(m00.shape, dtype=np.int64)
    m00, m01, m10, m11, expo = _renormalize(m00, m01, m10, m11, expo, lo, hi)
    for j in range(1, f.shape[0]):
        a, b, c, d = f[j, ..., 0, 0], f[j, ..., 0, 1], f[j, ..., 1, 0], f[j, ..., 1, 1]
        m00, m01, m10, m11 = (m00 * a + m01 * c, m00 * b + m01 * d,
                              m10 * a + m11 * c, m10 * b + m11 * d)
        m00, m01, m10, m11, expo = _renormalize(m00, m01, m10, m11, expo, lo, hi)
    M = np.stack([np.stack([m00, m01], -1), np.stack([m10, m11], -1)], -2)
    return expo, M


def _log_abs_T(expo, M):
    """``-1/2 log(tr(M^+ M) 4^{expo} / 4 + 1/2)`` without overflow."""
    tr = np.sum(np.abs(M) ** 2, axis=(-1, -2))
    return -0.5 * np.logaddexp(np.log(tr / 4.0) + 2 * expo * _LN2, math.log(0.5))


def chain_transmission(r: Realization, scatterer, E: float,
                       rescale_exponent: int = DEFAULT_RESCALE_EXPONENT) -> tuple[float, ChainProduct]:
    """``log|T^(n)|`` of the chain from the renormalized ``Lt`` product."""
    if E <= 0:
        raise ScatteringError("energy must be positive")
    expo, M = _product(_site_factors(r.couplings, scatterer, E), rescale_exponent)
    prod = ChainProduct(int(expo), M)
    return float(_log_abs_T(expo, M)), prod


def chain_scattering(r: Realization, scatterer, E: float) -> ScatteringData:
    """Complex chain amplitudes from the full product (moderate chains only)."""
    _, prod = chain_transmission(r, scatterer, E)
    full = prod.full_lambda(E, r.n)
    lam = full.M * 2.0 ** full.exponent
    T = 1 / lam[0, 0]
    return ScatteringData(float(E), complex(T), complex(-lam[0, 1] * T), complex(lam[1, 0] * T))


def whole_chain_scattering(r: Realization, potential, E: float, steps: int = 1024) -> ScatteringData:
    """Independent oracle: propagate ``(psi, psi')`` across all cells, then match."""
    if isinstance(potential, FormalDelta):
        cells = kp_fundamental_matrix(r.couplings, E)
    else:
        uniq, inv = np.unique(r.couplings, return_inverse=True)
        cells = fundamental_matrix(potential, uniq, np.full(uniq.shape, float(E)), steps)[inv]
    M = np.eye(2)
    for c in cells:
        M = c @ M
    return scattering_from_fundamental(M, float(E), -r.n - 0.5, r.n + 0.5, tol=1e-7)


# -- Lyapunov exponent -----------------------------------------------------------

def _map_chunks(fn, n_items: int, chunk: int, workers: int):
    starts = list(range(0, n_items, chunk))
    if workers <= 1:
        parts = [fn(s, min(s + chunk, n_items)) for s in starts]
    else:
        with ThreadPoolExecutor(max_workers=workers) as pool:
            parts = list(pool.map(lambda s: fn(s, min(s + chunk, n_items)), starts))
    return np.concatenate(parts, axis=0)


def lyapunov_samples(kappa, scatterer, E: float, n: int, n_realizations: int, master_seed: int,
                     workers: int = 1, chunk: int = CHUNK) -> np.ndarray:
    """``-log|T^(n)|/(2n+1)`` for each realization index, in index order."""
    def run(lo, hi):
        couplings = np.stack([sample_couplings(kappa, n, i, master_seed).couplings
                              for i in range(lo, hi)])
        factors = np.moveaxis(_site_factors(couplings, scatterer, E), 1, 0)
        expo, M = _product(factors)
        return -_log_abs_T(expo, M) / (2 * n + 1)
    return _map_chunks(run, n_realizations, chunk, workers)


def lyapunov_mc(kappa, scatterer, E: float, n: int, n_realizations: int, master_seed: int,
                workers: int = 1) -> MonteCarloEstimate:
    if n < 1 or n_realizations < 2:
        raise ValueError("need n >= 1 and at least two realizations")
    samples = lyapunov_samples(kappa, scatterer, E, n, n_realizations, master_seed, workers)
    return MonteCarloEstimate.from_samples(samples, 2 * n + 1, master_seed)


# -- spectral shift ---------------------------------------------------------------

def pair_concatenation_correction(s1: ScatteringData, s2: ScatteringData) -> float:
    """Spectral shift of two disjoint scatterers minus the sum of their own shifts.

    ``s1`` lies left of ``s2``; both must be expressed in one common frame.
    Writing ``R1 L2 = a1 a2 e^{i phi}`` the correction is
    ``-(1/pi) arctan(a1 a2 sin(phi) / (1 - a1 a2 cos(phi)))``.
    """
    a12 = abs(s1.R) * abs(s2.L)
    if a12 >= 1.0:
        raise ScatteringError("total reflection (E = 0) has no concatenation phase")
    if a12 == 0.0:
        return 0.0
    phi = np.angle(s1.R) + np.angle(s2.L)
    return float(-np.arctan(a12 * np.sin(phi) / (1.0 - a12 * np.cos(phi))) / np.pi)


def pair_correction_bound(s1: ScatteringData, s2: ScatteringData) -> float:
    a12 = abs(s1.R) * abs(s2.L)
    return float(min(0.5, a12 / (np.pi * (1.0 - a12))))


def _telescoped_xi(couplings: np.ndarray, scatterer, E: np.ndarray) -> np.ndarray:
    """``xi^(n)(E)`` summed site by site with the pair correction at each join."""
    uniq, inv = np.unique(couplings, return_inverse=True)
    single = scatterer.xi(uniq, E)
    s = scatterer(uniq[:, None], np.broadcast_to(E, (uniq.size, E.size)))
    lt = lambda_tilde(s)
    lo, hi = 2.0 ** -DEFAULT_RESCALE_EXPONENT, 2.0 ** DEFAULT_RESCALE_EXPONENT
    f = lt[inv[0]]
    m00, m01, m10, m11 = f[:, 0, 0].copy(), f[:, 0, 1].copy(), f[:, 1, 0].copy(), f[:, 1, 1].copy()
    expo = np.zeros(E.shape, dtype=np.int64)
    xi = single[inv[0]].copy()
    for j in inv[1:]:
        a, b, c, d = lt[j, :, 0, 0], lt[j, :, 0, 1], lt[j, :, 1, 0], lt[j, :, 1, 1]
        xi += single[j] + np.angle(1.0 + (m01 * c) / (m00 * a)) / np.pi
        m00, m01, m10, m11 = (m00 * a + m01 * c, m00 * b + m01 * d,
                              m10 * a + m11 * c, m10 * b + m11 * d)
        m00, m01, m10, m11, expo = _renormalize(m00, m01, m10, m11, expo, lo, hi)
    return xi


def _chain_det_s_phase(couplings: np.ndarray, scatterer, E: np.ndarray) -> np.ndarray:
    n = (couplings.size - 1) // 2
    _, M = _product(_site_factors(couplings, scatterer, E))
    # det S = Lambda_22 / Lambda_11 for a unimodular Lambda; scale drops out
    k = np.sqrt(E)
    outer = np.exp(-2j * (2 * n + 1) * k)
    return np.angle(M[..., 1, 1] / M[..., 0, 0] * outer)


def chain_spectral_shift(r: Realization, scatterer, E_grid, method: str = "telescoped",
                         anchor_energy: float | None = None) -> np.ndarray:
    """Per-site spectral shift ``xi^(n)(E)/(2n+1)`` of one realization.

    ``method="telescoped"`` adds sites one at a time, each contributing its own
    single-site shift plus the bounded concatenation correction; it needs no
    continuation in energy and is robust for long chains.  ``method="unwrap"``
    continues ``arg det S^(n)`` in energy from the top of the grid (optionally
    extended to ``anchor_energy``) with adaptive refinement; it misses
    resonances narrower than the refinement can resolve, so keep ``n`` small.
    """
    E = np.asarray(E_grid, dtype=float)
    if E.ndim != 1 or np.any(E <= 0) or np.any(np.diff(E) <= 0):
        raise ValueError("E_grid must be positive and strictly ascending")
    m = r.n_sites
    if method == "telescoped":
        return _telescoped_xi(r.couplings, scatterer, E) / m
    if method == "unwrap":
        from .scattering import anchor_grid
        full, idx = (E, np.arange(E.size)) if anchor_energy is None else anchor_grid(E, anchor_energy)
        phase = unwrap_phase(lambda e: _chain_det_s_phase(r.couplings, scatterer, np.asarray(e)), full)
        return -(phase[idx] / 2.0) / np.pi / m
    raise ValueError(f"unknown method {method!r}")


def telescoped_bound(r: Realization, scatterer, E: float) -> float:
    """``sum_j min(1/2, |R_j|/(pi (1-|R_j|))) / (2n+1)`` for one chain."""
    s = scatterer(r.couplings, np.full(r.n_sites, float(E)))
    aR = np.abs(s.R)
    return float(np.minimum(0.5, aR / (np.pi * (1 - aR))).sum() / r.n_sites)


def spectral_shift_samples(kappa, scatterer, E_grid, n: int, n_realizations: int, master_seed: int,
                           workers: int = 1, method: str = "telescoped") -> np.ndarray:
    """Array ``(n_realizations, len(E_grid))`` of per-site spectral shifts."""
    E = np.asarray(E_grid, dtype=float)

    def run(lo, hi):
        return np.stack([chain_spectral_shift(sample_couplings(kappa, n, i, master_seed), scatterer,
                                              E, method) for i in range(lo, hi)])
    return _map_chunks(run, n_realizations, 1, workers)


def spectral_shift_mc(kappa, scatterer, E_grid, n: int, n_realizations: int, master_seed: int,
                      workers: int = 1, method: str = "telescoped") -> list[MonteCarloEstimate]:
    if n_realizations < 2:
        raise ValueError("at least two realizations are needed")
    samples = spectral_shift_samples(kappa, scatterer, E_grid, n, n_realizations, master_seed,
                                     workers, method)
    return [MonteCarloEstimate.from_samples(col, 2 * n + 1, master_seed) for col in samples.T]


# -- exact enumeration ------------------------------------------------------------

def exact_expectation_trace(kappa, scatterer, E: float, n: int,
                            budget: int = ENUMERATION_BUDGET) -> float:
    """``E{tr(Lambda^(n)^+ Lambda^(n))}`` by summing over every coupling word."""
    atoms, weights = kappa.nodes()
    k, m = atoms.size, 2 * n + 1
    if k ** m > budget:
        raise EnumerationBudgetExceeded(f"{k}^{m} words exceed the budget of {budget}")
    lt = lambda_tilde(scatterer(atoms, np.full(k, float(E))))
    # products of the last `tail` letters for all tail words, vectorised
    tail = min(m, max(1, int(math.log(2**16) / math.log(max(k, 2)))))
    tail_prod = np.eye(2, dtype=complex)[None]
    tail_w = np.ones(1)
    for _ in range(tail):
        tail_prod = (lt[:, None] @ tail_prod[None]).reshape(-1, 2, 2)
        tail_w = (weights[:, None] * tail_w[None]).reshape(-1)
    total = 0.0
    for head in itertools.product(range(k), repeat=m - tail):
        P = np.eye(2, dtype=complex)
        w = 1.0
        for i in head:
            P = P @ lt[i]
            w *= weights[i]
        full = P @ tail_prod
        total += w * float(tail_w @ np.sum(np.abs(full) ** 2, axis=(-1, -2)))
    return total
