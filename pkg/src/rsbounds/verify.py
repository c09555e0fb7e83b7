"""Checks of the Lyapunov and spectral-shift bounds against Monte Carlo estimates."""
from __future__ import annotations

import csv
import io
import math
from dataclasses import asdict, dataclass, fields

import numpy as np

from . import ensemble as ens
from .kronig_penney import kp_scattering
from .montecarlo import lyapunov_mc, spectral_shift_mc
from .potential import delta_approximant
from .scattering import grid_scattering


@dataclass(frozen=True)
class MCParams:
    n_gamma: int = 1000
    realizations_gamma: int = 50
    n_xi: int = 64
    realizations_xi: int = 100
    seed: int = 0
    workers: int = 1
    sigmas: float = 3.0


@dataclass(frozen=True)
class BoundRow:
    E: float
    gamma_mc: float
    gamma_stderr: float
    gamma_tilde: float
    gamma_pass: bool
    xi_mc: float
    xi_stderr: float
    xi_single_mean: float
    r: float
    xi_lower: float
    xi_upper: float
    xi_pass: bool
    N_mc: float
    N_lower: float
    N_upper: float
    N_pass: bool

    @property
    def passed(self) -> bool:
        return self.gamma_pass and self.xi_pass and self.N_pass


def _within(value, stderr, lower, upper, sigmas, slack=1e-12):
    return bool(value + sigmas * stderr >= lower - slack and value - sigmas * stderr <= upper + slack)


def bound_report(kappa, scatterer, E_grid, params: MCParams = MCParams(),
                 gamma_tilde_scale: float = 1.0) -> list[BoundRow]:
    """One row per energy: estimates, bounds and pass flags.

    ``gamma_tilde_scale`` multiplies the Lyapunov bound before comparison;
    it exists so tests can confirm that a corrupted bound is caught.
    """
    E = np.asarray(E_grid, dtype=float)
    order = np.argsort(E)
    xi_est = spectral_shift_mc(kappa, scatterer, E[order], params.n_xi, params.realizations_xi,
                               params.seed, params.workers)
    xi_by_index = {int(i): est for i, est in zip(order, xi_est)}
    rows = []
    for i, e in enumerate(E):
        g = lyapunov_mc(kappa, scatterer, float(e), params.n_gamma, params.realizations_gamma,
                        params.seed, params.workers)
        gt = ens.gamma_tilde(kappa, scatterer, float(e)) * gamma_tilde_scale
        env = ens.ids_envelope(kappa, scatterer, float(e))
        xi = xi_by_index[i]
        lo, hi = env.xi_mean - env.r, env.xi_mean + env.r
        N_mc = env.N_free - xi.mean
        rows.append(BoundRow(
            float(e), g.mean, g.stderr, float(gt), bool(g.mean + params.sigmas * g.stderr <= gt + 1e-12),
            xi.mean, xi.stderr, env.xi_mean, env.r, lo, hi,
            _within(xi.mean, xi.stderr, lo, hi, params.sigmas),
            N_mc, env.N_lower, env.N_upper,
            _within(N_mc, xi.stderr, env.N_lower, env.N_upper, params.sigmas)))
    return rows


def rows_to_csv(rows, columns=None) -> str:
    """CSV text with floats in shortest round-trip form and booleans as 0/1."""
    if not rows:
        return ""
    cols = columns or [f.name for f in fields(rows[0])]
    buf = io.StringIO()
    w = csv.writer(buf, lineterminator="\n")
    w.writerow(cols)
    for row in rows:
        d = asdict(row) if not isinstance(row, dict) else row
        w.writerow([_fmt(d[c]) for c in cols])
    return buf.getvalue()


def _fmt(v):
    if isinstance(v, (bool, np.bool_)):
        return "1" if v else "0"
    if isinstance(v, (float, np.floating)):
        return repr(float(v))
    return str(v)


# -- Thouless formula ------------------------------------------------------------

@dataclass(frozen=True)
class ThoulessTerms:
    E_check: float
    gamma: float
    integral: float
    tail: float
    tail_constant: float

    @property
    def rhs(self) -> float:
        return self.integral + self.tail

    @property
    def residual(self) -> float:
        return abs(self.gamma - self.rhs) / max(abs(self.gamma), 0.01)


def thouless_grid(E_check: float, k_step: float = 0.004, k_max: float = 60.0,
                  k_min: float = 0.01) -> np.ndarray:
    """Grid uniform in ``sqrt(E)`` that contains ``E_check`` as a node."""
    kc = math.sqrt(E_check)
    below = int(math.floor((kc - k_min) / k_step))
    above = int(math.floor((k_max - kc) / k_step))
    k = kc + k_step * np.arange(-below, above + 1)
    E = k * k
    E[below] = E_check
    return E


def thouless_terms(kappa, scatterer, E_check: float, E_grid=None, n: int = 1000,
                   n_realizations: int = 2, master_seed: int = 0, workers: int = 1) -> ThoulessTerms:
    """Both sides of ``gamma(E) = -int log|E - E'| dxi(E')`` at ``E_check > 0``.

    After integration by parts the right side is the principal value
    ``PV int_0^inf xi(E') / (E' - E) dE'``.  The singular part is subtracted
    analytically, ``xi(0) = 0`` closes the low end and the tail above the grid
    uses ``xi ~ c / sqrt(E')`` with ``c`` fitted on the top quarter of the grid.
    Couplings must be nonnegative so that ``xi`` vanishes below zero energy.
    """
    lo, _ = kappa.support
    if lo < 0:
        raise ValueError("the Thouless check needs couplings supported in [0, inf)")
    E = thouless_grid(E_check) if E_grid is None else np.asarray(E_grid, dtype=float)
    hits = np.flatnonzero(np.isclose(E, E_check, rtol=1e-12, atol=0))
    if hits.size != 1:
        raise ValueError("E_check must be a node of the energy grid")
    i = int(hits[0])
    if i < 2 or i > E.size - 3:
        raise ValueError("E_check is too close to the edge of the energy grid")

    xi = np.array([est.mean for est in
                   spectral_shift_mc(kappa, scatterer, E, n, n_realizations, master_seed, workers)])
    gamma = lyapunov_mc(kappa, scatterer, float(E_check), n, n_realizations, master_seed, workers).mean

    xc = xi[i]
    Ez = np.concatenate([[0.0], E])
    xz = np.concatenate([[0.0], xi])
    j = i + 1
    diff = Ez - E_check
    diff[j] = 1.0
    g = (xz - xc) / diff
    g[j] = (xz[j + 1] - xz[j - 1]) / (Ez[j + 1] - Ez[j - 1])
    integral = float(np.trapezoid(g, Ez) + xc * math.log((Ez[-1] - E_check) / E_check))

    top = slice(int(0.75 * E.size), None)
    c = float(np.mean(np.sqrt(E[top]) * xi[top]))
    sm, sc = math.sqrt(E[-1]), math.sqrt(E_check)
    tail = c / sc * math.log((sm + sc) / (sm - sc))
    return ThoulessTerms(float(E_check), float(gamma), integral, tail, c)


def thouless_residual(kappa, scatterer, E_check: float, E_grid=None, **mc) -> float:
    """``|gamma_hat - RHS| / max(|gamma_hat|, 0.01)``."""
    return thouless_terms(kappa, scatterer, E_check, E_grid, **mc).residual


# -- decay rates ------------------------------------------------------------------

def decay_fit(E, y, E_min_fit: float) -> float:
    """Least-squares slope of ``log y`` against ``log E`` for ``E >= E_min_fit``.

    Returns ``-inf`` when the quantity vanishes somewhere in the tail (decay
    faster than any power).
    """
    E = np.asarray(E, dtype=float)
    y = np.asarray(y, dtype=float)
    tail = E >= E_min_fit
    if tail.sum() < 8:
        raise ValueError("need at least 8 points above E_min_fit")
    if np.any(y[tail] <= 0):
        return -math.inf
    slope, _ = np.polyfit(np.log(E[tail]), np.log(y[tail]), 1)
    return float(slope)


def delta_convergence(alpha: float, E: float, eps_sequence, points_inside: int = 64,
                      steps: int = 256) -> np.ndarray:
    """``|T_eps - T| + |R_eps - R|`` for box approximants of a point interaction."""
    ref = kp_scattering(alpha, E)
    errs = []
    for eps in eps_sequence:
        s = grid_scattering(delta_approximant(eps, points_inside), alpha, E, steps)
        errs.append(abs(s.T - ref.T) + abs(s.R - ref.R))
    return np.array(errs)


def convergence_order(eps_sequence, errors) -> float:
    """Empirical order from the last two points."""
    e1, e2 = eps_sequence[-2:]
    d1, d2 = errors[-2:]
    return float(math.log(d1 / d2) / math.log(e1 / e2))


def proposition3_ratio(kappa, scatterer, potential, E_tail) -> np.ndarray:
    """``sqrt(E) |E{xi_alpha(E)}| / (E{|alpha|^(1/2)}^2 int|f|)`` on a tail grid."""
    a, w = kappa.nodes()
    scale = float(w @ np.sqrt(np.abs(a))) ** 2 * potential.l1_norm()
    E = np.asarray(E_tail, dtype=float)
    if scale == 0:
        return np.zeros(E.shape)
    xi = np.atleast_1d(ens.mean_single_site_xi(kappa, scatterer, E))
    return np.sqrt(E) * np.abs(xi) / scale


def proposition3_scaling(kappa, scatterer, potential, E_tail) -> float:
    """Supremum of :func:`proposition3_ratio` over the tail grid."""
    return float(np.max(proposition3_ratio(kappa, scatterer, potential, E_tail)))
