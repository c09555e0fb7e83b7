"""Single-site scattering data at positive energy.

Conventions
-----------
Plane waves are ``exp(+-i k x)`` with ``k = sqrt(E)``.  ``T`` is the
transmission amplitude, ``L`` the reflection amplitude for a wave incident from
the left and ``R`` the one for a wave incident from the right.  With this
naming the matrix

    Lambda = [[1/T, -R/T], [L/T, 1/conj(T)]]

maps the plane-wave amplitudes right of the scatterer onto those left of it,
so a chain multiplies left to right in increasing position.  The per-site
factor is ``U^{-1/2} Lambda U^{-1/2}`` with ``U = diag(e^{ik}, e^{-ik})``.
"""
from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .potential import FormalDelta, GridPotential, SingleSitePotential, HALF_CELL

INVARIANT_TOL = 1e-9
DEFAULT_STEPS = 1024
DEFAULT_ANCHOR_ENERGY = 1e4
MAX_REFINE_DEPTH = 20

_GAUSS_OFFSET = np.sqrt(3.0) / 6.0


class ScatteringError(ValueError):
    """Scattering data could not be formed or violates unitarity."""


class UnwrapError(RuntimeError):
    """Phase unwrapping failed after the maximum refinement depth."""


@dataclass(frozen=True)
class ScatteringData:
    """S-matrix entries at energy ``E``; fields may be scalars or arrays."""

    energy: np.ndarray | float
    T: np.ndarray | complex
    R: np.ndarray | complex
    L: np.ndarray | complex

    def unitarity_defects(self) -> dict[str, float]:
        T, R, L = (np.asarray(v) for v in (self.T, self.R, self.L))
        return {
            "flux": float(np.max(np.abs(np.abs(T) ** 2 + np.abs(R) ** 2 - 1.0))),
            "reflection": float(np.max(np.abs(np.abs(R) - np.abs(L)))),
            "orthogonality": float(np.max(np.abs(T * np.conj(R) + L * np.conj(T)))),
        }

    def check(self, tol: float = INVARIANT_TOL) -> "ScatteringData":
        if np.any(np.asarray(self.energy) <= 0):
            raise ScatteringError("scattering data needs E > 0")
        if np.any(np.asarray(self.T) == 0):
            raise ScatteringError("vanishing transmission amplitude")
        bad = {k: v for k, v in self.unitarity_defects().items() if not v <= tol}
        if bad:
            raise ScatteringError(f"S-matrix not unitary within {tol}: {bad}")
        return self

    def det_s(self):
        return self.T * self.T - self.R * self.L

    def translated(self, shift: float) -> "ScatteringData":
        """Data of the same scatterer moved by ``shift`` along the line."""
        phase = np.exp(2j * np.sqrt(self.energy) * shift)
        return ScatteringData(self.energy, self.T, self.R / phase, self.L * phase)

    def __getitem__(self, idx) -> "ScatteringData":
        e = np.broadcast_to(self.energy, np.shape(self.T))
        return ScatteringData(e[idx], np.asarray(self.T)[idx], np.asarray(self.R)[idx],
                              np.asarray(self.L)[idx])


# -- propagation -------------------------------------------------------------

def free_propagator(k, length):
    """Real fundamental matrix of ``-psi'' = k^2 psi`` over ``length``."""
    k = np.asarray(k, dtype=float)
    c, s = np.cos(k * length), np.sin(k * length)
    out = np.empty(k.shape + (2, 2))
    out[..., 0, 0] = c
    out[..., 0, 1] = s / k
    out[..., 1, 0] = -k * s
    out[..., 1, 1] = c
    return out


def _expm_traceless(p, q, r):
    """``exp([[p, q], [r, -p]])`` elementwise; exact determinant one."""
    s2 = p * p + q * r
    root = np.sqrt(np.abs(s2))
    small = root < 1e-4
    # sinh(x)/x and cos(x) series for tiny arguments keep full precision
    rs = np.where(small, 1.0, root)
    c = np.where(s2 >= 0, np.cosh(rs), np.cos(rs))
    sc = np.where(s2 >= 0, np.sinh(rs) / rs, np.sin(rs) / rs)
    c = np.where(small, 1.0 + s2 / 2 + s2 * s2 / 24, c)
    sc = np.where(small, 1.0 + s2 / 6 + s2 * s2 / 120, sc)
    out = np.empty(np.shape(s2) + (2, 2))
    out[..., 0, 0] = c + sc * p
    out[..., 0, 1] = sc * q
    out[..., 1, 0] = sc * r
    out[..., 1, 1] = c - sc * p
    return out


def fundamental_matrix(p: SingleSitePotential, alpha, E, steps: int = DEFAULT_STEPS) -> np.ndarray:
    """Map ``(psi, psi')`` at ``x=-1/2`` to ``x=+1/2`` for ``-psi'' + alpha f psi = E psi``.

    The sampled span of ``f`` is crossed with a fourth-order Magnus integrator
    (two Gauss nodes per step); the free margins are propagated exactly.
    When ``steps`` is at least the number of grid intervals it is rounded up to
    a multiple of it, so that no step straddles a kink of the interpolant.
    Broadcasts over ``alpha`` and ``E``; returns shape ``(..., 2, 2)``.
    """
    if isinstance(p, FormalDelta):
        raise ScatteringError("a point interaction has no ODE propagator; use the closed forms")
    if steps < 16:
        raise ValueError("at least 16 integration steps are required")
    alpha, E = np.broadcast_arrays(np.asarray(alpha, dtype=float), np.asarray(E, dtype=float))
    if np.any(E <= 0):
        raise ScatteringError("energy must be positive")
    x0, x1 = p.span
    intervals = p.x.size - 1
    if steps >= intervals:
        steps = -(-steps // intervals) * intervals
    h = (x1 - x0) / steps
    left = x0 + h * np.arange(steps)
    f1 = p(left + h * (0.5 - _GAUSS_OFFSET))
    f2 = p(left + h * (0.5 + _GAUSS_OFFSET))
    c = np.sqrt(3.0) * h * h / 12.0

    m00 = np.ones(E.shape)
    m01 = np.zeros(E.shape)
    m10 = np.zeros(E.shape)
    m11 = np.ones(E.shape)
    for i in range(steps):
        w1 = alpha * f1[i] - E
        w2 = alpha * f2[i] - E
        step = _expm_traceless(c * (w1 - w2), np.full(E.shape, h), 0.5 * h * (w1 + w2))
        a, b, cc, d = step[..., 0, 0], step[..., 0, 1], step[..., 1, 0], step[..., 1, 1]
        m00, m01, m10, m11 = (a * m00 + b * m10, a * m01 + b * m11,
                              cc * m00 + d * m10, cc * m01 + d * m11)
    core = np.stack([np.stack([m00, m01], -1), np.stack([m10, m11], -1)], -2)
    k = np.sqrt(E)
    return free_propagator(k, HALF_CELL - x1) @ core @ free_propagator(k, x0 + HALF_CELL)


def _plane_wave_basis(k, x):
    """Columns: ``(psi, psi')`` of ``e^{ikx}`` and ``e^{-ikx}`` at ``x``."""
    ep, em = np.exp(1j * k * x), np.exp(-1j * k * x)
    out = np.empty(np.shape(k) + (2, 2), dtype=complex)
    out[..., 0, 0] = ep
    out[..., 0, 1] = em
    out[..., 1, 0] = 1j * k * ep
    out[..., 1, 1] = -1j * k * em
    return out


def _solve2(a, b, c, d, y0, y1):
    det = a * d - b * c
    return (d * y0 - b * y1) / det, (a * y1 - c * y0) / det, det


def scattering_from_fundamental(M, E, x_left: float = -HALF_CELL, x_right: float = HALF_CELL,
                                tol: float = INVARIANT_TOL, check: bool = True) -> ScatteringData:
    """Match plane waves on both sides of ``[x_left, x_right]``.

    Left incidence ``e^{ikx} + L e^{-ikx} -> T e^{ikx}`` and right incidence
    ``e^{-ikx} + R e^{ikx} -> T e^{-ikx}`` are solved separately; the two
    transmission amplitudes must agree.
    """
    M = np.asarray(M, dtype=float)
    E = np.asarray(E, dtype=float)
    if np.any(E <= 0):
        raise ScatteringError("energy must be positive")
    det_m = M[..., 0, 0] * M[..., 1, 1] - M[..., 0, 1] * M[..., 1, 0]
    if np.any(np.abs(det_m - 1.0) > 1e-6):
        raise ScatteringError("fundamental matrix is not unimodular")
    k = np.sqrt(np.broadcast_to(E, M.shape[:-2]))
    Pa = _plane_wave_basis(k, x_left)
    Pb = _plane_wave_basis(k, x_right)
    MPa = M @ Pa
    # left incidence: Pb[:,0] T - MPa[:,1] L = MPa[:,0]
    T1, L, d1 = _solve2(Pb[..., 0, 0], -MPa[..., 0, 1], Pb[..., 1, 0], -MPa[..., 1, 1],
                        MPa[..., 0, 0], MPa[..., 1, 0])
    # right incidence: Pb[:,0] R - MPa[:,1] T = -Pb[:,1]
    R, T2, d2 = _solve2(Pb[..., 0, 0], -MPa[..., 0, 1], Pb[..., 1, 0], -MPa[..., 1, 1],
                        -Pb[..., 0, 1], -Pb[..., 1, 1])
    scale = np.maximum(1.0, np.abs(k)) * np.maximum(1.0, np.abs(MPa).max(axis=(-1, -2)))
    if np.any(np.abs(d1) <= 1e-300) or np.any(np.abs(d1) < 1e-14 * scale):
        raise ScatteringError("singular matching system (T = 0)")
    if check and np.any(np.abs(T1 - T2) > tol * np.maximum(1.0, np.abs(T1))):
        raise ScatteringError("left and right incidence disagree on T")
    s = ScatteringData(E if E.ndim else float(E), _squeeze(T1), _squeeze(R), _squeeze(L))
    return s.check(tol) if check else s


def _squeeze(v):
    v = np.asarray(v)
    return complex(v) if v.ndim == 0 else v


def grid_scattering(p: GridPotential, alpha, E, steps: int = DEFAULT_STEPS,
                    tol: float = INVARIANT_TOL) -> ScatteringData:
    alpha, E = np.broadcast_arrays(np.asarray(alpha, dtype=float), np.asarray(E, dtype=float))
    M = fundamental_matrix(p, alpha, E, steps)
    return scattering_from_fundamental(M, E if E.ndim else float(E), tol=tol)


# -- Lambda matrices -----------------------------------------------------------

def phase_matrix(E, power: float = 1.0) -> np.ndarray:
    """``U_E^power = diag(e^{i p k}, e^{-i p k})``."""
    k = np.sqrt(np.asarray(E, dtype=float))
    out = np.zeros(k.shape + (2, 2), dtype=complex)
    out[..., 0, 0] = np.exp(1j * power * k)
    out[..., 1, 1] = np.exp(-1j * power * k)
    return out


def _from_entries(m11, m12, m21, m22) -> np.ndarray:
    m11, m12, m21, m22 = np.broadcast_arrays(m11, m12, m21, m22)
    out = np.empty(m11.shape + (2, 2), dtype=complex)
    out[..., 0, 0] = m11
    out[..., 0, 1] = m12
    out[..., 1, 0] = m21
    out[..., 1, 1] = m22
    return out


def lambda_matrix(s: ScatteringData) -> np.ndarray:
    """Unimodular amplitude transfer matrix of one scatterer."""
    T = np.asarray(s.T)
    if np.any(T == 0):
        raise ScatteringError("Lambda is undefined for T = 0")
    return _from_entries(1 / T, -s.R / T, s.L / T, 1 / np.conj(T))


def lambda_tilde(s: ScatteringData) -> np.ndarray:
    """Per-site factor ``U^{-1/2} Lambda U^{-1/2}`` of a lattice chain."""
    T = np.asarray(s.T)
    if np.any(T == 0):
        raise ScatteringError("Lambda is undefined for T = 0")
    ph = np.exp(1j * np.sqrt(np.asarray(s.energy, dtype=float)))
    return _from_entries(1 / (ph * T), -s.R / T, s.L / T, ph / np.conj(T))


def det2(m) -> np.ndarray:
    m = np.asarray(m)
    return m[..., 0, 0] * m[..., 1, 1] - m[..., 0, 1] * m[..., 1, 0]


# -- phase unwrapping ---------------------------------------------------------

def _wrap(x):
    return (x + np.pi) % (2 * np.pi) - np.pi


def unwrap_phase(phase_fn, energies, max_jump: float = np.pi / 2,
                 max_depth: int = MAX_REFINE_DEPTH, raw=None) -> np.ndarray:
    """Continuous phase on an ascending grid, anchored at its last point.

    ``phase_fn(E_array)`` returns wrapped phases.  Adjacent steps larger than
    ``max_jump`` are bisected (in ``log E``) until every sub-step is small.
    The last grid point keeps its principal value.  ``raw`` may carry
    precomputed wrapped phases on the grid itself.
    """
    E = np.asarray(energies, dtype=float)
    if E.ndim != 1 or E.size < 1 or np.any(np.diff(E) <= 0) or E[0] <= 0:
        raise ValueError("energies must be positive and strictly ascending")
    raw = np.asarray(phase_fn(E) if raw is None else raw, dtype=float)
    out = np.empty_like(raw)
    out[-1] = raw[-1]
    for i in range(E.size - 2, -1, -1):
        out[i] = out[i + 1] + _increment(phase_fn, E[i + 1], E[i], raw[i + 1], raw[i],
                                         max_jump, max_depth)
    return out


def _increment(phase_fn, e_from, e_to, p_from, p_to, max_jump, depth):
    step = _wrap(p_to - p_from)
    if abs(step) <= max_jump:
        return step
    if depth == 0:
        raise UnwrapError(f"phase step {step:.3g} between E={e_to:.6g} and {e_from:.6g} "
                          "remains too large after maximum refinement")
    mid = np.sqrt(e_from * e_to)
    p_mid = float(phase_fn(np.array([mid]))[0])
    return (_increment(phase_fn, e_from, mid, p_from, p_mid, max_jump, depth - 1)
            + _increment(phase_fn, mid, e_to, p_mid, p_to, max_jump, depth - 1))


def anchor_grid(E_grid, anchor_energy: float = DEFAULT_ANCHOR_ENERGY, per_decade: int = 16) -> tuple[np.ndarray, np.ndarray]:
    """Extend ascending ``E_grid`` by log-spaced points up to ``anchor_energy``.

    Returns the extended grid and the indices of the original points in it.
    """
    E = np.asarray(E_grid, dtype=float)
    top = max(anchor_energy, float(E[-1]))
    decades = np.log10(top / E[-1])
    extra = np.logspace(np.log10(E[-1]), np.log10(top), max(2, int(np.ceil(decades * per_decade)) + 1))[1:]
    full = np.concatenate([E, extra[extra > E[-1] * (1 + 1e-12)]])
    return full, np.arange(E.size)


def single_site_phase_shift(p: SingleSitePotential, alpha: float, E_grid,
                            steps: int = DEFAULT_STEPS, anchor_energy: float | None = None):
    """Scattering phase ``delta = (1/2i) log det S`` and ``xi = -delta/pi``.

    The phase is continued in ``E`` from the largest grid energy, where it is
    taken on its principal branch (``delta -> 0`` as ``E -> infinity``).  When
    ``anchor_energy`` is given the grid is first extended up to it.
    Returns arrays ``(E, delta, xi)`` on the input grid.
    """
    E = np.asarray(E_grid, dtype=float)
    if isinstance(p, FormalDelta):
        from .kronig_penney import kp_scattering
        delta = np.angle(kp_scattering(alpha, E).det_s()) / 2.0
        return E, delta, -delta / np.pi
    full, idx = (E, np.arange(E.size)) if anchor_energy is None else anchor_grid(E, anchor_energy)

    def phase(e):
        return np.angle(grid_scattering(p, alpha, e, steps).det_s())

    if alpha == 0:
        delta = np.zeros(E.size)
    else:
        delta = unwrap_phase(phase, full)[idx] / 2.0
    return E, delta, -delta / np.pi


# -- scatterers -----------------------------------------------------------------

class GridScatterer:
    """Single-site scattering for a sampled shape, cached per (alpha, E)."""

    def __init__(self, potential: GridPotential, steps: int = DEFAULT_STEPS,
                 anchor_energy: float = DEFAULT_ANCHOR_ENERGY):
        self.potential = potential
        self.steps = steps
        self.anchor_energy = anchor_energy
        self._xi_cache: dict[bytes, dict[float, np.ndarray]] = {}

    def __call__(self, alpha, E) -> ScatteringData:
        return grid_scattering(self.potential, alpha, E, self.steps)

    def xi(self, alpha, E_grid) -> np.ndarray:
        """Single-site spectral shift, shape ``alpha.shape + E_grid.shape``."""
        alpha = np.atleast_1d(np.asarray(alpha, dtype=float))
        E = np.atleast_1d(np.asarray(E_grid, dtype=float))
        order = np.argsort(E)
        if np.any(np.diff(E[order]) == 0):
            raise ValueError("energies must be distinct")
        cache = self._xi_cache.setdefault(E.tobytes(), {})
        missing = sorted({float(a) for a in alpha.ravel()} - cache.keys())
        if missing:
            full, idx = anchor_grid(E[order], self.anchor_energy)
            todo = np.array(missing)
            # one vectorised solve for every coupling on the whole grid
            raw = np.angle(grid_scattering(self.potential, todo[:, None],
                                           np.broadcast_to(full, (todo.size, full.size)), self.steps).det_s())
            for a, row in zip(missing, np.atleast_2d(raw)):
                vals = np.zeros(E.size)
                if a != 0:
                    def phase(e, a=a):
                        return np.angle(grid_scattering(self.potential, a, e, self.steps).det_s())
                    vals[order] = -unwrap_phase(phase, full, raw=row)[idx] / (2 * np.pi)
                cache[a] = vals
        out = np.empty(alpha.shape + E.shape)
        for i, a in np.ndenumerate(alpha):
            out[i] = cache[float(a)]
        return out

    def __repr__(self):
        return f"GridScatterer({self.potential.name}, steps={self.steps})"
