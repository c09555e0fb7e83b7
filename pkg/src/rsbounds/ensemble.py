"""Expectations over the coupling distribution.

Here live the matrix ``A(E) = E{Lt^dagger Lt}``, its extreme eigenvalues, the
Lyapunov bound ``gamma_tilde = log(beta_plus)/2``, the recursion for
``A_j``, and the ingredients of the integrated-density-of-states envelope.
"""
from __future__ import annotations

from dataclasses import dataclass, field
from typing import Callable, Sequence, Union

import numpy as np

from .scattering import ScatteringData, lambda_tilde

MASS_TOL = 1e-12
DEFAULT_QUADRATURE_ORDER = 64


class InternalConsistencyError(ArithmeticError):
    """Two routes to the same quantity disagree; indicates a bug, not bad input."""


@dataclass(frozen=True, eq=False)
class Discrete:
    """Finitely many atoms ``alpha_i`` with probabilities ``w_i``."""

    atoms: Sequence[float]
    weights: Sequence[float]

    def __post_init__(self):
        a = np.array(self.atoms, dtype=float)
        w = np.array(self.weights, dtype=float)
        if a.ndim != 1 or a.shape != w.shape or a.size == 0:
            raise ValueError("atoms and weights must be non-empty 1-d sequences of equal length")
        if not (np.all(np.isfinite(a)) and np.all(np.isfinite(w))):
            raise ValueError("atoms and weights must be finite")
        if np.any(w < 0):
            raise ValueError("weights must be nonnegative")
        if abs(w.sum() - 1.0) > MASS_TOL:
            raise ValueError(f"weights sum to {float(w.sum())!r}, not 1")
        object.__setattr__(self, "atoms", a)
        object.__setattr__(self, "weights", w)

    def nodes(self) -> tuple[np.ndarray, np.ndarray]:
        return self.atoms, self.weights

    @property
    def support(self) -> tuple[float, float]:
        live = self.atoms[self.weights > 0]
        return float(live.min()), float(live.max())

    def sample(self, rng: np.random.Generator, size: int) -> np.ndarray:
        if self.atoms.size == 1:
            return np.full(size, self.atoms[0])
        return self.atoms[rng.choice(self.atoms.size, size=size, p=self.weights)]


def point_mass(alpha: float) -> Discrete:
    return Discrete([alpha], [1.0])


def bernoulli(a: float, b: float, p: float = 0.5) -> Discrete:
    return Discrete([a, b], [p, 1.0 - p])


@dataclass(frozen=True, eq=False)
class Density:
    """Absolutely continuous coupling law on a compact interval.

    Expectations use Gauss-Legendre quadrature on each panel between
    ``breakpoints`` (use them where the density has kinks).
    """

    support: tuple[float, float]
    density: Callable[[np.ndarray], np.ndarray]
    quadrature_order: int = DEFAULT_QUADRATURE_ORDER
    breakpoints: tuple[float, ...] = ()
    name: str = "density"
    _cdf: tuple = field(default=None, init=False, repr=False)

    def __post_init__(self):
        lo, hi = (float(v) for v in self.support)
        if not (np.isfinite(lo) and np.isfinite(hi) and lo < hi):
            raise ValueError("support must be a finite interval")
        if self.quadrature_order < 1:
            raise ValueError("quadrature order must be positive")
        object.__setattr__(self, "support", (lo, hi))
        _, w = self.nodes()
        if np.any(w < 0):
            raise ValueError("density must be nonnegative")
        if abs(w.sum() - 1.0) > MASS_TOL:
            raise ValueError(f"density integrates to {float(w.sum())!r}, not 1")

    def _panels(self):
        lo, hi = self.support
        cuts = sorted(b for b in self.breakpoints if lo < b < hi)
        return list(zip([lo, *cuts], [*cuts, hi]))

    def nodes(self, order: int | None = None) -> tuple[np.ndarray, np.ndarray]:
        x, w = np.polynomial.legendre.leggauss(order or self.quadrature_order)
        xs, ws = [], []
        for a, b in self._panels():
            xs.append(0.5 * (b - a) * x + 0.5 * (a + b))
            ws.append(0.5 * (b - a) * w)
        xs, ws = np.concatenate(xs), np.concatenate(ws)
        return xs, ws * np.asarray(self.density(xs), dtype=float)

    def with_order(self, order: int) -> "Density":
        return Density(self.support, self.density, order, self.breakpoints, self.name)

    def _inverse_cdf(self):
        if self._cdf is None:
            pts = np.unique(np.concatenate([np.linspace(a, b, 1025) for a, b in self._panels()]))
            pdf = np.maximum(np.asarray(self.density(pts), dtype=float), 0.0)
            cdf = np.concatenate([[0.0], np.cumsum(0.5 * (pdf[1:] + pdf[:-1]) * np.diff(pts))])
            if not cdf[-1] > 0:
                raise ValueError("density cannot be normalized")
            object.__setattr__(self, "_cdf", (cdf / cdf[-1], pts))
        return self._cdf

    def sample(self, rng: np.random.Generator, size: int) -> np.ndarray:
        """Inverse-CDF draws from a 1025-point-per-panel tabulation."""
        cdf, pts = self._inverse_cdf()
        return np.interp(rng.random(size), cdf, pts)


def uniform(lo: float, hi: float, order: int = DEFAULT_QUADRATURE_ORDER) -> Density:
    width = hi - lo
    return Density((lo, hi), lambda x: np.full(np.shape(x), 1.0 / width), order, name="uniform")


def triangular(lo: float, mode: float, hi: float, order: int = DEFAULT_QUADRATURE_ORDER) -> Density:
    def pdf(x):
        x = np.asarray(x, dtype=float)
        up = 2 * (x - lo) / ((hi - lo) * (mode - lo)) if mode > lo else np.zeros_like(x)
        down = 2 * (hi - x) / ((hi - lo) * (hi - mode)) if hi > mode else np.zeros_like(x)
        return np.where(x <= mode, up, down)
    return Density((lo, hi), pdf, order, breakpoints=(mode,), name="triangular")


CouplingDistribution = Union[Discrete, Density]


def kappa_from_config(cfg: dict):
    kind = cfg.get("type")
    if kind == "discrete":
        atoms = cfg["atoms"]
        return Discrete([float(a) for a, _ in atoms], [float(w) for _, w in atoms])
    if kind == "uniform":
        lo, hi = cfg["support"]
        return uniform(float(lo), float(hi), int(cfg.get("quadrature_order", DEFAULT_QUADRATURE_ORDER)))
    if kind == "triangular":
        lo, hi = cfg["support"]
        return triangular(float(lo), float(cfg["mode"]), float(hi),
                          int(cfg.get("quadrature_order", DEFAULT_QUADRATURE_ORDER)))
    raise ValueError(f"unknown kappa type {kind!r}")


# -- expectations ------------------------------------------------------------------

def expect(kappa, g: Callable[[np.ndarray], np.ndarray]):
    """``int g(alpha) dkappa(alpha)`` for scalar- or matrix-valued ``g``.

    ``g`` receives the whole node array and must return values with the node
    axis first.
    """
    a, w = kappa.nodes()
    vals = np.asarray(g(a))
    return np.tensordot(w, vals, axes=(0, 0))


@dataclass(frozen=True)
class EnsembleMatrices:
    energy: float
    A: np.ndarray
    a: float
    b: complex
    beta_plus: float
    beta_minus: float
    gamma_tilde: float


def _node_data(kappa, scatterer, E) -> tuple[np.ndarray, np.ndarray, ScatteringData]:
    alphas, w = kappa.nodes()
    s = scatterer(alphas, np.full(alphas.shape, float(E)))
    if np.any(np.asarray(s.T) == 0):
        raise ZeroDivisionError("vanishing transmission at a quadrature node")
    return alphas, w, s


def ensemble_matrices(kappa, scatterer, E: float, tol: float = 1e-10) -> EnsembleMatrices:
    """``A(E)`` by the closed-form entries, cross-checked against ``E{Lt^dagger Lt}``.

    ``a = E{2/|T|^2 - 1}`` and ``b = -2 e^{ik} E{R/|T|^2}``.
    """
    _, w, s = _node_data(kappa, scatterer, E)
    T2 = np.abs(s.T) ** 2
    a = float(w @ (2.0 / T2 - 1.0))
    b = complex(-2.0 * np.exp(1j * np.sqrt(E)) * (w @ (s.R / T2)))
    A = np.array([[a, b], [np.conj(b), a]])

    lt = lambda_tilde(s)
    direct = np.tensordot(w, np.conj(np.swapaxes(lt, -1, -2)) @ lt, axes=(0, 0))
    if np.max(np.abs(direct - A)) > tol * max(1.0, a):
        raise InternalConsistencyError(f"closed-form A(E) differs from E{{Lt^+ Lt}} at E={E}")

    beta_plus, beta_minus = a + abs(b), a - abs(b)
    if beta_minus < -tol * max(1.0, a):
        raise InternalConsistencyError(f"negative smallest eigenvalue {beta_minus} at E={E}")
    return EnsembleMatrices(float(E), A, a, b, beta_plus, beta_minus, 0.5 * np.log(beta_plus))


def gamma_tilde(kappa, scatterer, E: float) -> float:
    return ensemble_matrices(kappa, scatterer, E).gamma_tilde


def a_recursion(kappa, scatterer, E: float, j: int) -> np.ndarray:
    """``A_0 = I``, ``A_j = E{Lt^dagger A_{j-1} Lt}``; returns ``A_j``."""
    if j < 0:
        raise ValueError("j must be nonnegative")
    _, w, s = _node_data(kappa, scatterer, E)
    lt = lambda_tilde(s)
    lt_h = np.conj(np.swapaxes(lt, -1, -2))
    A = np.eye(2, dtype=complex)
    for _ in range(j):
        A = np.tensordot(w, lt_h @ A @ lt, axes=(0, 0))
        A = 0.5 * (A + A.conj().T)
    return A


def mean_single_site_xi(kappa, scatterer, E) -> float | np.ndarray:
    """``E{xi_alpha(E)}``; vectorised over an ascending energy grid."""
    alphas, w = kappa.nodes()
    E_arr = np.atleast_1d(np.asarray(E, dtype=float))
    vals = w @ scatterer.xi(alphas, E_arr)
    return float(vals[0]) if np.ndim(E) == 0 else vals


def _reflection_ratio(s: ScatteringData) -> np.ndarray:
    aR = np.abs(s.R)
    with np.errstate(divide="ignore"):
        return np.where(aR < 1.0, aR / (1.0 - aR), np.inf)


def r_of_E(kappa, scatterer, E: float) -> float:
    """``min(1/2, E{|R|/(1-|R|)}/pi)``; the minimum is taken after averaging."""
    _, w, s = _node_data(kappa, scatterer, E)
    ratio = _reflection_ratio(s)
    if np.any(~np.isfinite(ratio) & (w > 0)):
        return 0.5
    return float(min(0.5, (w @ ratio) / np.pi))


def r_pointwise(kappa, scatterer, E: float) -> float:
    """``E{min(1/2, |R|/(pi (1-|R|)))}``, never larger than :func:`r_of_E`."""
    _, w, s = _node_data(kappa, scatterer, E)
    return float(w @ np.minimum(0.5, _reflection_ratio(s) / np.pi))


@dataclass(frozen=True)
class IDSEnvelope:
    energy: float
    N_lower: float
    N_upper: float
    N_free: float
    xi_mean: float
    r: float
    r_pointwise: float
    crude_lower: float
    crude_upper: float


def ids_envelope(kappa, scatterer, E: float) -> IDSEnvelope:
    """Two-sided bound on ``N(E)`` built from ``sqrt(E)/pi - E{xi_alpha} -+ r``.

    ``crude_*`` is the unit-width envelope ``N_free - E{xi_alpha} -+ 1``.
    """
    free = np.sqrt(E) / np.pi
    xi = mean_single_site_xi(kappa, scatterer, E)
    r = r_of_E(kappa, scatterer, E)
    return IDSEnvelope(float(E), free - xi - r, free - xi + r, free, xi, r,
                       r_pointwise(kappa, scatterer, E), free - xi - 1.0, free - xi + 1.0)
