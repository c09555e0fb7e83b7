"""Single-site potentials and the random potential built from them.

A single-site shape ``f`` lives in the unit cell ``[-1/2, 1/2]``.  Two variants
exist: :class:`GridPotential`, sampled on a uniform grid and linearly
interpolated in between, and :class:`FormalDelta`, a point interaction at the
origin that is never evaluated pointwise.
"""
from __future__ import annotations

from dataclasses import dataclass, field
from typing import Callable, Sequence, Union

import numpy as np

DEFAULT_GRID_POINTS = 2**10 + 1
HALF_CELL = 0.5


class NotPointwiseEvaluable(TypeError):
    """Raised when a point interaction is asked for a pointwise value."""


@dataclass(frozen=True, eq=False)
class GridPotential:
    """Shape function sampled on a uniform, sorted grid inside the unit cell.

    Values between samples are linearly interpolated; outside the sampled span
    the shape is zero.
    """

    x: np.ndarray
    values: np.ndarray
    name: str = "grid"

    def __post_init__(self):
        x = np.array(self.x, dtype=float)
        v = np.array(self.values, dtype=float)
        if x.ndim != 1 or x.shape != v.shape or x.size < 2:
            raise ValueError("grid positions and values must be 1-d arrays of equal length >= 2")
        if x[0] < -HALF_CELL - 1e-12 or x[-1] > HALF_CELL + 1e-12:
            raise ValueError("grid must lie inside [-1/2, 1/2]")
        dx = np.diff(x)
        if np.any(dx <= 0):
            raise ValueError("grid must be strictly increasing")
        if not np.allclose(dx, dx[0], rtol=1e-9, atol=0):
            raise ValueError("grid must be uniform")
        if not np.all(np.isfinite(v)):
            raise ValueError("potential values must be finite")
        x.setflags(write=False)
        v.setflags(write=False)
        object.__setattr__(self, "x", x)
        object.__setattr__(self, "values", v)

    @property
    def dx(self) -> float:
        return float(self.x[1] - self.x[0])

    @property
    def span(self) -> tuple[float, float]:
        return float(self.x[0]), float(self.x[-1])

    def __call__(self, x) -> np.ndarray:
        return np.interp(x, self.x, self.values, left=0.0, right=0.0)

    def l1_norm(self) -> float:
        """Exact integral of ``|f|`` for the piecewise-linear interpolant."""
        a, b = self.values[:-1], self.values[1:]
        same_sign = a * b >= 0
        denom = np.where(same_sign, 1.0, np.abs(a) + np.abs(b))
        crossing = (a * a + b * b) / (2.0 * denom)
        per_cell = np.where(same_sign, 0.5 * (np.abs(a) + np.abs(b)), crossing)
        return float(per_cell.sum() * self.dx)

    def is_even(self, tol: float = 1e-12) -> bool:
        return bool(np.allclose(self.x, -self.x[::-1], atol=tol)
                    and np.allclose(self.values, self.values[::-1], atol=tol))


@dataclass(frozen=True)
class FormalDelta:
    """Point interaction at the origin (Kronig-Penney single site)."""

    name: str = "delta"

    def l1_norm(self) -> float:
        return 1.0


SingleSitePotential = Union[GridPotential, FormalDelta]


@dataclass(frozen=True, eq=False)
class Realization:
    """Couplings ``alpha_{-n} .. alpha_n`` of one disorder realization."""

    couplings: np.ndarray
    n: int = field(init=False)

    def __post_init__(self):
        c = np.array(self.couplings, dtype=float)
        if c.ndim != 1 or c.size % 2 != 1:
            raise ValueError("a realization holds 2n+1 couplings")
        if not np.all(np.isfinite(c)):
            raise ValueError("couplings must be finite")
        c.setflags(write=False)
        object.__setattr__(self, "couplings", c)
        object.__setattr__(self, "n", (c.size - 1) // 2)

    @property
    def n_sites(self) -> int:
        return self.couplings.size

    @property
    def positions(self) -> np.ndarray:
        return np.arange(-self.n, self.n + 1, dtype=float)


def evaluate_potential(p: SingleSitePotential, alpha: float, x) -> np.ndarray | float:
    """Return ``alpha * f(x)`` for a sampled shape."""
    if isinstance(p, FormalDelta):
        raise NotPointwiseEvaluable("a point interaction is not pointwise evaluable")
    xa = np.asarray(x, dtype=float)
    if np.any(np.abs(xa) > HALF_CELL):
        raise ValueError("x must lie in [-1/2, 1/2]")
    out = alpha * p(xa)
    return float(out) if out.ndim == 0 else out


def birman_solomyak_norm(p: SingleSitePotential, alpha: float) -> float:
    """``[sum_j (int_cell_j |alpha f|)^(1/2)]^2`` for a single site.

    With the support confined to one cell this is ``|alpha| * int |f|``.
    """
    if isinstance(p, FormalDelta):
        raise NotPointwiseEvaluable("the norm needs a sampled shape")
    return abs(alpha) * p.l1_norm()


def realization_norm(p: GridPotential, couplings: Sequence[float]) -> float:
    """Birman-Solomyak norm of ``sum_j alpha_j f(x - j)``, one cell per site."""
    if isinstance(p, FormalDelta):
        raise NotPointwiseEvaluable("the norm needs a sampled shape")
    cells = np.sqrt(np.abs(np.asarray(couplings, dtype=float)) * p.l1_norm())
    return float(cells.sum() ** 2)


# -- built-in shapes ---------------------------------------------------------

def from_function(func: Callable[[np.ndarray], np.ndarray], n_points: int = DEFAULT_GRID_POINTS,
                  span: tuple[float, float] = (-HALF_CELL, HALF_CELL), name: str = "grid") -> GridPotential:
    x = np.linspace(span[0], span[1], n_points)
    return GridPotential(x, np.asarray(func(x), dtype=float), name=name)


def square(width: float = 0.5, height: float = 1.0, n_points: int = DEFAULT_GRID_POINTS) -> GridPotential:
    """Box of the given width centred at the origin on the default cell grid.

    Edge samples carry half the height so that the interpolant integrates to
    ``width * height`` whenever the edges fall on grid nodes.
    """
    if not 0 < width <= 1:
        raise ValueError("width must be in (0, 1]")
    x = np.linspace(-HALF_CELL, HALF_CELL, n_points)
    h = x[1] - x[0]
    inside = np.abs(x) < width / 2 - 1e-9 * h
    edge = np.isclose(np.abs(x), width / 2, atol=1e-9 * h)
    v = np.where(inside, height, 0.0) + np.where(edge, 0.5 * height, 0.0)
    if width == 1.0:
        v = np.full_like(x, height)
    return GridPotential(x, v, name="square")


def box(width: float, height: float = 1.0, points_inside: int = 64) -> GridPotential:
    """Narrow box sampled only across its own support (plus one zero node per side)."""
    if not 0 < width < 1:
        raise ValueError("width must be in (0, 1)")
    h = width / points_inside
    m = points_inside
    x = -width / 2 + h * np.arange(-1, m + 2)
    v = np.full(x.size, height)
    v[[0, -1]] = 0.0
    v[[1, -2]] = 0.5 * height
    return GridPotential(x, v, name="box")


def delta_approximant(eps: float, points_inside: int = 64) -> GridPotential:
    """``(1/eps) 1[-eps/2, eps/2]``, unit integral."""
    return box(eps, 1.0 / eps, points_inside)


def gaussian_truncated(sigma: float = 0.1, center: float = 0.0,
                       n_points: int = DEFAULT_GRID_POINTS) -> GridPotential:
    """Gaussian bump cut off smoothly at the cell edges.

    A ``cos^2`` taper keeps the shape and its first derivative continuous at
    ``x = +-1/2``.
    """
    def g(x):
        taper = np.cos(np.pi * x) ** 2
        return np.exp(-0.5 * ((x - center) / sigma) ** 2) * taper
    return from_function(g, n_points, name="gaussian_truncated")


def smooth_bump(n_points: int = DEFAULT_GRID_POINTS) -> GridPotential:
    """``cos^4(pi x)``: smooth, even, integral 3/8."""
    return from_function(lambda x: np.cos(np.pi * x) ** 4, n_points, name="smooth_bump")


def from_config(cfg: dict) -> SingleSitePotential:
    """Build a potential from a config mapping (see the CLI documentation)."""
    kind = cfg.get("type")
    if kind == "delta":
        return FormalDelta()
    if kind == "grid":
        samples = np.asarray(cfg["samples"], dtype=float)
        if samples.ndim == 2:
            return GridPotential(samples[:, 0], samples[:, 1])
        dx = float(cfg["dx"])
        start = float(cfg.get("start", -0.5 * dx * (samples.size - 1)))
        return GridPotential(start + dx * np.arange(samples.size), samples)
    if kind == "square":
        return square(float(cfg.get("width", 0.5)), float(cfg.get("height", 1.0)),
                      int(cfg.get("n_points", DEFAULT_GRID_POINTS)))
    if kind == "gaussian_truncated":
        return gaussian_truncated(float(cfg.get("sigma", 0.1)), float(cfg.get("center", 0.0)),
                                  int(cfg.get("n_points", DEFAULT_GRID_POINTS)))
    if kind == "delta_approximant":
        return delta_approximant(float(cfg["eps"]), int(cfg.get("points_inside", 64)))
    raise ValueError(f"unknown potential type {kind!r}")
