"""Scattering-theoretic bounds for one-dimensional random Schrodinger operators."""

__version__ = "0.1.0"

from .potential import (FormalDelta, GridPotential, Realization, birman_solomyak_norm, box,
                        delta_approximant, evaluate_potential, gaussian_truncated, smooth_bump, square)
from .scattering import GridScatterer, ScatteringData, grid_scattering, single_site_phase_shift
from .kronig_penney import KronigPenneyScatterer, kp_scattering, kp_xi
from .ensemble import (Density, Discrete, bernoulli, ensemble_matrices, gamma_tilde, ids_envelope,
                       point_mass, triangular, uniform)
from .montecarlo import chain_spectral_shift, chain_transmission, lyapunov_mc, spectral_shift_mc
