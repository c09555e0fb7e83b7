# # Scattering off one lattice site
#
# A single bump `alpha * f(x)` sits inside the cell `[-1/2, 1/2]`.  Away from
# it the wave function is a sum of plane waves, and the bump is fully described
# at energy `E = k^2` by a transmission amplitude `T` and two reflection
# amplitudes: `L` for a wave coming in from the left, `R` from the right.

# +
import numpy as np

from rsbounds.kronig_penney import kp_scattering, kp_xi
from rsbounds.potential import delta_approximant, gaussian_truncated, square
from rsbounds.scattering import GridScatterer, grid_scattering, lambda_matrix, det2
# -

# ## A square barrier
#
# The integrator crosses the sampled span with a fourth-order Magnus scheme.
# For a flat barrier filling the whole cell the textbook answer is available,
# so we start there.

k, q = np.sqrt(2.0), 1.0
textbook = np.exp(-1j * k) / (np.cos(q) - 1j * (k * k + q * q) / (2 * k * q) * np.sin(q))
s = grid_scattering(square(1.0), 1.0, 2.0)
print("T (integrated):", s.T)
print("T (textbook):  ", textbook)
print("|T|^2 + |R|^2 =", abs(s.T) ** 2 + abs(s.R) ** 2)

# ## Flux conservation over a wide range of energies
#
# The S-matrix is unitary, so three quantities must vanish.  The transfer
# matrix built from `(T, R, L)` is unimodular.

E = np.geomspace(1e-2, 1e6, 200)
s = grid_scattering(gaussian_truncated(0.08, 0.2), 12.0, E)
for name, value in s.unitarity_defects().items():
    print(f"{name:>14}: {value:.1e}")
print(f"{'det - 1':>14}: {np.max(np.abs(det2(lambda_matrix(s)) - 1)):.1e}")

# The shape is off-centre, so the two reflection amplitudes differ in phase
# but not in size.

print("max |R - L|   =", np.max(np.abs(s.R - s.L)))
print("max ||R|-|L|| =", np.max(np.abs(np.abs(s.R) - np.abs(s.L))))

# ## Shrinking the bump to a point
#
# Boxes of width `eps` and height `1/eps` approach a point interaction, whose
# amplitudes are known in closed form.  The error falls linearly in `eps`.

ref = kp_scattering(2.0, 1.0)
print(f"{'eps':>8} {'|T - T0| + |R - R0|':>22}")
for eps in (1e-1, 1e-2, 1e-3, 1e-4):
    s = grid_scattering(delta_approximant(eps), 2.0, 1.0)
    print(f"{eps:8.0e} {abs(s.T - ref.T) + abs(s.R - ref.R):22.3e}")

# ## Spectral shift of one site
#
# The phase of `det S` continued down from high energy gives the spectral
# shift `xi`.  For a point interaction it is `arctan(alpha / 2k) / pi`.

E = np.array([0.25, 1.0, 4.0, 25.0, 100.0])
sc = GridScatterer(delta_approximant(1e-3))
print(np.column_stack([E, sc.xi(2.0, E)[0], kp_xi(2.0, E)]))

# A deep well binds states, and `xi` then counts them (with a minus sign) at
# low energy.

well = GridScatterer(square(0.5, 1.0))
print(well.xi(-400.0, np.array([0.05, 1.0, 10.0, 100.0]))[0])
