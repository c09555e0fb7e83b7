# # Integrated density of states from single-site data
#
# Per site, the spectral shift of a long chain equals the free count
# `sqrt(E)/pi` minus the integrated density of states.  Averaging the
# single-site shift gets within a computable width `r(E)` of it.

# +
import numpy as np

from rsbounds import ensemble as ens
from rsbounds.kronig_penney import KronigPenneyScatterer, kp_r_envelope, kp_scattering
from rsbounds.montecarlo import (chain_spectral_shift, pair_concatenation_correction,
                                 pair_correction_bound, spectral_shift_mc)
from rsbounds.potential import Realization
from rsbounds.verify import thouless_terms

kp = KronigPenneyScatterer()
pm1 = ens.bernoulli(1.0, -1.0)
# -

# ## Two sites
#
# Joining two scatterers adds their shifts plus a correction set by the
# product of the inner reflection amplitudes.  That correction is what keeps
# the chain value close to the average.

E = 3.0
r = Realization([2.0, -1.0, 0.0])
chain = 3 * chain_spectral_shift(r, kp, [E])[0]
s1, s2 = kp_scattering(2.0, E).translated(-1.0), kp_scattering(-1.0, E)
xi12 = pair_concatenation_correction(s1, s2)
print("chain      :", chain)
print("sum + join :", kp.xi([2.0, -1.0], E).sum() + xi12)
print("join, bound:", xi12, pair_correction_bound(s1, s2))

# ## Long chains
#
# Estimates from 64-site chains against the envelope.

E = np.array([1.0, 10.0, 100.0])
est = spectral_shift_mc(pm1, kp, E, 64, 100, master_seed=3)
print(f"{'E':>6} {'xi':>10} {'stderr':>8} {'mean xi':>9} {'r':>8} {'N lower':>8} {'N':>8} {'N upper':>8}")
for e, x in zip(E, est):
    env = ens.ids_envelope(pm1, kp, e)
    print(f"{e:6.0f} {x.mean:10.2e} {x.stderr:8.1e} {env.xi_mean:9.2e} {env.r:8.5f} "
          f"{env.N_lower:8.4f} {env.N_free - x.mean:8.4f} {env.N_upper:8.4f}")

# For point interactions the reflection average has explicit two-sided
# bounds, so `r(E)` decays like `1/sqrt(E)`.

lo, hi = kp_r_envelope(pm1, 100.0)
print("r(100) =", ens.r_of_E(pm1, kp, 100.0), "between", lo / np.pi, "and", hi / np.pi)

# ## A consistency check through the Lyapunov exponent
#
# The Lyapunov exponent is a log-potential of the spectral shift.  With
# couplings all equal to 2, E = 2 sits inside a band, so both sides should be
# near zero; the residual is measured against 0.01.

t = thouless_terms(ens.point_mass(2.0), kp, 2.0)
print("gamma:", t.gamma, " integral side:", t.rhs, " residual:", t.residual)
