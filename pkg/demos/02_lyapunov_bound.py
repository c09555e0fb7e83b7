# # Localization length and its upper bound
#
# For a chain of i.i.d. couplings the transmission through `2n+1` sites decays
# like `exp(-gamma (2n+1))`.  A bound on `gamma` follows from averaging the
# per-site transfer matrix product `Lt^dagger Lt` over the coupling law: half
# the log of the largest eigenvalue of that average.

# +
import numpy as np

from rsbounds import ensemble as ens
from rsbounds.kronig_penney import (KronigPenneyScatterer, kp_beta_plus_published,
                                    kp_beta_plus_scalar_formula, kp_ensemble_ab)
from rsbounds.montecarlo import exact_expectation_trace, lyapunov_mc
from rsbounds.potential import square
from rsbounds.scattering import GridScatterer
from rsbounds.verify import decay_fit

kp = KronigPenneyScatterer()
pm1 = ens.bernoulli(1.0, -1.0)
# -

# ## Point interactions with couplings +1 and -1
#
# Monte Carlo estimate against the bound.  Each realization gives one sample.

print(f"{'E':>6} {'gamma':>9} {'stderr':>8} {'bound':>8}")
for E in (0.5, 1.0, 2.0, 5.0, 10.0):
    est = lyapunov_mc(pm1, kp, E, 2000, 64, master_seed=1)
    print(f"{E:6.1f} {est.mean:9.5f} {est.stderr:8.5f} {ens.gamma_tilde(pm1, kp, E):8.5f}")

# ## Where the bound comes from
#
# The average `A = E{Lt^dagger Lt}` has equal diagonal entries `a` and an
# off-diagonal `b`.  Its trace powers sandwich the exact average of the
# squared transfer matrix norm, which we can enumerate for short chains.

m = ens.ensemble_matrices(pm1, kp, 1.0)
print("a =", m.a, " |b| =", abs(m.b), " beta+ =", m.beta_plus, " beta- =", m.beta_minus)
for n in (1, 2, 3):
    exact = exact_expectation_trace(pm1, kp, 1.0, n)
    print(f"n={n}: {2 * m.beta_minus ** (2 * n + 1):8.3f} <= {exact:8.3f} <= {2 * m.beta_plus ** (2 * n + 1):8.3f}")

# The closed form for point interactions matches the matrix average.  Two
# other closed forms circulate for this model; both understate `beta+`.

a, b = kp_ensemble_ab(pm1, 1.0)
print("matrix average     :", a + abs(b))
print("scalar b, no factor:", kp_beta_plus_scalar_formula(pm1, 1.0))
print("literature form    :", kp_beta_plus_published(pm1, 1.0))

# ## High-energy decay
#
# With mean-zero couplings the bound falls like `1/E`; otherwise like
# `1/sqrt(E)`.

E = np.geomspace(1e2, 1e6, 20)
print("slope, mean zero    :", decay_fit(E, [ens.gamma_tilde(pm1, kp, e) for e in E], 1e2))
print("slope, mean nonzero :", decay_fit(E, [ens.gamma_tilde(ens.bernoulli(0, 2), kp, e) for e in E], 1e2))

# The same machinery works for a sampled shape; here a square bump with
# couplings uniform on `[0, 1]`.

sc = GridScatterer(square())
kappa = ens.uniform(0.0, 1.0, 16)
for E in (1.0, 10.0):
    est = lyapunov_mc(kappa, sc, E, 500, 32, master_seed=2)
    print(f"E={E:5.1f}: gamma = {est.mean:.5f} +- {est.stderr:.5f}, bound {ens.gamma_tilde(kappa, sc, E):.5f}")
