# %% [markdown]
# # Repelling periodic orbits
#
# Weighted sums over repelling periodic points approximate the equilibrium
# state. For z^2 with zero weight every period-n point other than 0 and
# infinity is a root of unity, so the answer is known exactly.

# %%
import numpy as np

from thermoscope import RationalMap, Weight
from thermoscope.measures import (default_dictionary, julia_sample, moment_discrepancy,
                                  sample_equilibrium)
from thermoscope.periodic import (lyapunov_from_periodic, periodic_measure, periodic_points,
                                  select_repelling_near_julia)
from thermoscope.transfer import build_ulam, power_iteration

f = RationalMap.polynomial([0, 0, 1], name="z^2")
J = julia_sample(f, 24, 4096)

for n in (4, 6, 8):
    pts = periodic_points(f, n)
    sel = select_repelling_near_julia(pts, J)
    mass = periodic_measure(f, Weight.constant(0.0), 2.0, sel, n).total_mass
    print(f"n={n}: {len(pts)} points, {len(sel)} repelling near J, mass {mass:.6f}"
          f" = 1 - 2^-{n}: {np.isclose(mass, 1 - 2.0 ** -n)}")

# %% [markdown]
# With a nonconstant weight the periodic measure is compared against the
# tree-sampled equilibrium state.

# %%
w = Weight.angular(0.2, 1)
res = power_iteration(build_ulam(f, w, J))
eq = sample_equilibrium(f, w, None, 16, res.lambda_hat, res.rho)
n = 8
sel = select_repelling_near_julia(periodic_points(f, n, w=w), J)
mu_n = periodic_measure(f, w, res.lambda_hat, sel, n)
print(f"unnormalized mass {mu_n.total_mass:.6f}")
print(f"moment discrepancy {moment_discrepancy(mu_n.normalized_copy(), eq, default_dictionary(w)):.2e}")
print(f"Lyapunov from orbits {lyapunov_from_periodic(f, w, res.lambda_hat, sel, n):.6f}")
