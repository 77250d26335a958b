# %% [markdown]
# # Conformal measures and equilibrium states
#
# Weighted backward orbits sample the conformal measure. Reweighting by the
# leading eigenfunction gives the invariant equilibrium state.

# %%
import numpy as np

from thermoscope import RationalMap, Weight
from thermoscope.measures import (affine_moment, conformality_defect, default_dictionary,
                                  integrate, invariance_defect, julia_sample, sample_conformal,
                                  sample_equilibrium)
from thermoscope.oracles import arcsine_moment
from thermoscope.thermo import thermo_report
from thermoscope.transfer import build_ulam, power_iteration

# %% [markdown]
# ## Chebyshev map
# The Julia set of z^2 - 2 is the segment [-2, 2] and its measure of maximal
# entropy is the arcsine law, whose even moments are central binomials.

# %%
cheb = RationalMap.polynomial([-2, 0, 1], name="z^2-2")
zero = Weight.constant(0.0)
J = julia_sample(cheb, 24, 1024)
res = power_iteration(build_ulam(cheb, zero, J))
mu = sample_equilibrium(cheb, zero, None, 16, res.lambda_hat, res.rho)
for k in (2, 4, 6):
    print(f"x^{k}: sampled {integrate(mu, affine_moment(k)).real:.6f}  exact {arcsine_moment(k)}")

# %% [markdown]
# ## Basilica with a smooth weight
# Both defects should shrink as the trees get deeper.

# %%
f = RationalMap.polynomial([-1, 0, 1], name="z^2-1")
w = Weight.chart_harmonic(0.3)
J = julia_sample(f, 24, 4096)
res = power_iteration(build_ulam(f, w, J))
D = default_dictionary(w)
for depth in (8, 10, 12, 14):
    m, total = sample_conformal(f, w, None, depth, res.lambda_hat)
    mu = sample_equilibrium(f, w, None, depth, res.lambda_hat, res.rho)
    print(f"depth {depth:2d}: conformality {conformality_defect(m, f, w, res.lambda_hat, D):.2e}"
          f"  invariance {invariance_defect(mu, f, D):.2e}  mass {total:.6f}")

# %%
report = thermo_report(f, w, res.lambda_hat, res.rho, mu)
for key, value in report.to_dict().items():
    print(f"{key:22s} {value}")
