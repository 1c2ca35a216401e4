"""A blurred prior with no exact null, and the nulls its Taylor expansions imply."""

import numpy as np

from fdrkit.onegroup import (PriorMixture, convolve_prior, derivatives_at_zero,
                             posterior_cumulants_zero, taylor_fdr, taylor_null, taylor_p0)

# 90% of effects near 0 with sd 0.5, 10% near 2.5
prior = PriorMixture((0.9, 0.1), (0.0, 2.5), (0.5, 0.5))
c = posterior_cumulants_zero(prior)
print(f"posterior at z = 0: mean {c.E0:.5f}, variance {c.V0:.5f}, third cumulant {c.S0:.5f}")

# the same numbers appear as derivatives of log f at zero
d = derivatives_at_zero(lambda t: convolve_prior(prior, t), J=3)
print(f"numerical: l'(0) = {d[1]:.5f}, -l''(0) = {-d[2]:.5f} (1 - V0 = {c.Vbar0:.5f}), l'''(0) = {d[3]:.5f}")

f0 = float(convolve_prior(prior, 0.0))
print("\n J   delta0   sigma0      p0")
for J in (0, 1, 2):
    m = taylor_null(c, f0, J)
    print(f" {J}  {m.delta0:7.4f}  {m.sigma0:7.4f}  {m.p0_raw:7.4f}")
print(f" 3        .        .  {taylor_p0(c, f0, 3):7.4f}")

# higher-order nulls claim more of the density away from zero
z = np.array([1.0, 2.0, 3.0])


def f(t):
    return convolve_prior(prior, t)


for J in range(4):
    print(f"fdr with J={J}: " + "  ".join(f"{v:.3f}" for v in taylor_fdr(f, c, J, z)))
