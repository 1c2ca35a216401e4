"""Intervals for the cases that BH picked out, frequentist and Bayesian."""

import numpy as np

from fdrkit.selectci import bayes_intervals, fcr_intervals
from fdrkit.sim import PRIOR_LEFT, simulate_two_groups

# 10,000 cases, 10% with mu ~ N(-3, 1); select on the left at q = 0.05
z, truth = simulate_two_groups(PRIOR_LEFT, N=10_000, seed=5)
iv = fcr_intervals(z, 0.05, side="left", truth=truth.mu)
print(f"selected R = {iv.R} cases with z <= {iv.threshold:.3f}")
print(f"common half-width {iv.half_width:.3f} (unadjusted 95% would be 1.960)")
print(f"intervals missing their mu: {iv.noncovered} ({iv.fcr_realized:.3%})")

# the Bayes view: each selected z has some chance of being null and, if not,
# a normal posterior for mu
for zz in (-2.77, -3.5, -4.5):
    b = bayes_intervals(PRIOR_LEFT, zz)
    print(f"z = {zz:5.2f}: Pr(null) = {b.fdr_at_z:.3f}, nonnull 95% interval [{b.lo:.2f}, {b.hi:.2f}]")

sel = iv.index[~truth.null[iv.index]]
bi = bayes_intervals(PRIOR_LEFT, z.values[sel])
inside = np.mean([(b.lo <= m <= b.hi) for b, m in zip(bi, truth.mu[sel])])
print(f"Bayes intervals cover {inside:.3f} of the truly nonnull selected mu")
