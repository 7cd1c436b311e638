"""
Sizing regions of increased probability of presence
===================================================

A RIPP is an axis-aligned box around an agent's mean position that holds
all but ``gamma`` of its probability mass, whatever the distribution, as
long as the covariance is known.  Here we size a few boxes and check them
against samples from three very different distributions.
"""

import numpy as np

from ccmpc.ripp import CovMatrix2, size_region, whittle_bound

###############################################################################
# A correlated position covariance (feet squared) and a 5% miss budget.
C = CovMatrix2(9.0, 4.0, 3.0)
region = size_region(C, 0.05)
print(f"half-widths: x {region.alpha_x:.2f} ft, y {region.alpha_y:.2f} ft")
print(f"bound at those half-widths: {whittle_bound(C, region.alpha_x, region.alpha_y):.4f}")

###############################################################################
# The aspect ratio follows the standard deviations; shrinking gamma widens
# the box like 1 / sqrt(gamma).
for gamma in (0.2, 0.05, 0.01, 0.005):
    r = size_region(C, gamma)
    print(f"gamma={gamma:<6} alpha_x={r.alpha_x:7.2f}  alpha_y={r.alpha_y:7.2f}")

###############################################################################
# Empirical miss rates for matched-covariance samples.  The bound has to
# cover every distribution with this covariance, so for these ones it is
# far from tight.
rng = np.random.default_rng(0)
L = np.linalg.cholesky(C.as_array())
S = 200_000
draws = {
    "gaussian": rng.standard_normal((S, 2)),
    "uniform": rng.uniform(-np.sqrt(3), np.sqrt(3), size=(S, 2)),
    "two-point": rng.choice([-1.0, 1.0], size=(S, 2)),
}
for name, z in draws.items():
    x = z @ L.T
    miss = np.mean((np.abs(x[:, 0]) > region.alpha_x) | (np.abs(x[:, 1]) > region.alpha_y))
    print(f"{name:>9}: miss rate {miss:.4f} (budget 0.05)")
