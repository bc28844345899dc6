"""
Misidentifying a transient signal
=================================

A process picks up a positive drift at an unknown time and keeps it for a
random or fixed period.  A two-sided CUSUM watches drawdowns and drawups of
the observed path; if the drawdown alarm rings first while the signal
lives, the direction of the change is named wrongly.
"""

import numpy as np

import ddlab

############################################################
# Exponentially distributed life
#
# With life rate ``lam`` the probability is the Laplace transform of the
# drawdown time on the drawdown-first event, evaluated at ``lam``.

for mu in (0.0, 0.25, 0.5, 1.0):
    row = [ddlab.misid_exponential(ddlab.SignalSpec(ddlab.bm(mu, 1.0), 1.0, 1.0, rate=lam), 0.0)
           for lam in (0.1, 0.5, 2.0)]
    print(f"mu = {mu:4.2f}: " + "  ".join(f"{v:.4f}" for v in row))

############################################################
# Fixed life, Brownian motion only

for T in (0.5, 1.0, 2.0, 5.0):
    print(f"T = {T:3.1f}: {ddlab.misid_deterministic(ddlab.BmParams(0.5, 1.0), 1.0, T):.5f}")

############################################################
# Averaging over the state at the change point
#
# For a mean-reverting signal the answer depends on where the change found
# the process.  A tabulated density of that state gives the aggregate.

y = np.linspace(-1.0, 1.0, 41)
f = np.exp(-0.5 * (y / 0.3) ** 2)
f /= np.trapezoid(f, y)
spec = ddlab.SignalSpec(ddlab.ou(1.0, 0.0, 1.0), 0.6, 0.8, rate=0.5,
                        start_density=ddlab.StartDensity(y, f))
print(f"aggregate: {ddlab.misid_aggregate(spec):.5f}")
print(f"from the centre: {ddlab.misid_exponential(spec, 0.0):.5f}")
