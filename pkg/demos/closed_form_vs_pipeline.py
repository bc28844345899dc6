"""
Closed forms against the general pipeline
=========================================

For a drifted Brownian motion the drawdown-before-drawup transform has a
closed form.  The general pipeline knows nothing about that: it solves the
generator ODE for the two-barrier hitting transform and integrates its
barrier derivatives.  Running both on the same model is the quickest way
to see how much the numerics cost in accuracy.
"""

import numpy as np

import ddlab

############################################################
# One model, three regimes of the thresholds

p = ddlab.BmParams(0.5, 1.0)
model = ddlab.bm(0.5, 1.0)

print(f"{'a':>5} {'b':>5} {'lam':>5} {'closed form':>14} {'pipeline':>14} {'rel err':>9}")
for a, b in [(1.0, 1.0), (1.5, 1.0), (1.0, 1.5)]:
    for lam in (0.1, 1.0):
        exact = float(ddlab.bm_laplace_ddu(p, a, b, lam))
        num = ddlab.laplace_ddu(model, 0.0, a, b, lam)
        print(f"{a:5.2f} {b:5.2f} {lam:5.2f} {exact:14.10f} {num:14.10f} {abs(num - exact) / exact:9.1e}")

############################################################
# The same machinery on a mean-reverting model
#
# Mean reversion towards the start point pulls the process back after a
# rise, so drawdowns come more easily than for a driftless motion.

ou = ddlab.ou(kappa=1.5, theta=0.0, sigma=1.0)
for a in (0.25, 0.5, 1.0):
    print(f"a = b = {a:4.2f}:  OU {ddlab.precede_probability(ou, 0.0, a, a):.5f}"
          f"   BM {ddlab.precede_probability(ddlab.bm(), 0.0, a, a):.5f}")

############################################################
# Densities by inversion
#
# The double series gives the density in time directly; the general
# route inverts the transform on a Talbot contour.

ts = np.array([0.25, 0.5, 1.0, 2.0])
series = [ddlab.density_dd_precedes(p, 1.2, 1.0, t).value for t in ts]
talbot = [ddlab.invert_general(model, 0.0, 1.2, 1.0, t) for t in ts]
for t, s, v in zip(ts, series, talbot):
    print(f"t = {t:4.2f}  series {s:.8f}  inverted pipeline {v:.8f}")
