"""
Pricing a digital drawdown option
=================================

The option pays one unit when the stock falls 20% from its running high
before it rises 20% from its running low.  Under the risk-neutral measure
``log S`` is a Brownian motion with drift ``r - sigma^2/2``, so relative
moves of the stock are absolute drawdowns and drawups of ``log S``.
"""

import ddlab

spec = ddlab.RelativeEventSpec(alpha=0.2, beta=0.2)
a, b = ddlab.relative_to_log(spec)
print(f"log-price thresholds: drawdown {a:.5f}, drawup {b:.5f}")

############################################################
# Perpetual price and its finite-maturity approximations

perp = ddlab.price_perpetual(spec, ddlab.PricingSpec(r=0.05, sigma=0.3, perpetual=True))
print(f"perpetual: {perp:.6f}")
for T in (0.25, 1.0, 5.0, 50.0):
    price = ddlab.price_finite(spec, ddlab.PricingSpec(r=0.05, sigma=0.3, maturity=T))
    print(f"T = {T:5.2f}: {price:.6f}")

############################################################
# A wider drawup threshold
#
# With ``(1 - alpha)(1 + beta) > 1`` the drawup is the larger move and the
# price picks up the joint density of the drawdown time and the largest
# drawup seen before it.

wide = ddlab.RelativeEventSpec(alpha=0.2, beta=0.5)
print(f"delta = {wide.delta:.2f}")
print(f"T = 1: {ddlab.price_finite(wide, ddlab.PricingSpec(0.05, 0.3, maturity=1.0)):.6f}")

############################################################
# Monte Carlo check of the perpetual price

ens = ddlab.simulate(ddlab.gbm_log(0.05, 0.3), 0.0, a, b, ddlab.SimConfig(paths=50_000, stop="first", horizon=300.0))
est, se = ddlab.estimate_laplace(ens, 0.05, extrapolate=True)
print(f"simulated {est:.5f} +/- {se:.5f}  vs  {perp:.5f}")
