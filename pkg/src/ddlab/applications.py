"""Relative drawdown options and transient-signal misidentification.

Prices are for a digital option paying 1 when the stock falls ``100 alpha``
percent from its running high before it rises ``100 beta`` percent from its
running low.  Under the risk-neutral measure ``log S`` is a Brownian motion
with drift ``r - sigma^2/2``, so a relative event of the stock is an
absolute drawdown/drawup event of ``log S``.

The misidentification probabilities concern a process whose drift switches
on at an unknown time; the drawdown alarm firing before the drawup alarm,
while the signal lives, names the wrong direction.
"""

from __future__ import annotations

import csv
import math
from dataclasses import dataclass
from pathlib import Path

import numpy as np

from . import brownian as bmf
from .brownian import BmParams, DensitySeriesConfig
from .drawdown import DEFAULT_NUMERICS, NumericsConfig, laplace_ddu
from .errors import DensityNotNormalized, NotSupported, SeriesDiverged, ValidationError
from .inversion import invert
from .models import DiffusionModel
from .quadrature import gauss_kronrod


@dataclass(frozen=True)
class RelativeEventSpec:
    alpha: float
    beta: float

    def __post_init__(self):
        if not 0 < self.alpha < 1:
            raise ValidationError("alpha must lie in (0, 1)")
        if not self.beta > 0:
            raise ValidationError("beta must be positive")

    @property
    def delta(self) -> float:
        return (1 - self.alpha) * (1 + self.beta)


@dataclass(frozen=True)
class PricingSpec:
    r: float
    sigma: float
    maturity: float | None = None
    perpetual: bool = False

    def __post_init__(self):
        if self.r < 0 or not self.sigma > 0:
            raise ValidationError("need r >= 0 and sigma > 0")
        if (self.maturity is None) == (not self.perpetual):
            raise ValidationError("set exactly one of maturity and perpetual")
        if self.maturity is not None and not self.maturity > 0:
            raise ValidationError("maturity must be positive")

    @property
    def log_params(self) -> BmParams:
        """Risk-neutral ``log S``: drift ``r - sigma^2/2``."""
        return BmParams(self.r - 0.5 * self.sigma**2, self.sigma)


@dataclass(frozen=True)
class StartDensity:
    """Tabulated density of the state at the change point."""

    y: np.ndarray
    f: np.ndarray

    def __post_init__(self):
        y = np.asarray(self.y, dtype=float)
        f = np.asarray(self.f, dtype=float)
        if y.ndim != 1 or y.shape != f.shape or y.size < 2:
            raise ValidationError("start density needs matching y and f columns with two or more rows")
        if not np.all(np.diff(y) > 0):
            raise ValidationError("start density y values must be strictly increasing")
        if not (np.all(np.isfinite(f)) and np.all(f >= 0)):
            raise DensityNotNormalized("start density must be finite and non-negative")
        mass = float(np.trapezoid(f, y))
        if abs(mass - 1.0) > 1e-6:
            raise DensityNotNormalized(f"start density integrates to {mass:.8g}, not 1")
        object.__setattr__(self, "y", y)
        object.__setattr__(self, "f", f)


def read_start_density(path) -> StartDensity:
    """Load a start density from a CSV with header ``y,f``."""
    with Path(path).open(newline="") as fh:
        reader = csv.reader(fh)
        if [h.strip() for h in next(reader, [])] != ["y", "f"]:
            raise ValidationError("start density CSV header must be exactly y,f")
        try:
            rows = [[float(c) for c in line] for line in reader if line and any(c.strip() for c in line)]
        except ValueError as exc:
            raise ValidationError("non-numeric start density row") from exc
    if any(len(r) != 2 for r in rows):
        raise ValidationError("start density rows must have two columns")
    arr = np.array(rows, dtype=float).reshape(-1, 2)
    return StartDensity(arr[:, 0], arr[:, 1])


@dataclass(frozen=True)
class SignalSpec:
    """Post-change dynamics, alarm thresholds and signal life.

    Give ``rate`` for an exponentially distributed life or ``life`` for a
    fixed one.
    """

    model: DiffusionModel
    a: float
    b: float
    rate: float | None = None
    life: float | None = None
    start_density: StartDensity | None = None

    def __post_init__(self):
        if not (self.a > 0 and self.b > 0):
            raise ValidationError("thresholds must be positive")
        if (self.rate is None) == (self.life is None):
            raise ValidationError("set exactly one of rate and life")
        if self.rate is not None and not self.rate > 0:
            raise ValidationError("rate must be positive")
        if self.life is not None and not self.life > 0:
            raise ValidationError("life must be positive")


def relative_to_log(spec: RelativeEventSpec) -> tuple[float, float]:
    """Log-price drawdown and drawup sizes of a relative event."""
    return -math.log1p(-spec.alpha), math.log1p(spec.beta)


# ---------------------------------------------------------------------------
# densities with inversion fallback
# ---------------------------------------------------------------------------

def density_value(p: BmParams, a, b, t, cfg: DensitySeriesConfig | None = None):
    """``(value, method)`` for the event density at ``t``.

    The series is used when it reports convergence; otherwise the closed-form
    transform is inverted numerically.
    """
    try:
        res = bmf.density_ddu(p, a, b, t, cfg)
        if res.converged:
            return res.value, "series"
    except SeriesDiverged:
        pass
    val = invert(lambda s: bmf.bm_laplace_ddu(p, a, b, s), t)
    return max(val, 0.0), "talbot"


def discounted_mass(p: BmParams, a, b, T, r=0.0, cfg: DensitySeriesConfig | None = None,
                    tol: float = 1e-10) -> float:
    """``int_0^T exp(-r t) p(t; a, b) dt`` by adaptive quadrature of the density."""
    if not T > 0:
        return 0.0

    def f(ts):
        return np.array([math.exp(-r * t) * density_value(p, a, b, t, cfg)[0] if t > 0 else 0.0
                         for t in ts])

    val, _ = gauss_kronrod(f, 0.0, T, abs_tol=tol, rel_tol=1e-9, max_subdiv=400,
                           initial_panels=max(4, min(64, int(math.ceil(T)))))
    return max(float(val), 0.0)


def _joint_discounted(p: BmParams, a, zmax, T, r, cfg, tol=1e-10):
    def inner(t):
        def g(zs):
            return np.array([bmf.density_joint_sup_du(p, a, float(z), t, cfg).value for z in zs])
        return gauss_kronrod(g, 0.0, zmax, abs_tol=tol, rel_tol=1e-10)[0]

    def outer(ts):
        out = []
        for t in ts:
            if t <= 0:
                out.append(0.0)
                continue
            try:
                probe = bmf.density_dd_precedes(p, a, a, t, cfg)
                ok = probe.converged
            except SeriesDiverged:
                ok = False
            if ok:
                out.append(math.exp(-r * t) * inner(t))
            else:
                # difference of the two event densities by inversion
                full = invert(lambda s: bmf.bm_laplace_ddu(p, a, a + zmax, s), t)
                eq = invert(lambda s: bmf.bm_laplace_equal(p, a, s), t)
                out.append(math.exp(-r * t) * (full - eq))
        return np.array(out)

    val, _ = gauss_kronrod(outer, 0.0, T, abs_tol=tol, rel_tol=1e-9, max_subdiv=400,
                           initial_panels=max(4, min(64, int(math.ceil(T)))))
    return float(val)


# ---------------------------------------------------------------------------
# pricing
# ---------------------------------------------------------------------------

def price_perpetual(spec: RelativeEventSpec, p: PricingSpec) -> float:
    """Risk-neutral price of the perpetual digital option."""
    if not p.r > 0:
        raise ValidationError("the perpetual price needs r > 0")
    a, b = relative_to_log(spec)
    return float(bmf.bm_laplace_ddu(p.log_params, a, b, p.r))


def price_finite(spec: RelativeEventSpec, p: PricingSpec, cfg: DensitySeriesConfig | None = None) -> float:
    """Risk-neutral price of the digital option maturing at ``p.maturity``."""
    if p.maturity is None:
        raise ValidationError("price_finite needs a maturity")
    a, b = relative_to_log(spec)
    q = p.log_params
    T = p.maturity
    if spec.delta <= 1:
        return discounted_mass(q, a, b, T, p.r, cfg)
    # alpha/(1 - alpha) is the rise that matches the fall: the a = b price
    base = discounted_mass(q, a, a, T, p.r, cfg)
    return base + _joint_discounted(q, a, math.log(spec.delta), T, p.r, cfg)


# ---------------------------------------------------------------------------
# misidentification
# ---------------------------------------------------------------------------

def _bm_params(model: DiffusionModel) -> BmParams | None:
    if model.kind == "bm" and model.sign == 1.0:
        return BmParams(model.params["mu"], model.params["sigma"])
    return None


def _misid_at(spec: SignalSpec, y, cfg):
    bp = _bm_params(spec.model)
    if bp is not None:
        return float(bmf.bm_laplace_ddu(bp, spec.a, spec.b, spec.rate))
    return float(laplace_ddu(spec.model, y, spec.a, spec.b, spec.rate, cfg))


def misid_exponential(spec: SignalSpec, x, cfg: NumericsConfig = DEFAULT_NUMERICS) -> float:
    """Probability the drawdown alarm fires first and before an exponential signal life ends."""
    if spec.rate is None:
        raise ValidationError("misid_exponential needs an exponential life rate")
    return _misid_at(spec, x, cfg)


def misid_aggregate(spec: SignalSpec, x=None, cfg: NumericsConfig = DEFAULT_NUMERICS) -> float:
    """Misidentification probability averaged over the tabulated start density.

    ``x`` is carried for reference only: the table already is the law of the
    state at the change point given the initial state.
    """
    if spec.rate is None:
        raise ValidationError("misid_aggregate needs an exponential life rate")
    dens = spec.start_density
    if dens is None:
        raise ValidationError("misid_aggregate needs a start density")
    vals = np.zeros_like(dens.y)
    live = dens.f > 0
    vals[live] = [_misid_at(spec, float(y), cfg) for y in dens.y[live]]
    return float(np.trapezoid(vals * dens.f, dens.y))


def misid_deterministic(p, a, T, cfg: DensitySeriesConfig | None = None) -> float:
    """Misidentification probability for a signal of fixed life ``T``.

    Only Brownian motion is supported (``p`` may be :class:`BmParams` or a
    ``bm`` model); other dynamics raise :class:`NotSupported`.
    """
    if isinstance(p, DiffusionModel):
        bp = _bm_params(p)
        if bp is None:
            raise NotSupported(
                f"fixed-life misidentification is available for bm only, not {p.kind}; "
                "estimate it with `ddlab simulate --kill-rate` or a finite --horizon")
        p = bp
    if not a > 0:
        raise ValidationError("a must be positive")
    if not T > 0:
        raise ValidationError("T must be positive")
    return discounted_mass(p, a, a, T, 0.0, cfg)
