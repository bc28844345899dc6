r"""Closed forms for drifted Brownian motion ``X_t = x + mu t + sigma W_t``.

Laplace transforms of the drawdown-before-drawup event, the drawdown time
transform, and the exact density series for the event (drawdown of ``a``
before drawup of ``b``) and for the joint law of the drawdown time with the
largest drawup seen before it.

Every transform accepts complex ``lam`` with positive real part so it can be
handed straight to :func:`ddlab.inversion.invert`.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np
from scipy.special import gammaln, log_ndtr

from .errors import SeriesDiverged, ValidationError


@dataclass(frozen=True)
class BmParams:
    """Drift ``mu`` and volatility ``sigma`` of a Brownian motion."""

    mu: float
    sigma: float

    def __post_init__(self):
        if not (np.isfinite(self.mu) and np.isfinite(self.sigma)):
            raise ValidationError("mu and sigma must be finite")
        if self.sigma <= 0:
            raise ValidationError("sigma must be positive")

    def reflected(self) -> "BmParams":
        return BmParams(-self.mu, self.sigma)


@dataclass(frozen=True)
class DensitySeriesConfig:
    """Truncation controls for the density series.

    Summation runs along anti-diagonals ``m + n = d`` for ``d <= 2 * max_order``
    and stops once three consecutive diagonals each add less than
    ``term_tol`` relative to the partial sum.
    """

    term_tol: float = 1e-12
    max_order: int = 60
    stabilization: bool = True

    def __post_init__(self):
        if not self.term_tol > 0:
            raise ValidationError("term_tol must be positive")
        if self.max_order < 8:
            raise ValidationError("max_order must be at least 8")


@dataclass(frozen=True)
class SeriesResult:
    value: float
    terms_used: tuple[int, int]
    converged: bool
    condition_estimate: float
    clamped: bool = False

    def __float__(self):
        return float(self.value)


# ---------------------------------------------------------------------------
# Laplace transforms
# ---------------------------------------------------------------------------

def _lam(lam):
    lam = np.asarray(lam)
    if np.iscomplexobj(lam):
        return lam.astype(complex)
    return lam.astype(float)


def s_lambda(p: BmParams, lam):
    """``sqrt(2 lam / sigma^2 + mu^2 / sigma^4)`` (principal branch for complex)."""
    lam = _lam(lam)
    if not np.iscomplexobj(lam) and np.any(lam < 0):
        raise ValidationError("lambda must be non-negative")
    val = np.sqrt(2.0 * lam / p.sigma**2 + p.mu**2 / p.sigma**4)
    return val[()] if val.ndim == 0 else val


def t_lambda(p: BmParams, lam, b):
    """Exponential rate ``-mu/sigma^2 - S coth(b S)`` of the drawdown-extension factor."""
    if b <= 0:
        raise ValidationError("b must be positive")
    s = s_lambda(p, lam)
    with np.errstate(divide="ignore", invalid="ignore"):
        coth = 1.0 / np.tanh(b * s)
        # S coth(bS) -> 1/b as S -> 0
        s_coth = np.where(s == 0, 1.0 / b, s * coth)
    return -p.mu / p.sigma**2 - s_coth


def _expm1_ratio_scaled(a, d, shift):
    """``(exp(a d) - 1) / d * exp(-shift)``; the limit ``a exp(-shift)`` at ``d = 0``."""
    ad = a * d
    small = np.abs(ad) < 0.5
    safe_d = np.where(d == 0, 1.0, d)
    near = np.where(d == 0, a, np.expm1(ad) / safe_d) * np.exp(-shift)
    far = (np.exp(np.where(small, 0.0, ad) - shift) - np.exp(-shift)) / safe_d
    return np.where(small, near, far)


def bm_laplace_equal(p: BmParams, a, lam):
    r"""``E_0[exp(-lam T_D(a)); T_D(a) < T_U(a)]`` for drifted BM.

    Evaluated in the rearranged form

    .. math::
        \frac{S}{2\sinh^2(aS)}\left[\frac{e^{a(S-m)}-1}{S-m}
        - \frac{e^{-a(S+m)}-1}{-(S+m)}\right], \qquad m=\mu/\sigma^2,

    which is algebraically identical to the usual ``coth``/``sinh`` expression
    (with ``mu/sigma^2`` in the bracket) but has no ``0/0`` at ``lam -> 0``.
    """
    if a <= 0:
        raise ValidationError("a must be positive")
    s = s_lambda(p, lam)
    m = p.mu / p.sigma**2
    big_a = a * s
    two_a = 2.0 * big_a
    e1 = _expm1_ratio_scaled(a, s - m, two_a)
    e2 = _expm1_ratio_scaled(a, -(s + m), two_a)
    denom = (-np.expm1(-two_a)) ** 2
    with np.errstate(divide="ignore", invalid="ignore"):
        val = 2.0 * s * (e1 - e2) / denom
    # S -> 0 only when mu = 0 and lam = 0: the exchangeable limit 1/2
    val = np.where(s == 0, 0.5, val)
    return val[()] if np.ndim(val) == 0 else val


def bm_laplace_dd_larger(p: BmParams, a, b, lam):
    """Transform for ``a > b``: ``L(lam; b) * exp(T(lam; b) (a - b))``."""
    if not a >= b > 0:
        raise ValidationError("need a >= b > 0")
    return bm_laplace_equal(p, b, lam) * np.exp(t_lambda(p, lam, b) * (a - b))


def bm_J0(p: BmParams, a, lam):
    """``E_0[exp(-lam T_D(a))]``, the drawdown-time transform."""
    if a <= 0:
        raise ValidationError("a must be positive")
    s = s_lambda(p, lam)
    m = p.mu / p.sigma**2
    e = np.exp(-2.0 * a * s)
    with np.errstate(divide="ignore", invalid="ignore"):
        val = 2.0 * s * np.exp(-m * a - a * s) / ((s - m) + (s + m) * e)
    # mu = 0, lam = 0: certain drawdown
    val = np.where(s == 0, 1.0, val)
    return val[()] if np.ndim(val) == 0 else val


def bm_laplace_du_larger(p: BmParams, a, b, lam):
    """Transform for ``b > a``, via the mirrored process."""
    if not b >= a > 0:
        raise ValidationError("need b >= a > 0")
    q = p.reflected()
    miss = bm_laplace_equal(q, a, lam) * np.exp(t_lambda(q, lam, a) * (b - a))
    return (1.0 - miss) * bm_J0(p, a, lam)


def bm_laplace_ddu(p: BmParams, a, b, lam):
    if a == b:
        return bm_laplace_equal(p, a, lam)
    if a > b:
        return bm_laplace_dd_larger(p, a, b, lam)
    return bm_laplace_du_larger(p, a, b, lam)


# ---------------------------------------------------------------------------
# Gaussian building blocks
# ---------------------------------------------------------------------------

def _pdf_table(kmax, x):
    """``phi^{(j)}(x)`` for ``j = 0..kmax``; result has shape ``(kmax+1,) + x.shape``."""
    x = np.asarray(x, dtype=float)
    out = np.empty((kmax + 1,) + x.shape)
    # He_j(x) phi(x) by the three-term recurrence, sign (-1)^j applied after
    out[0] = np.exp(-0.5 * x * x) / math.sqrt(2.0 * math.pi)
    if kmax >= 1:
        out[1] = x * out[0]
    for j in range(1, kmax):
        out[j + 1] = x * out[j] - j * out[j - 1]
    out[1::2] *= -1.0
    return out


def normal_pdf_deriv(k: int, x):
    """k-th derivative of the standard normal density, ``(-1)^k He_k(x) phi(x)``."""
    if not 0 <= k <= 200:
        raise ValidationError("derivative order must be in [0, 200]")
    val = _pdf_table(k, x)[k]
    return val[()] if val.ndim == 0 else val


def exp_times_ndtr(c, w):
    """``exp(c) * Phi(w)`` evaluated as ``exp(c + log Phi(w))``."""
    return np.exp(np.asarray(c, dtype=float) + log_ndtr(w))


def exp_times_ndtr_diff(c, w1, w2):
    """``exp(c) * (Phi(w1) - Phi(w2))`` without cancellation or overflow."""
    c, w1, w2 = np.broadcast_arrays(*(np.asarray(v, dtype=float) for v in (c, w1, w2)))
    lo = np.minimum(w1, w2)
    hi = np.maximum(w1, w2)
    sign = np.where(w1 >= w2, 1.0, -1.0)
    with np.errstate(divide="ignore", invalid="ignore", over="ignore"):
        # both in the upper tail: difference of survival functions
        lq_lo, lq_hi = log_ndtr(-lo), log_ndtr(-hi)
        upper = np.exp(c + lq_lo) * -np.expm1(lq_hi - lq_lo)
        # both in the lower tail
        lp_lo, lp_hi = log_ndtr(lo), log_ndtr(hi)
        lower = np.exp(c + lp_hi) * -np.expm1(lp_lo - lp_hi)
        mixed = np.exp(c) * (np.exp(lp_hi) - np.exp(lp_lo))
    val = np.where(lo >= 0, upper, np.where(hi <= 0, lower, mixed))
    val = np.where(lo == hi, 0.0, val)
    return sign * val


def g_block(p: BmParams, order, a, b, t):
    """``exp(mu (2 m b + a)/sigma^2) Phi((2 m b + a + mu t)/(sigma sqrt t))``."""
    mu, sig = p.mu, p.sigma
    order = np.asarray(order, dtype=float)
    return exp_times_ndtr(mu * (2 * order * b + a) / sig**2,
                          (2 * order * b + a + mu * t) / (sig * math.sqrt(t)))


def _gather(table, orders, weights):
    """``sum_k weights[k, i] * table[orders[k, i], i]`` with negative orders masked."""
    ok = orders >= 0
    idx = np.where(ok, orders, 0)
    vals = np.take_along_axis(table, idx, axis=0)
    return np.sum(np.where(ok, weights * vals, 0.0), axis=0)


def _log_abs_pow(base, m):
    """``m log|base|`` with the convention ``0^0 = 1``."""
    if base == 0:
        return np.where(m == 0, 0.0, -np.inf)
    return m * math.log(abs(base))


def _sum_diagonals(diagonal, cfg: DensitySeriesConfig) -> SeriesResult:
    terms_all = []
    partial = 0.0
    quiet = 0
    growth = 0
    prev = None
    biggest = 0.0
    d_used = 0
    converged = False
    for d in range(2 * cfg.max_order + 1):
        terms = diagonal(d)
        if not np.all(np.isfinite(terms)):
            raise SeriesDiverged(f"non-finite term on diagonal {d}")
        terms_all.append(terms)
        contrib = math.fsum(terms)
        biggest = max(biggest, float(np.max(np.abs(terms))))
        partial += contrib
        d_used = d
        size = abs(contrib)
        if prev is not None and size > prev and size > 0:
            growth += 1
            if growth >= 10 and d >= cfg.max_order:
                raise SeriesDiverged("series terms keep growing")
        else:
            growth = 0
        prev = size
        if size < cfg.term_tol * abs(partial) or (size == 0 and partial == 0):
            quiet += 1
            if quiet >= 3:
                converged = True
                break
        else:
            quiet = 0
    flat = np.concatenate(terms_all)
    value = math.fsum(flat) if cfg.stabilization else float(np.sum(flat))
    cond = biggest / abs(value) if value != 0 else (0.0 if biggest == 0 else math.inf)
    if cond > 1e12:
        converged = False
    clamped = False
    if value < 0:
        if value >= -10 * cfg.term_tol * max(1.0, biggest):
            value, clamped = 0.0, True
        else:
            raise SeriesDiverged(f"density series returned {value:.3g} < 0")
    return SeriesResult(value, (d_used, d_used), converged, cond, clamped)


def density_dd_precedes(p: BmParams, a, b, t, cfg: DensitySeriesConfig | None = None) -> SeriesResult:
    """Density of ``T_D(a)`` on ``{T_D(a) < T_U(b)}`` at time ``t``, for ``a >= b``.

    Double series in Gaussian-density derivatives plus paired
    ``exp * Phi`` blocks; pairs sharing an exponential are combined before
    evaluation, otherwise the individual blocks overflow for large orders.
    """
    cfg = cfg or DensitySeriesConfig()
    if not (a >= b > 0 and t > 0):
        raise ValidationError("need a >= b > 0 and t > 0")
    mu, sig = p.mu, p.sigma
    s2 = sig * sig
    st = sig * math.sqrt(t)
    c = mu * math.sqrt(t) / sig
    q = 2.0 * (a - b) / st
    r = 2.0 * mu * (a - b) / s2
    pre1 = (2.0 / t) * math.exp(-mu * mu * t / (2 * s2) - mu * (a - b) / s2)
    pre2 = 2.0 * mu * mu / s2 * math.exp(-mu * (a - b) / s2)
    eb = math.exp(-mu * b / s2)

    def diagonal(d):
        m = np.arange(d + 1)
        n = d - m
        log_c = gammaln(d + 2) - gammaln(m + 2) - gammaln(m + 1) - gammaln(n + 1)
        w1 = np.exp(log_c + _log_abs_pow(q, m))
        ks = np.arange(d + 2)[:, None]
        x1 = ((2 * m + 2 * n + 1) * b + a) / st
        x2 = (2 * (m + n + 1) * b + a) / st
        x3 = (2 * m * b + a) / st
        kmax = d + 1
        t1, t2, t3 = _pdf_table(kmax, x1), _pdf_table(kmax, x2), _pdf_table(kmax, x3)
        # F1: even powers only, k -> 2k
        k_half = np.arange((d + 1) // 2 + 1)[:, None]
        f1 = _gather(t1, m + 1 - 2 * k_half,
                     np.where(2 * k_half <= m + 1, c ** (2 * k_half), 0.0))
        sgn = (-1.0) ** ks
        f2w = np.where(ks <= m + 1, c ** ks * (1.0 + sgn * (m + n + 2) / (n + 1)), 0.0)
        f2 = _gather(t2, m + 1 - ks, f2w)
        f3w = np.where(ks <= m + 1, (-c) ** ks, 0.0)
        f3 = _gather(t3, m + 1 - ks, f3w)
        first = w1 * (2 * f1 - eb * f2 - np.where(n == 0, eb * f3, 0.0))
        if mu == 0.0:
            return pre1 * first
        big_n = m + n
        pair_a = exp_times_ndtr_diff(
            mu * ((2 * big_n + 1) * b + a) / s2,
            ((2 * big_n + 1) * b + a + mu * t) / st,
            ((2 * big_n + 2) * b + a + mu * t) / st,
        )
        pair_b = exp_times_ndtr_diff(
            -mu * ((2 * big_n + 1) * b + a) / s2,
            ((2 * big_n + 1) * b + a - mu * t) / st,
            (2 * big_n * b + a - mu * t) / st,
        )
        w2 = np.exp(log_c + _log_abs_pow(r, m)) * np.where((r < 0) & (m % 2 == 1), -1.0, 1.0)
        second = w2 * (pair_a + (-1.0) ** m * pair_b)
        return pre1 * first + pre2 * second

    return _sum_diagonals(diagonal, cfg)


def density_joint_sup_du(p: BmParams, a, z, t, cfg: DensitySeriesConfig | None = None) -> SeriesResult:
    """Joint density of ``T_D(a)`` and the largest drawup before it, at level ``a + z``.

    Equals ``d/dz p(t; a, a + z)``; integrates over ``z`` to the mass with
    ``T_U(a) < T_D(a)``.
    """
    cfg = cfg or DensitySeriesConfig()
    if not (a > 0 and z > 0 and t > 0):
        raise ValidationError("need a, z, t > 0")
    mu, sig = p.mu, p.sigma
    s2 = sig * sig
    st = sig * math.sqrt(t)
    c = mu * math.sqrt(t) / sig
    q = 2.0 * z / st
    r = 2.0 * mu * z / s2
    pre1 = -4.0 / (sig * t**1.5) * math.exp(-mu * mu * t / (2 * s2) + mu * (z - a) / s2)
    pre2 = -4.0 * mu**3 / sig**4 * math.exp(mu * (z - a) / s2)
    ea = math.exp(mu * a / s2)

    def diagonal(d):
        m = np.arange(d + 1)
        n = d - m
        log_c = gammaln(d + 3) - gammaln(m + 3) - gammaln(m + 1) - gammaln(n + 1)
        w1 = np.exp(log_c + _log_abs_pow(q, m))
        ks = np.arange(d + 3)[:, None]
        x1 = ((2 * m + 2 * n + 3) * a + z) / st
        x2 = ((2 * m + 2 * n + 4) * a + z) / st
        x3 = ((2 * m + 2) * a + z) / st
        kmax = d + 2
        t1, t2, t3 = _pdf_table(kmax, x1), _pdf_table(kmax, x2), _pdf_table(kmax, x3)
        k_half = np.arange((d + 2) // 2 + 1)[:, None]
        f1 = _gather(t1, m + 2 - 2 * k_half,
                     np.where(2 * k_half <= m + 2, c ** (2 * k_half), 0.0))
        sgn = (-1.0) ** ks
        f2w = np.where(ks <= m + 2, c ** ks * (sgn + (m + n + 3) / (n + 1)), 0.0)
        f2 = _gather(t2, m + 2 - ks, f2w)
        f3w = np.where(ks <= m + 2, c ** ks, 0.0)
        f3 = _gather(t3, m + 2 - ks, f3w)
        first = w1 * (2 * f1 - ea * f2 - np.where(n == 0, ea * f3, 0.0))
        if mu == 0.0:
            return pre1 * first
        big_n = m + n
        pair_a = exp_times_ndtr_diff(
            mu * ((2 * big_n + 3) * a + z) / s2,
            ((2 * big_n + 3) * a + z + mu * t) / st,
            ((2 * big_n + 2) * a + z + mu * t) / st,
        )
        pair_b = exp_times_ndtr_diff(
            -mu * ((2 * big_n + 3) * a + z) / s2,
            ((2 * big_n + 3) * a + z - mu * t) / st,
            ((2 * big_n + 4) * a + z - mu * t) / st,
        )
        w2 = np.exp(log_c + _log_abs_pow(r, m)) * np.where((r < 0) & (m % 2 == 1), -1.0, 1.0)
        second = w2 * (pair_a - (-1.0) ** m * pair_b)
        return pre1 * first + pre2 * second

    return _sum_diagonals(diagonal, cfg)


def density_ddu(p: BmParams, a, b, t, cfg: DensitySeriesConfig | None = None,
                z_tol: float = 1e-10) -> SeriesResult:
    """Density of ``T_D(a)`` on ``{T_D(a) < T_U(b)}`` for any ``a, b > 0``.

    For ``b > a`` the event splits by the largest drawup ``a + z`` seen before
    the drawdown: ``p(t; a, a)`` plus the joint density integrated over
    ``0 < z < b - a``.
    """
    from .quadrature import gauss_kronrod

    cfg = cfg or DensitySeriesConfig()
    if not (a > 0 and b > 0 and t > 0):
        raise ValidationError("need a, b, t > 0")
    if a >= b:
        return density_dd_precedes(p, a, b, t, cfg)
    base = density_dd_precedes(p, a, a, t, cfg)
    flags = []

    def joint(zs):
        res = [density_joint_sup_du(p, a, float(z), t, cfg) for z in zs]
        flags.extend(r.converged for r in res)
        return np.array([r.value for r in res])

    extra, _ = gauss_kronrod(joint, 0.0, b - a, abs_tol=z_tol, rel_tol=1e-10)
    return SeriesResult(base.value + float(extra), base.terms_used,
                        base.converged and all(flags), base.condition_estimate, base.clamped)
