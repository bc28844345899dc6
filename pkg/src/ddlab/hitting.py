r"""Two-barrier hitting-time transform of a one-dimensional diffusion.

For ``y <= x <= z`` the quantity

.. math:: \ell(y, z; x, \lambda) = E_x[e^{-\lambda\tau_y};\ \tau_y < \tau_z]

solves ``sigma^2/2 f'' + mu f' = lam f`` on ``[y, z]`` with ``f(y) = 1``,
``f(z) = 0``.  We shoot the solution that vanishes at ``z`` (``w(z) = 0``,
``w'(z) = -1``) towards ``y`` with classical RK4 and take ``w(x)/w(y)``.
Integrating away from the zero keeps the wanted solution dominant, so no
cancellation occurs even when ``lam (z - y)^2`` is large.

The same shooting state gives the barrier and start-point derivatives the
drawdown formulas need, in closed form rather than by differencing:

* ``d ell/dx`` at ``x = y``      is ``w'(y)/w(y)``
* ``d ell/dx`` at ``x = z``      is ``-1/w(y)``
* ``d ell/dz``                   is ``U(x) / w(y)``, ``U`` the upward transform.

All kernels are vectorised over barrier/start arrays and accept complex
``lam``.  Each is evaluated at ``steps`` and ``2*steps`` RK4 steps and
Richardson-combined.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numba
import numpy as np

from .errors import NonFiniteCoefficient, QuadratureFailed, SolveDiverged, ValidationError
from .models import DiffusionModel
from .quadrature import ChebyshevAntiderivative, gauss_kronrod

DEFAULT_STEPS = 2048
_RENORM = 1e100
_CHUNK = 256


@dataclass(frozen=True)
class HittingQuery:
    y: float
    z: float
    x: float
    lam: complex | float = 0.0

    def __post_init__(self):
        if not (self.y <= self.x <= self.z):
            raise ValidationError("need y <= x <= z")
        if not self.y < self.z:
            raise ValidationError("need y < z")
        lam = complex(self.lam)
        if lam.real < 0 or (lam.imag == 0 and lam.real < 0):
            raise ValidationError("lambda must have non-negative real part")


@numba.njit(cache=True)
def _rk4_kernel(f0, g0, lam, h, mu, k, stride):
    rows = f0.shape[0]
    steps = (mu.shape[1] - 1) // (2 * stride)
    f_out = np.empty_like(f0)
    g_out = np.empty_like(g0)
    log_out = np.zeros(rows)
    for r in range(rows):
        f = f0[r]
        g = g0[r]
        hh = h[r]
        half = 0.5 * hh
        ls = 0.0
        for i in range(steps):
            j0 = 2 * i * stride
            j1 = j0 + stride
            j2 = j1 + stride
            k1f = g
            k1g = k[r, j0] * (lam * f - mu[r, j0] * g)
            f2 = f + half * k1f
            g2 = g + half * k1g
            k2f = g2
            k2g = k[r, j1] * (lam * f2 - mu[r, j1] * g2)
            f3 = f + half * k2f
            g3 = g + half * k2g
            k3f = g3
            k3g = k[r, j1] * (lam * f3 - mu[r, j1] * g3)
            f4 = f + hh * k3f
            g4 = g + hh * k3g
            k4f = g4
            k4g = k[r, j2] * (lam * f4 - mu[r, j2] * g4)
            f = f + hh / 6.0 * (k1f + 2.0 * k2f + 2.0 * k3f + k4f)
            g = g + hh / 6.0 * (k1g + 2.0 * k2g + 2.0 * k3g + k4g)
            big = max(abs(f), abs(g))
            if big > _RENORM:
                f = f / big
                g = g / big
                ls += math.log(big)
        f_out[r] = f
        g_out[r] = g
        log_out[r] = ls
    return f_out, g_out, log_out


def _dtype(lam):
    return complex if np.iscomplexobj(lam) or isinstance(lam, complex) else float


def _propagate(model, start, end, f0, g0, lam, steps=DEFAULT_STEPS):
    """Integrate the generator ODE from ``start`` to ``end`` for each row.

    Returns ``((f, g, logscale)_steps, (f, g, logscale)_2steps)``.
    """
    start = np.atleast_1d(np.asarray(start, dtype=float))
    end = np.atleast_1d(np.asarray(end, dtype=float))
    start, end = np.broadcast_arrays(start, end)
    dt = _dtype(lam)
    lam = dt(lam)
    f0 = np.broadcast_to(np.asarray(f0, dtype=dt), start.shape).copy()
    g0 = np.broadcast_to(np.asarray(g0, dtype=dt), start.shape).copy()
    frac = np.linspace(0.0, 1.0, 4 * steps + 1)
    coarse = [np.empty(start.shape, dt), np.empty(start.shape, dt), np.empty(start.shape)]
    fine = [np.empty(start.shape, dt), np.empty(start.shape, dt), np.empty(start.shape)]
    for lo in range(0, start.size, _CHUNK):
        sl = slice(lo, lo + _CHUNK)
        s, e = start[sl], end[sl]
        u = s[:, None] + (e - s)[:, None] * frac
        mu, sig = model.coefficients(u)
        if not (np.all(np.isfinite(mu)) and np.all(np.isfinite(sig)) and np.all(sig > 0)):
            raise NonFiniteCoefficient(
                f"coefficients not finite/positive on [{s.min():g}, {e.max():g}] for {model!r}")
        kk = 2.0 / (sig * sig)
        mu = np.ascontiguousarray(mu)
        kk = np.ascontiguousarray(kk)
        for out, stride, n in ((coarse, 2, steps), (fine, 1, 2 * steps)):
            h = (e - s) / n
            f, g, ls = _rk4_kernel(f0[sl], g0[sl], lam, h, mu, kk, stride)
            out[0][sl], out[1][sl], out[2][sl] = f, g, ls
    return tuple(coarse), tuple(fine)


def _richardson(coarse, fine, what):
    coarse = np.asarray(coarse)
    fine = np.asarray(fine)
    if not (np.all(np.isfinite(coarse)) and np.all(np.isfinite(fine))):
        raise SolveDiverged(f"non-finite {what}")
    gap = np.abs(fine - coarse)
    if np.any(gap > 1e-6 * np.maximum(1.0, np.abs(fine))):
        raise SolveDiverged(f"{what}: step refinement changed the result by {gap.max():.3g}")
    return fine + (fine - coarse) / 15.0


def _ratio(num, den):
    """``w_num / w_den`` from (f, g, logscale) tuples."""
    return num[0] / den[0] * np.exp(num[2] - den[2])


def ell(model, y, z, x, lam, steps=DEFAULT_STEPS):
    """Vectorised ``ell(y, z; x, lam)`` for ``lam`` with positive real part."""
    y, z, x = np.broadcast_arrays(*(np.asarray(v, dtype=float) for v in (y, z, x)))
    shape = y.shape
    y, z, x = y.ravel(), z.ravel(), x.ravel()
    starts = np.concatenate([z, z])
    ends = np.concatenate([x, y])
    res = _propagate(model, starts, ends, 0.0, -1.0, lam, steps)
    n = y.size
    vals = []
    for f, g, ls in res:
        vals.append(_ratio((f[:n], None, ls[:n]), (f[n:], None, ls[n:])))
    out = _richardson(vals[0], vals[1], "hitting transform")
    out = np.where(x == y, 1.0, np.where(x == z, 0.0, out))
    return out.reshape(shape)


def ell_dz(model, y, z, x, lam, steps=DEFAULT_STEPS):
    """``d/dz ell(y, z; x, lam)`` (upper-barrier derivative)."""
    y, z, x = np.broadcast_arrays(*(np.asarray(v, dtype=float) for v in (y, z, x)))
    shape = y.shape
    y, z, x = y.ravel(), z.ravel(), x.ravel()
    n = y.size
    starts = np.concatenate([y, y, z])
    ends = np.concatenate([x, z, y])
    f0 = np.concatenate([np.zeros(2 * n), np.zeros(n)])
    g0 = np.concatenate([np.ones(2 * n), -np.ones(n)])
    res = _propagate(model, starts, ends, f0, g0, lam, steps)
    vals = []
    for f, g, ls in res:
        up = _ratio((f[:n], None, ls[:n]), (f[n:2 * n], None, ls[n:2 * n]))
        vals.append(up / f[2 * n:] * np.exp(-ls[2 * n:]))
    out = _richardson(vals[0], vals[1], "barrier derivative")
    out = np.where(x == y, 0.0, out)
    return out.reshape(shape)


def up_ell(model, y, z, x, lam, steps=DEFAULT_STEPS):
    """Vectorised ``E_x[exp(-lam tau_z); tau_z < tau_y]`` (hit the upper barrier first)."""
    y, z, x = np.broadcast_arrays(*(np.asarray(v, dtype=float) for v in (y, z, x)))
    shape = y.shape
    y, z, x = y.ravel(), z.ravel(), x.ravel()
    res = _propagate(model, np.concatenate([y, y]), np.concatenate([x, z]), 0.0, 1.0, lam, steps)
    n = y.size
    vals = [_ratio((f[:n], None, ls[:n]), (f[n:], None, ls[n:])) for f, _, ls in res]
    out = _richardson(vals[0], vals[1], "hitting transform")
    out = np.where(x == z, 1.0, np.where(x == y, 0.0, out))
    return out.reshape(shape)


def _down_state(model, y, z, lam, steps):
    y, z = np.broadcast_arrays(np.asarray(y, dtype=float), np.asarray(z, dtype=float))
    return y.shape, _propagate(model, z.ravel(), y.ravel(), 0.0, -1.0, lam, steps)


def ell_dx_at_lower(model, y, z, lam, steps=DEFAULT_STEPS):
    """``d/dx ell(y, z; x, lam)`` at ``x = y`` (non-positive)."""
    shape, res = _down_state(model, y, z, lam, steps)
    vals = [g / f for f, g, _ in res]
    return _richardson(vals[0], vals[1], "start derivative").reshape(shape)


def ell_dx_at_upper(model, y, z, lam, steps=DEFAULT_STEPS):
    """``d/dx ell(y, z; x, lam)`` at ``x = z`` (non-positive)."""
    shape, res = _down_state(model, y, z, lam, steps)
    vals = [-np.exp(-ls) / f for f, _, ls in res]
    return _richardson(vals[0], vals[1], "start derivative").reshape(shape)


def up_dx_at_upper(model, y, z, lam, steps=DEFAULT_STEPS):
    """``d/dx E_x[exp(-lam tau_z); tau_z < tau_y]`` at ``x = z`` (non-negative)."""
    y, z = np.broadcast_arrays(np.asarray(y, dtype=float), np.asarray(z, dtype=float))
    res = _propagate(model, y.ravel(), z.ravel(), 0.0, 1.0, lam, steps)
    vals = [g / f for f, g, _ in res]
    return _richardson(vals[0], vals[1], "start derivative").reshape(y.shape)


# ---------------------------------------------------------------------------
# public operations
# ---------------------------------------------------------------------------

def _check_window(model: DiffusionModel, q: HittingQuery):
    if not model.interval.closure_contains([q.y, q.z]):
        raise ValidationError("barriers must lie in the closure of the model interval")


def scale_function(model: DiffusionModel, x0: float, x, tol: float = 1e-12):
    r"""Scale function ``s(x) = int_{x0}^x exp(-int_{x0}^v 2 mu/sigma^2) dv``.

    The inner integral is a Chebyshev antiderivative, the outer an adaptive
    Gauss-Kronrod rule.
    """
    xs = np.atleast_1d(np.asarray(x, dtype=float))
    if not model.interval.closure_contains(np.append(xs, x0)):
        raise ValidationError("scale function arguments must lie in the model interval")
    lo, hi = min(x0, xs.min()), max(x0, xs.max())
    out = np.zeros(xs.shape)
    if hi == lo:
        return out[0] if np.ndim(x) == 0 else out

    def density(v):
        mu, sig = model.coefficients(v)
        val = 2.0 * mu / (sig * sig)
        if not np.all(np.isfinite(val)):
            raise NonFiniteCoefficient("scale density not finite")
        return val

    inner = ChebyshevAntiderivative(density, lo, hi, tol=tol * 1e-1)
    base = inner(np.array([x0]))[0]

    def integrand(v):
        return np.exp(-(inner(v) - base))

    for i, xi in enumerate(xs):
        out[i], _ = gauss_kronrod(integrand, x0, xi, abs_tol=tol, rel_tol=tol, max_subdiv=200)
    return out[0] if np.ndim(x) == 0 else out


def _ruin(model, y, z, x):
    """``(s(z) - s(x)) / (s(z) - s(y))`` with the numerator integrated directly."""
    if x == y:
        return 1.0
    if x == z:
        return 0.0

    def density(v):
        mu, sig = model.coefficients(v)
        return 2.0 * mu / (sig * sig)

    inner = ChebyshevAntiderivative(density, y, z, tol=1e-13)

    def integrand(v):
        return np.exp(-inner(v))

    try:
        top, _ = gauss_kronrod(integrand, x, z, abs_tol=1e-14, rel_tol=1e-13)
        full, _ = gauss_kronrod(integrand, y, z, abs_tol=1e-14, rel_tol=1e-13)
    except QuadratureFailed:
        raise
    return float(top / full)


def hitting_laplace(model: DiffusionModel, q: HittingQuery, steps: int = DEFAULT_STEPS):
    """``E_x[exp(-lam tau_y); tau_y < tau_z]`` for a general diffusion.

    ``lam = 0`` goes through the scale function (two-barrier ruin
    probability); otherwise the generator ODE is shot from the upper barrier.
    """
    _check_window(model, q)
    if q.x == q.y:
        return 1.0
    if q.x == q.z:
        return 0.0
    if q.lam == 0:
        return _ruin(model, q.y, q.z, q.x)
    val = ell(model, q.y, q.z, q.x, q.lam, steps)[()]
    return complex(val) if np.iscomplexobj(val) else float(val)


def hitting_laplace_bm(mu: float, sigma: float, q: HittingQuery):
    """Closed form of :func:`hitting_laplace` for a drifted Brownian motion."""
    if not sigma > 0:
        raise ValidationError("sigma must be positive")
    y, z, x, lam = q.y, q.z, q.x, q.lam
    if x == y:
        return 1.0
    if x == z:
        return 0.0
    s = np.sqrt(2.0 * lam / sigma**2 + mu**2 / sigma**4)
    drift = math.exp(mu * (y - x) / sigma**2)
    if s == 0:
        return (z - x) / (z - y)
    # sinh((z-x)S)/sinh((z-y)S) written with decaying exponentials
    val = np.exp(-(x - y) * s) * np.expm1(-2 * (z - x) * s) / np.expm1(-2 * (z - y) * s) * drift
    return complex(val) if np.iscomplexobj(val) else float(val)
