r"""Drawdown-before-drawup Laplace transforms for general diffusions.

``L_x(lam; a, b) = E_x[exp(-lam T_D(a)); T_D(a) < T_U(b)]`` is assembled from
the hitting transform ``ell`` of :mod:`ddlab.hitting`:

* ``a = b``: integrate the barrier derivative of ``ell(u, u + a; x)`` over the
  level ``u`` at which the drawdown completes;
* ``a > b``: the same with ``b`` in place of ``a``, times the factor ``H``
  for the further fall of ``a - b`` without a drawup of ``b``;
* ``b > a``: the unconstrained drawdown transform ``J`` minus the paths on
  which a drawup of ``b`` comes first, computed on the mirrored process.

Outer integrals use adaptive Gauss-Kronrod.  Running integrals needed at
every outer node (the exponent of ``H`` and of ``J``) are built once per call
as Chebyshev antiderivatives and reused.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from . import hitting
from .errors import NegativeIntegrand, TruncationNotConverged, ValidationError
from .models import DiffusionModel, reflect
from .quadrature import ChebyshevAntiderivative, gauss_kronrod

_EPS_CBRT = np.finfo(float).eps ** (1.0 / 3.0)
_TAIL = 1e-14
_MAX_CHUNKS = 80


@dataclass(frozen=True)
class NumericsConfig:
    """Numerical controls for the general-diffusion pipeline.

    ``derivatives`` selects how derivatives of ``ell`` are taken: ``"exact"``
    reads them off the shooting state, ``"fd"`` uses central differences
    with step ``diff_step_scale * max(1, |p|) * eps**(1/3)`` and one
    Richardson level.
    """

    quad_tol: float = 1e-9
    diff_step_scale: float = 1.0
    max_subdiv: int = 200
    derivatives: str = "exact"
    ode_steps: int = hitting.DEFAULT_STEPS
    cheb_tol: float = 1e-12

    def __post_init__(self):
        if not (self.quad_tol > 0 and self.diff_step_scale > 0 and self.cheb_tol > 0):
            raise ValidationError("tolerances and step scale must be positive")
        if self.max_subdiv < 8:
            raise ValidationError("max_subdiv must be at least 8")
        if self.derivatives not in ("exact", "fd"):
            raise ValidationError("derivatives must be 'exact' or 'fd'")
        if self.ode_steps < 16:
            raise ValidationError("ode_steps must be at least 16")


DEFAULT_NUMERICS = NumericsConfig()


# ---------------------------------------------------------------------------
# derivative kernels
# ---------------------------------------------------------------------------

def _fd(fun, p, cfg):
    """Central difference of ``fun`` at ``p`` with one Richardson level."""
    h = cfg.diff_step_scale * np.maximum(1.0, np.abs(p)) * _EPS_CBRT
    d1 = (fun(p + h) - fun(p - h)) / (2 * h)
    d2 = (fun(p + h / 2) - fun(p - h / 2)) / h
    return (4 * d2 - d1) / 3


def barrier_derivative(model, y, z, x, lam, cfg=DEFAULT_NUMERICS):
    """``d/dz ell(y, z; x, lam)``: density in the completion level."""
    if cfg.derivatives == "exact":
        return hitting.ell_dz(model, y, z, x, lam, cfg.ode_steps)
    return _fd(lambda zz: hitting.ell(model, y, zz, x, lam, cfg.ode_steps), np.asarray(z, float), cfg)


def lower_slope(model, v, width, lam, cfg=DEFAULT_NUMERICS):
    """``d/dw ell(v, v + width; w, lam)`` at ``w = v`` (non-positive)."""
    v = np.asarray(v, dtype=float)
    if cfg.derivatives == "exact":
        return hitting.ell_dx_at_lower(model, v, v + width, lam, cfg.ode_steps)
    return _fd(lambda w: hitting.ell(model, v, v + width, w, lam, cfg.ode_steps), v, cfg)


def drawdown_rate(model, u, width, lam, cfg=DEFAULT_NUMERICS):
    """``-d/dw ell(u - width, u; w, lam)`` at ``w = u``: drawdown intensity at a running max ``u``."""
    u = np.asarray(u, dtype=float)
    if cfg.derivatives == "exact":
        return -hitting.ell_dx_at_upper(model, u - width, u, lam, cfg.ode_steps)
    return -_fd(lambda w: hitting.ell(model, u - width, u, w, lam, cfg.ode_steps), u, cfg)


def upward_rate(model, v, width, lam, cfg=DEFAULT_NUMERICS):
    """``d/dw E_w[exp(-lam tau_v); tau_v < tau_{v - width}]`` at ``w = v``.

    Discounted killing rate of a running maximum at level ``v`` (drawdown of
    ``width`` or discounting, per unit of new maximum).
    """
    v = np.asarray(v, dtype=float)
    if cfg.derivatives == "exact":
        return hitting.up_dx_at_upper(model, v - width, v, lam, cfg.ode_steps)
    return _fd(lambda w: hitting.up_ell(model, v - width, v, w, lam, cfg.ode_steps), v, cfg)


# ---------------------------------------------------------------------------
# validation helpers
# ---------------------------------------------------------------------------

def _check_lambda(lam):
    # complex values anywhere off the non-positive real axis are allowed so
    # that inversion contours can be used
    lam_c = complex(lam)
    if lam_c.imag == 0 and not lam_c.real > 0:
        raise ValidationError("lambda must be positive")


def _check_levels(model: DiffusionModel, x, *levels):
    iv = model.interval
    if not iv.contains(x):
        raise ValidationError(f"start point {x} outside {iv}")
    for lev in levels:
        if not iv.closure_contains(lev):
            raise ValidationError(f"level {lev} outside the closure of {iv}")


def _integrate(f, lo, hi, cfg, lam):
    real = not np.iscomplexobj(np.asarray(lam))

    def guarded(u):
        vals = f(u)
        if real and np.min(vals) < -cfg.quad_tol:
            raise NegativeIntegrand(f"integrand {np.min(vals):.3g} below -quad_tol")
        return vals

    val, _ = gauss_kronrod(guarded, lo, hi, abs_tol=cfg.quad_tol, rel_tol=1e-10,
                           max_subdiv=cfg.max_subdiv)
    return val


def _out(val):
    val = complex(val) if np.iscomplexobj(val) else float(val)
    return val


# ---------------------------------------------------------------------------
# transforms
# ---------------------------------------------------------------------------

def laplace_equal(model: DiffusionModel, x, a, lam, cfg: NumericsConfig = DEFAULT_NUMERICS):
    """``E_x[exp(-lam T_D(a)); T_D(a) < T_U(a)]``."""
    if not a > 0:
        raise ValidationError("a must be positive")
    _check_lambda(lam)
    _check_levels(model, x, x - a, x + a)
    return _out(_integrate(lambda u: barrier_derivative(model, u, u + a, x, lam, cfg),
                           x - a, x, cfg, lam))


def h_factor(model: DiffusionModel, u, b, c, lam, cfg: NumericsConfig = DEFAULT_NUMERICS):
    """``E_u[exp(-lam tau_c); tau_c < T_U(b)]`` for ``c <= u``."""
    if not b > 0:
        raise ValidationError("b must be positive")
    if c > u:
        raise ValidationError("need c <= u")
    _check_lambda(lam)
    _check_levels(model, u, c, u + b)
    if c == u:
        return 1.0
    expo = _integrate(lambda v: -lower_slope(model, v, b, lam, cfg), c, u, cfg, lam)
    return _out(np.exp(-expo))


def _cheb_tol(cfg):
    # difference quotients carry ~1e-10 noise; fitting below it never converges
    return cfg.cheb_tol if cfg.derivatives == "exact" else max(cfg.cheb_tol, 1e-8)


def _slope_antiderivative(model, width, lo, hi, lam, cfg):
    return ChebyshevAntiderivative(lambda v: lower_slope(model, v, width, lam, cfg), lo, hi,
                                   tol=_cheb_tol(cfg))


def laplace_dd_larger(model: DiffusionModel, x, a, b, lam, cfg: NumericsConfig = DEFAULT_NUMERICS):
    """Transform for ``a > b > 0``."""
    if not a > b > 0:
        raise ValidationError("need a > b > 0")
    _check_lambda(lam)
    _check_levels(model, x, x - a, x + b)
    expo = _slope_antiderivative(model, b, x - a, x, lam, cfg)

    def integrand(u):
        return barrier_derivative(model, u, u + b, x, lam, cfg) * np.exp(expo(u) - expo(u - a + b))

    return _out(_integrate(integrand, x - b, x, cfg, lam))


class DrawdownTimeTransform:
    """``J_s(lam; a) = E_s[exp(-lam T_D(a))]`` for every start ``s >= s_lo``.

    Writing ``K`` for the running integral (from ``s_lo``) of the killing rate
    of the maximum and ``d`` for the drawdown intensity,

        J_s = exp(K(s)) * int_s^inf d(u) exp(-K(u)) du.

    ``K`` and the tail integral are tabulated chunk by chunk on
    ``[s_lo, inf)``; chunks double in length until ``exp(-K)`` drops below
    1e-14 or the interval end is reached.
    """

    def __init__(self, model, s_lo, a, lam, cfg=DEFAULT_NUMERICS, first_chunk=None):
        self.model, self.a, self.lam, self.cfg = model, a, lam, cfg
        self.s_lo = float(s_lo)
        hi_end = model.interval.hi
        length = first_chunk or a
        p = self.s_lo
        k_off = 0.0
        g_off = 0.0
        self._chunks = []
        for _ in range(_MAX_CHUNKS):
            q = min(p + length, hi_end)
            kill = ChebyshevAntiderivative(lambda v: upward_rate(model, v, a, lam, cfg), p, q,
                                           tol=_cheb_tol(cfg))
            rate = ChebyshevAntiderivative(lambda v: drawdown_rate(model, v, a, lam, cfg), p, q,
                                           tol=_cheb_tol(cfg))
            k0 = k_off

            def tail(u, kill=kill, rate=rate, k0=k0):
                return rate.values(u) * np.exp(-(k0 + kill(u)))

            mass = ChebyshevAntiderivative(tail, p, q, tol=_cheb_tol(cfg))
            self._chunks.append((p, q, k0, kill, g_off, mass))
            k_off = k0 + kill.total
            g_off = g_off + mass.total
            if abs(np.exp(-k_off)) < _TAIL or q >= hi_end:
                break
            p, length = q, 2 * length
        else:
            raise TruncationNotConverged(
                f"drawdown-time tail still {abs(np.exp(-k_off)):.3g} after {_MAX_CHUNKS} chunks")
        self._breaks = np.array([c[0] for c in self._chunks] + [self._chunks[-1][1]])
        self._total = g_off

    def __call__(self, s):
        s = np.asarray(s, dtype=float)
        if np.any(s < self.s_lo - 1e-12) or np.any(s > self._breaks[-1]):
            raise ValidationError("start point outside the tabulated range")
        idx = np.clip(np.searchsorted(self._breaks, s, side="right") - 1, 0, len(self._chunks) - 1)
        out = np.zeros(s.shape, dtype=complex if np.iscomplexobj(np.asarray(self.lam)) else float)
        for i in np.unique(idx):
            sel = idx == i
            p, q, k0, kill, g_off, mass = self._chunks[i]
            ss = s[sel]
            remaining = self._total - (g_off + mass(ss))
            out[sel] = np.exp(k0 + kill(ss)) * remaining
        return out


def laplace_dd_uncond(model: DiffusionModel, x, a, lam, cfg: NumericsConfig = DEFAULT_NUMERICS):
    """``E_x[exp(-lam T_D(a))]``, no drawup constraint."""
    if not a > 0:
        raise ValidationError("a must be positive")
    _check_lambda(lam)
    _check_levels(model, x, x - a)
    return _out(DrawdownTimeTransform(model, x, a, lam, cfg)(np.array([x]))[0])


def laplace_du_larger(model: DiffusionModel, x, a, b, lam, cfg: NumericsConfig = DEFAULT_NUMERICS):
    """Transform for ``b > a > 0``, via the process mirrored at ``x``."""
    if not b > a > 0:
        raise ValidationError("need b > a > 0")
    _check_lambda(lam)
    _check_levels(model, x, x - a, x + b)
    mirror = reflect(model, x)
    dd_time = DrawdownTimeTransform(model, x, a, lam, cfg, first_chunk=b)
    # exponent of H on the mirrored process, over [x - b, x]
    expo = _slope_antiderivative(mirror, a, x - b, x, lam, cfg)

    def integrand(v):
        top = 2 * x - v
        first_up = barrier_derivative(mirror, top, top + a, x, lam, cfg)
        keep = np.exp(expo(top) - expo(top - b + a))
        return first_up * keep * dd_time(v + b - a)

    total = dd_time(np.array([x]))[0]
    return _out(total - _integrate(integrand, x, x + a, cfg, lam))


def laplace_ddu(model: DiffusionModel, x, a, b, lam, cfg: NumericsConfig = DEFAULT_NUMERICS):
    """``L_x(lam; a, b)``, dispatched on the sign of ``a - b``."""
    if a == b:
        return laplace_equal(model, x, a, lam, cfg)
    if a > b:
        return laplace_dd_larger(model, x, a, b, lam, cfg)
    return laplace_du_larger(model, x, a, b, lam, cfg)


_SMALL_LAMBDAS = (4e-10, 2e-10, 1e-10)


def precede_probability(model: DiffusionModel, x, a, b, cfg: NumericsConfig = DEFAULT_NUMERICS) -> float:
    """``P_x(T_D(a) < T_U(b))`` as the ``lam -> 0+`` limit of :func:`laplace_ddu`.

    Quadratic extrapolation through ``lam`` = 4e-10, 2e-10, 1e-10.
    """
    f4, f2, f1 = (laplace_ddu(model, x, a, b, lam, cfg) for lam in _SMALL_LAMBDAS)
    return float((8 * f1 - 6 * f2 + f4) / 3)
