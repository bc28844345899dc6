"""Vectorised quadrature used throughout the package.

Two tools live here:

* :func:`gauss_kronrod` -- globally adaptive 15-point Gauss-Kronrod rule.
  All pending panels are evaluated in a single call to the integrand, which
  is what makes the nested drawdown integrals affordable (every integrand
  evaluation is a batch of ODE solves).
* :class:`ChebyshevAntiderivative` -- a piecewise Chebyshev interpolant of a
  smooth function together with its running integral.  Used where a whole
  family of integrals with a moving endpoint is needed at once.

Both accept real or complex valued integrands.
"""

from __future__ import annotations

from typing import Callable

import numpy as np
from numpy.polynomial import chebyshev as C

from .errors import QuadratureFailed

# Kronrod abscissae on [0, 1) (symmetric), Kronrod weights, Gauss weights for
# the odd-indexed abscissae.
_XGK = np.array([
    0.991455371120812639206854697526329,
    0.949107912342758524526189684047851,
    0.864864423359769072789712788640926,
    0.741531185599394439863864773280788,
    0.586087235467691130294144845693013,
    0.405845151377397166906606412076961,
    0.207784955007898467600689403773245,
    0.000000000000000000000000000000000,
])
_WGK = np.array([
    0.022935322010529224963732008058970,
    0.063092092629978553290700663189204,
    0.104790010322250183839876322541518,
    0.140653259715525918745189590510238,
    0.169004726639267902826583426598550,
    0.190350578064785409913256402421014,
    0.204432940075298892414161999234649,
    0.209482141084727828012999174891714,
])
_WG = np.array([
    0.129484966168869693270611432679082,
    0.279705391489276667901467771423780,
    0.381830050505118944950369775488975,
    0.417959183673469387755102040816327,
])

# Full 15-node layout on [-1, 1].
_NODES = np.concatenate([-_XGK[:-1], _XGK[::-1]])
_KW = np.concatenate([_WGK[:-1], _WGK[::-1]])
_GW = np.zeros(15)
_GW[1:7:2] = _WG[:3]
_GW[7] = _WG[3]
_GW[8:15] = _GW[6::-1]

GK15_NODES = _NODES


def _panel_rules(values, half):
    kron = (values * _KW).sum(axis=-1) * half
    gauss = (values * _GW).sum(axis=-1) * half
    mean = kron / (2 * half)
    resasc = (np.abs(values - mean[:, None]) * _KW).sum(axis=-1) * np.abs(half)
    err = np.abs(kron - gauss)
    with np.errstate(divide="ignore", invalid="ignore"):
        scaled = resasc * np.minimum(1.0, (200.0 * err / resasc) ** 1.5)
    err = np.where(resasc > 0, scaled, err)
    # roundoff floor, as in QUADPACK
    resabs = (np.abs(values) * _KW).sum(axis=-1) * np.abs(half)
    floor = 50.0 * np.finfo(float).eps * resabs
    return kron, np.maximum(err, floor)


def gauss_kronrod(
    f: Callable[[np.ndarray], np.ndarray],
    a: float,
    b: float,
    abs_tol: float = 1e-9,
    rel_tol: float = 1e-10,
    max_subdiv: int = 200,
    initial_panels: int = 1,
) -> tuple[complex | float, float]:
    """Adaptive 15-point Gauss-Kronrod integral of ``f`` over ``[a, b]``.

    ``f`` receives a flat array of abscissae and must return values of the
    same shape.  Panels whose error estimate exceeds their share of the
    tolerance are bisected, all of them in one sweep.

    Returns
    -------
    value, error_estimate

    Raises
    ------
    QuadratureFailed
        If the panel count would exceed ``max_subdiv`` before the error
        target is met, or the integrand returns non-finite values.
    """
    if a == b:
        return 0.0, 0.0
    edges = np.linspace(a, b, initial_panels + 1)
    lo, hi = edges[:-1], edges[1:]
    done_val = []
    done_err = []
    span = abs(b - a)
    while True:
        mid = 0.5 * (lo + hi)
        half = 0.5 * (hi - lo)
        x = mid[:, None] + half[:, None] * _NODES
        vals = np.asarray(f(x.ravel())).reshape(x.shape)
        if not np.all(np.isfinite(vals)):
            raise QuadratureFailed("integrand returned non-finite values")
        val, err = _panel_rules(vals, half)
        total = sum(done_val) + val.sum()
        total_err = sum(done_err) + err.sum()
        target = max(abs_tol, rel_tol * abs(total))
        if total_err <= target:
            return total, float(total_err)
        share = target * np.abs(hi - lo) / span
        bad = err > share
        if not bad.any():
            # every panel already meets its share; accept
            return total, float(total_err)
        done_val.extend(val[~bad])
        done_err.extend(err[~bad])
        n_panels = len(done_val) + 2 * int(bad.sum())
        if n_panels > max_subdiv:
            raise QuadratureFailed(
                f"no convergence within {max_subdiv} subintervals "
                f"(error estimate {total_err:.3g}, target {target:.3g})"
            )
        lo_bad, hi_bad, mid_bad = lo[bad], hi[bad], mid[bad]
        lo = np.concatenate([lo_bad, mid_bad])
        hi = np.concatenate([mid_bad, hi_bad])


def _cheb_points(n):
    return np.cos(np.pi * (np.arange(n) + 0.5) / n)


def _cheb_matrix(n):
    k = np.arange(n)[:, None]
    j = np.arange(n)[None, :]
    m = (2.0 / n) * np.cos(np.pi * k * (j + 0.5) / n)
    m[0] *= 0.5
    return m


_MATRICES: dict[int, np.ndarray] = {}


def cheb_coefficients(values: np.ndarray) -> np.ndarray:
    """Chebyshev coefficients from samples at first-kind points (last axis)."""
    n = values.shape[-1]
    if n not in _MATRICES:
        _MATRICES[n] = _cheb_matrix(n)
    return values @ _MATRICES[n].T


class ChebyshevAntiderivative:
    """Piecewise Chebyshev model of ``f`` on ``[lo, hi]`` with its integral.

    Each piece starts at ``degree`` points; when the trailing coefficients
    are not below ``tol`` relative to the largest one, the degree is doubled
    up to ``max_degree`` and then the piece is bisected.

    Calling the instance gives ``F(x) = int_lo^x f``; :meth:`values` gives the
    interpolated ``f`` itself.
    """

    def __init__(self, f, lo, hi, tol=1e-13, degree=24, max_degree=96,
                 max_pieces=64):
        if not hi > lo:
            raise ValueError("need hi > lo")
        self.lo, self.hi = float(lo), float(hi)
        pieces = []
        stack = [(self.lo, self.hi)]
        while stack:
            a, b = stack.pop()
            n = degree
            while True:
                x = 0.5 * (a + b) + 0.5 * (b - a) * _cheb_points(n)
                vals = np.asarray(f(x))
                if not np.all(np.isfinite(vals)):
                    raise QuadratureFailed("non-finite kernel value in Chebyshev fit")
                c = cheb_coefficients(vals)
                scale = np.max(np.abs(c))
                tail = np.max(np.abs(c[-3:]))
                if tail <= tol * max(scale, 1e-300) or scale == 0:
                    pieces.append((a, b, c))
                    break
                if n < max_degree:
                    n *= 2
                    continue
                if len(pieces) + len(stack) + 2 > max_pieces:
                    raise QuadratureFailed("Chebyshev model needs too many pieces")
                m = 0.5 * (a + b)
                stack.extend([(m, b), (a, m)])
                break
        pieces.sort(key=lambda p: p[0])
        self._breaks = np.array([p[0] for p in pieces] + [pieces[-1][1]])
        self._coef = [p[2] for p in pieces]
        self._icoef = []
        offsets = [0.0]
        for a, b, c in pieces:
            ic = C.chebint(c, lbnd=-1) * (0.5 * (b - a))
            self._icoef.append(ic)
            offsets.append(offsets[-1] + C.chebval(1.0, ic))
        self._offsets = np.array(offsets)

    @property
    def total(self):
        return self._offsets[-1]

    def _locate(self, x):
        x = np.asarray(x, dtype=float)
        idx = np.searchsorted(self._breaks, x, side="right") - 1
        return x, np.clip(idx, 0, len(self._coef) - 1)

    def _apply(self, x, coefs, offset):
        x, idx = self._locate(x)
        out = np.zeros(x.shape, dtype=np.result_type(self._coef[0], float))
        for i in np.unique(idx):
            sel = idx == i
            a, b = self._breaks[i], self._breaks[i + 1]
            s = (2.0 * x[sel] - a - b) / (b - a)
            out[sel] = C.chebval(s, coefs[i]) + (self._offsets[i] if offset else 0.0)
        return out

    def __call__(self, x):
        return self._apply(x, self._icoef, True)

    def values(self, x):
        return self._apply(x, self._coef, False)
