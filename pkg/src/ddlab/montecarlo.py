"""Seeded Monte Carlo oracle for drawdown and drawup stopping times.

Paths are advanced on a fixed grid (exact Gaussian increments for Brownian
motion, Euler-Maruyama otherwise).  Between grid points the path is taken to
be linear, so the first time the drawdown reaches ``a`` (or the drawup
reaches ``b``) is located by linear interpolation inside the step.

Randomness is organised in blocks of ``SimConfig.block`` paths; block ``k``
draws from ``Generator(Philox(SeedSequence([seed, k])))``.  Results depend
only on ``(seed, paths, dt, block)``, never on how blocks are scheduled.
"""

from __future__ import annotations

import csv
import math
import warnings
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field
from pathlib import Path

import numba
import numpy as np

from .errors import StateLeftInterval, ValidationError
from .models import DiffusionModel

_KIND_CODE = {"bm": 0, "gbm": 1, "ou": 2, "cir": 3, "tabulated": 4}
_PARAM_ORDER = {"bm": ("mu", "sigma"), "gbm": ("mu", "sigma"),
                "ou": ("kappa", "theta", "sigma"), "cir": ("kappa", "theta", "sigma"),
                "tabulated": ()}
# coarse monitoring factor for the discretisation-bias extrapolation
_COARSE = 4
CSV_HEADER = ("path_id", "t_dd", "t_du", "censored_dd", "censored_du", "x_at_dd", "sup_du_before_dd")


@dataclass(frozen=True)
class SimConfig:
    """Simulation controls.

    ``dt=None`` picks the largest step allowed by the resolution rule
    ``sigma(x) sqrt(dt) <= min(a, b) / 100``; ``horizon=None`` uses
    ``50 (max(a, b) / sigma(x))**2``.  ``stop="first"`` ends a path at the
    earlier of the two stopping times and marks the other censored, which
    is all that is needed for the precedence event and much cheaper.
    ``kill_rate`` additionally censors each path at an independent
    exponential lifetime.
    """

    paths: int = 100_000
    dt: float | None = None
    horizon: float | None = None
    seed: int = 42
    scheme: str = "auto"
    stop: str = "both"
    kill_rate: float = 0.0
    block: int = 8192
    workers: int = 1

    def __post_init__(self):
        if self.paths < 1:
            raise ValidationError("paths must be at least 1")
        if self.dt is not None and not self.dt > 0:
            raise ValidationError("dt must be positive")
        if self.horizon is not None and not self.horizon > 0:
            raise ValidationError("horizon must be positive")
        if self.scheme not in ("auto", "exact-bm", "euler"):
            raise ValidationError("scheme must be auto, exact-bm or euler")
        if self.stop not in ("both", "first"):
            raise ValidationError("stop must be 'both' or 'first'")
        if self.kill_rate < 0:
            raise ValidationError("kill_rate must be non-negative")
        if self.block < 1 or self.workers < 1:
            raise ValidationError("block and workers must be positive")
        if not 0 <= self.seed < 2**64:
            raise ValidationError("seed must be a 64-bit unsigned integer")


@dataclass(frozen=True)
class StoppingRecord:
    t_dd: float
    t_du: float
    censored_dd: bool
    censored_du: bool
    x_at_dd: float
    sup_du_before_dd: float


@dataclass
class StoppingEnsemble:
    """Column-oriented per-path records plus the run settings.

    Censored times hold the time at which observation of the path ended.
    ``t_range`` is the first grid time at which ``max - min >= a``;
    ``x_end`` the state when the path was stopped.  The ``*_coarse``
    columns repeat the stopping times for the same paths observed only on
    every fourth grid point.
    """

    model: DiffusionModel
    x: float
    a: float
    b: float
    config: SimConfig
    dt: float
    horizon: float
    t_dd: np.ndarray
    t_du: np.ndarray
    censored_dd: np.ndarray
    censored_du: np.ndarray
    x_at_dd: np.ndarray
    sup_du_before_dd: np.ndarray
    t_range: np.ndarray
    x_end: np.ndarray
    t_dd_coarse: np.ndarray = field(repr=False, default=None)
    t_du_coarse: np.ndarray = field(repr=False, default=None)
    censored_dd_coarse: np.ndarray = field(repr=False, default=None)
    censored_du_coarse: np.ndarray = field(repr=False, default=None)
    max_vol_step: float = field(default=0.0, repr=False)

    def __len__(self):
        return self.t_dd.size

    def record(self, i: int) -> StoppingRecord:
        return StoppingRecord(float(self.t_dd[i]), float(self.t_du[i]), bool(self.censored_dd[i]),
                              bool(self.censored_du[i]), float(self.x_at_dd[i]),
                              float(self.sup_du_before_dd[i]))

    def records(self):
        return (self.record(i) for i in range(len(self)))

    @property
    def dd_first(self) -> np.ndarray:
        """Per-path indicator of ``T_D(a) < T_U(b)`` observed before censoring."""
        return _dd_first(self.t_dd, self.t_du, self.censored_dd, self.censored_du)

    def _per_path(self, fn, extrapolate):
        fine = fn(self.t_dd, self.dd_first)
        if not extrapolate:
            return fine
        first_c = _dd_first(self.t_dd_coarse, self.t_du_coarse,
                            self.censored_dd_coarse, self.censored_du_coarse)
        coarse = fn(self.t_dd_coarse, first_c)
        # monitoring bias is proportional to sqrt(step); the coarse grid has twice it
        return 2.0 * fine - coarse

    def to_csv(self, path) -> None:
        with Path(path).open("w", newline="") as fh:
            w = csv.writer(fh, lineterminator="\n")
            w.writerow(CSV_HEADER)
            for i in range(len(self)):
                w.writerow([i, repr(float(self.t_dd[i])), repr(float(self.t_du[i])),
                            int(self.censored_dd[i]), int(self.censored_du[i]),
                            repr(float(self.x_at_dd[i])), repr(float(self.sup_du_before_dd[i]))])


def _dd_first(t_dd, t_du, c_dd, c_du):
    return ~c_dd & (c_du | (t_dd < t_du))


# ---------------------------------------------------------------------------
# kernels
# ---------------------------------------------------------------------------

@numba.njit(cache=True, inline="always")
def _coef(u, kind, prm, tu, tm, ts, sign, shift):
    v = shift + sign * u
    if kind == 0:
        m, s = prm[0], prm[1]
    elif kind == 1:
        m, s = prm[0] * v, prm[1] * v
    elif kind == 2:
        m, s = prm[0] * (prm[1] - v), prm[2]
    elif kind == 3:
        m, s = prm[0] * (prm[1] - v), prm[2] * math.sqrt(max(v, 0.0))
    else:
        m, s = np.interp(v, tu, tm), np.interp(v, tu, ts)
    return sign * m, s


@numba.njit(cache=True, nogil=True, error_model="numpy")
def _run_block(rng, n, x0, a, b, dt, horizon, kill_rate, stop_first, exact,
               kind, prm, tu, tm, ts, sign, shift, lo, hi, out):
    """Simulate ``n`` paths into the rows of ``out``; returns (status, max sigma*sqrt(dt)).

    The same path is also monitored on every ``_COARSE``-th grid point
    (columns 8-11), which is what the bias-extrapolated estimators use.
    """
    mu0, sig0 = _coef(x0, kind, prm, tu, tm, ts, sign, shift)
    status = 0
    max_vs = 0.0
    sq_dt = math.sqrt(dt)
    for i in range(n):
        life = horizon
        if kill_rate > 0.0:
            life = min(life, rng.exponential() / kill_rate)
        nsteps = int(math.ceil(life / dt))
        x = x0
        hi_x = x0
        lo_x = x0
        t = 0.0
        t_dd = -1.0
        t_du = -1.0
        t_rg = -1.0
        x_dd = np.nan
        sup_du = 0.0
        xc = x0
        hi_c = x0
        lo_c = x0
        tc = 0.0
        c_dd = -1.0
        c_du = -1.0
        for k in range(nsteps):
            if k < nsteps - 1:
                t1 = (k + 1) * dt
                h = dt
                sq = sq_dt
            else:
                t1 = life
                h = life - k * dt
                sq = math.sqrt(h)
            z = rng.standard_normal()
            if exact:
                x1 = x + mu0 * h + sig0 * sq * z
            else:
                m, s = _coef(x, kind, prm, tu, tm, ts, sign, shift)
                vs = s * sq
                if vs > max_vs:
                    max_vs = vs
                x1 = x + m * h + vs * z
            if not (lo < x1 < hi):
                status = 1
                return status, max_vs
            if x1 < x:
                if t_dd < 0.0:
                    d0 = hi_x - x
                    d1 = hi_x - x1
                    if d1 >= a:
                        t_dd = t + h * (a - d0) / (d1 - d0)
                        x_dd = hi_x - a
            elif x1 > x:
                if t_du < 0.0:
                    u0 = x - lo_x
                    u1 = x1 - lo_x
                    if u1 >= b:
                        t_du = t + h * (b - u0) / (u1 - u0)
                if t_dd < 0.0:
                    sup_du = max(sup_du, x1 - lo_x)
            hi_x = max(hi_x, x1)
            lo_x = min(lo_x, x1)
            x = x1
            t = t1
            if t_rg < 0.0 and hi_x - lo_x >= a:
                t_rg = t
            if (k + 1) % _COARSE == 0 or k == nsteps - 1:
                hc = t - tc
                if x < xc and c_dd < 0.0 and hi_c - x >= a:
                    c_dd = tc + hc * (a - (hi_c - xc)) / (xc - x)
                elif x > xc and c_du < 0.0 and x - lo_c >= b:
                    c_du = tc + hc * (b - (xc - lo_c)) / (x - xc)
                hi_c = max(hi_c, x)
                lo_c = min(lo_c, x)
                xc = x
                tc = t
            if stop_first:
                if (t_dd >= 0.0 or t_du >= 0.0) and (c_dd >= 0.0 or c_du >= 0.0):
                    break
            elif t_dd >= 0.0 and t_du >= 0.0 and c_dd >= 0.0 and c_du >= 0.0:
                break
        out[i, 0] = t_dd if t_dd >= 0.0 else t
        out[i, 1] = t_du if t_du >= 0.0 else t
        out[i, 2] = 1.0 if t_dd < 0.0 else 0.0
        out[i, 3] = 1.0 if t_du < 0.0 else 0.0
        out[i, 4] = x_dd
        out[i, 5] = sup_du
        out[i, 6] = t_rg if t_rg >= 0.0 else np.nan
        out[i, 7] = x
        out[i, 8] = c_dd if c_dd >= 0.0 else tc
        out[i, 9] = c_du if c_du >= 0.0 else tc
        out[i, 10] = 1.0 if c_dd < 0.0 else 0.0
        out[i, 11] = 1.0 if c_du < 0.0 else 0.0
    if exact:
        max_vs = sig0 * math.sqrt(dt)
    return status, max_vs


def _model_arrays(model: DiffusionModel):
    prm = np.array([model.params[k] for k in _PARAM_ORDER[model.kind]] or [0.0], dtype=float)
    if model.table is not None:
        tu, tm, ts = (np.ascontiguousarray(r, dtype=float) for r in model.table)
    else:
        tu = tm = ts = np.zeros(2)
    return _KIND_CODE[model.kind], prm, tu, tm, ts


def _resolve(model, x, a, b, cfg):
    if not (a > 0 and b > 0):
        raise ValidationError("a and b must be positive")
    if not model.interval.contains(x):
        raise ValidationError(f"start point {x} outside the model interval")
    scheme = cfg.scheme
    if scheme == "auto":
        scheme = "exact-bm" if model.is_constant else "euler"
    if scheme == "exact-bm" and not model.is_constant:
        raise ValidationError("exact-bm scheme needs a constant-coefficient model")
    sig = float(model.vol(x))
    bound = min(a, b) / 100.0
    dt = cfg.dt if cfg.dt is not None else (bound / sig) ** 2
    if sig * math.sqrt(dt) > bound * (1 + 1e-12):
        raise ValidationError(
            f"dt={dt:g} too coarse: need sigma*sqrt(dt) <= min(a,b)/100 = {bound:g}")
    horizon = cfg.horizon if cfg.horizon is not None else 50.0 * (max(a, b) / sig) ** 2
    return scheme, dt, horizon, bound


def simulate(model: DiffusionModel, x: float, a: float, b: float, cfg: SimConfig = SimConfig()) -> StoppingEnsemble:
    """Simulate ``cfg.paths`` paths from ``x`` and record drawdown/drawup times."""
    scheme, dt, horizon, bound = _resolve(model, x, a, b, cfg)
    kind, prm, tu, tm, ts = _model_arrays(model)
    out = np.empty((cfg.paths, 12))
    starts = list(range(0, cfg.paths, cfg.block))
    lo, hi = model.interval.lo, model.interval.hi

    def run(start):
        rng = np.random.Generator(np.random.Philox(np.random.SeedSequence([cfg.seed, start // cfg.block])))
        n = min(cfg.block, cfg.paths - start)
        return _run_block(rng, n, float(x), float(a), float(b), dt, horizon, float(cfg.kill_rate),
                          cfg.stop == "first", scheme == "exact-bm", kind, prm, tu, tm, ts,
                          float(model.sign), float(model.shift), lo, hi, out[start:start + n])

    if cfg.workers == 1:
        results = [run(s) for s in starts]
    else:
        with ThreadPoolExecutor(cfg.workers) as pool:
            results = list(pool.map(run, starts))
    if any(status for status, _ in results):
        raise StateLeftInterval("a simulated path left the model interval; reduce dt")
    max_vs = max(v for _, v in results)
    if max_vs > bound * (1 + 1e-9):
        warnings.warn(f"sigma*sqrt(dt) reached {max_vs:.3g} along paths, above min(a,b)/100",
                      RuntimeWarning, stacklevel=2)
    return StoppingEnsemble(
        model, float(x), float(a), float(b), cfg, dt, horizon,
        t_dd=out[:, 0].copy(), t_du=out[:, 1].copy(),
        censored_dd=out[:, 2] > 0, censored_du=out[:, 3] > 0,
        x_at_dd=out[:, 4].copy(), sup_du_before_dd=out[:, 5].copy(),
        t_range=out[:, 6].copy(), x_end=out[:, 7].copy(),
        t_dd_coarse=out[:, 8].copy(), t_du_coarse=out[:, 9].copy(),
        censored_dd_coarse=out[:, 10] > 0, censored_du_coarse=out[:, 11] > 0,
        max_vol_step=max_vs,
    )


# ---------------------------------------------------------------------------
# estimators
# ---------------------------------------------------------------------------

def _mean_se(values):
    values = np.asarray(values, dtype=float)
    n = values.size
    mean = float(np.mean(values))
    se = float(np.std(values, ddof=1) / math.sqrt(n)) if n > 1 else math.inf
    return mean, se


_EXTRAPOLATE_DOC = """
    With ``extrapolate=True`` each path contributes ``2 f(fine) - f(coarse)``,
    where ``f`` is the statistic read off the full grid and off every fourth
    grid point.  Discrete monitoring biases ``f`` in proportion to
    ``sqrt(dt)``, so the combination removes the leading bias term; the
    standard error is that of the combined per-path values.
"""


def estimate_frequency(e: StoppingEnsemble, extrapolate: bool = False):
    """Fraction of paths with ``T_D(a) < T_U(b)`` before censoring, with its standard error."""
    return _mean_se(e._per_path(lambda t, first: first.astype(float), extrapolate))


def estimate_laplace(e: StoppingEnsemble, lam: float, extrapolate: bool = False):
    """Estimate ``E[exp(-lam T_D); T_D < T_U]`` and its standard error."""
    if not lam > 0:
        raise ValidationError("lambda must be positive")
    if math.exp(-lam * e.horizon) >= 1e-6:
        warnings.warn("horizon too short for this lambda: censored paths bias the estimate",
                      RuntimeWarning, stacklevel=2)
    if e.config.kill_rate > 0:
        warnings.warn("ensemble carries exponential censoring; the estimate is also discounted by it",
                      RuntimeWarning, stacklevel=2)
    return _mean_se(e._per_path(lambda t, first: np.where(first, np.exp(-lam * t), 0.0), extrapolate))


def estimate_finite_horizon(e: StoppingEnsemble, T: float, extrapolate: bool = False):
    """Frequency of ``{T_D(a) <= T, T_D(a) < T_U(b)}``."""
    if T > e.horizon:
        raise ValidationError("T exceeds the simulation horizon")
    return _mean_se(e._per_path(lambda t, first: (first & (t <= T)).astype(float), extrapolate))


for _f in (estimate_frequency, estimate_laplace, estimate_finite_horizon):
    _f.__doc__ += _EXTRAPOLATE_DOC


@dataclass(frozen=True)
class RangeReport:
    checked: int
    violations: int
    max_gap: float


def verify_range_identity(e: StoppingEnsemble) -> RangeReport:
    """Check ``min(T_D(a), T_U(a))`` against the first time the range reaches ``a``.

    Both sides are read off the same simulated grid; they must agree to
    within one time step on every path where either was observed.
    """
    if e.a != e.b:
        raise ValidationError("range identity needs an ensemble simulated with a == b")
    first = np.where(e.censored_dd, np.where(e.censored_du, np.nan, e.t_du),
                     np.where(e.censored_du, e.t_dd, np.minimum(e.t_dd, e.t_du)))
    seen = ~np.isnan(first) | ~np.isnan(e.t_range)
    both = ~np.isnan(first) & ~np.isnan(e.t_range)
    gap = np.abs(first[both] - e.t_range[both])
    tol = e.dt * (1 + 1e-9)
    violations = int(np.sum(gap > tol)) + int(np.sum(seen & ~both))
    return RangeReport(int(seen.sum()), violations, float(gap.max()) if gap.size else 0.0)
