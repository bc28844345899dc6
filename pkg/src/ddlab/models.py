"""Diffusion models ``dX = mu(X) dt + sigma(X) dB`` on an open interval.

Models come from a small parametric catalog (``bm``, ``gbm``, ``ou``,
``cir``) or from a coefficient table read from CSV.  Coefficient evaluators
are vectorised over numpy arrays.
"""

from __future__ import annotations

import csv
import math
from dataclasses import dataclass, field, replace
from pathlib import Path

import numpy as np

from .errors import ValidationError

KINDS = ("bm", "gbm", "ou", "cir", "tabulated")

_REQUIRED = {
    "bm": ("mu", "sigma"),
    "gbm": ("mu", "sigma"),
    "ou": ("kappa", "theta", "sigma"),
    "cir": ("kappa", "theta", "sigma"),
    "tabulated": (),
}


@dataclass(frozen=True)
class StateInterval:
    """Open interval ``(lo, hi)``; either end may be infinite."""

    lo: float = -math.inf
    hi: float = math.inf

    def __post_init__(self):
        if not self.lo < self.hi:
            raise ValidationError(f"empty interval ({self.lo}, {self.hi})")

    def contains(self, x) -> bool:
        return bool(np.all((np.asarray(x) > self.lo) & (np.asarray(x) < self.hi)))

    def closure_contains(self, x) -> bool:
        return bool(np.all((np.asarray(x) >= self.lo) & (np.asarray(x) <= self.hi)))


@dataclass(frozen=True, eq=False)
class DiffusionModel:
    """A catalog diffusion, possibly seen through the map ``u -> shift + sign*u``.

    ``sign``/``shift`` only differ from ``(1, 0)`` for mirrored ``gbm`` and
    ``cir`` models (see :func:`reflect`); the other kinds reflect into
    themselves with new parameters.
    """

    kind: str
    params: dict = field(default_factory=dict)
    interval: StateInterval = StateInterval()
    table: np.ndarray | None = None
    sign: float = 1.0
    shift: float = 0.0

    def __post_init__(self):
        if self.kind not in KINDS:
            raise ValidationError(f"unknown model kind {self.kind!r}")
        missing = [k for k in _REQUIRED[self.kind] if k not in self.params]
        if missing:
            raise ValidationError(f"{self.kind} model needs parameters {missing}")
        if "sigma" in self.params and not self.params["sigma"] > 0:
            raise ValidationError("sigma must be positive")
        if self.kind == "tabulated":
            _check_table(self.table)

    # -- coefficient evaluators -------------------------------------------
    def _base(self, u):
        p = self.params
        k = self.kind
        if k == "bm":
            return np.full_like(u, p["mu"]), np.full_like(u, p["sigma"])
        if k == "gbm":
            return p["mu"] * u, p["sigma"] * u
        if k == "ou":
            return p["kappa"] * (p["theta"] - u), np.full_like(u, p["sigma"])
        if k == "cir":
            with np.errstate(invalid="ignore"):
                return p["kappa"] * (p["theta"] - u), p["sigma"] * np.sqrt(u)
        uu, mm, ss = self.table
        if np.any(u < uu[0]) or np.any(u > uu[-1]):
            raise ValidationError("tabulated model evaluated outside its table")
        return np.interp(u, uu, mm), np.interp(u, uu, ss)

    def coefficients(self, u):
        """Drift and volatility at ``u`` (arrays broadcast like ``u``)."""
        u = np.asarray(u, dtype=float)
        m, s = self._base(self.shift + self.sign * u)
        return self.sign * m, s

    def drift(self, u):
        return self.coefficients(u)[0]

    def vol(self, u):
        return self.coefficients(u)[1]

    @property
    def is_constant(self) -> bool:
        return self.kind == "bm"

    def __repr__(self):
        extra = "" if self.sign == 1 and self.shift == 0 else f", mirror=({self.sign:+g}, {self.shift:g})"
        return f"DiffusionModel({self.kind}, {self.params}, ({self.interval.lo}, {self.interval.hi}){extra})"


def _check_table(table):
    if table is None:
        raise ValidationError("tabulated model needs a table")
    table = np.asarray(table, dtype=float)
    if table.ndim != 2 or table.shape[0] != 3 or table.shape[1] < 2:
        raise ValidationError("table must have rows u, mu, sigma with at least two points")
    if not np.all(np.isfinite(table)):
        raise ValidationError("table entries must be finite")
    if not np.all(np.diff(table[0]) > 0):
        raise ValidationError("table abscissae must be strictly increasing")
    if not np.all(table[2] > 0):
        raise ValidationError("tabulated sigma must be positive")


def bm(mu: float = 0.0, sigma: float = 1.0) -> DiffusionModel:
    return DiffusionModel("bm", {"mu": float(mu), "sigma": float(sigma)})


def gbm(mu: float, sigma: float) -> DiffusionModel:
    return DiffusionModel("gbm", {"mu": float(mu), "sigma": float(sigma)}, StateInterval(0.0, math.inf))


def gbm_log(mu: float, sigma: float) -> DiffusionModel:
    """Log-price of a ``gbm(mu, sigma)``: a BM with drift ``mu - sigma^2/2``."""
    return bm(mu - 0.5 * sigma * sigma, sigma)


def ou(kappa: float, theta: float, sigma: float) -> DiffusionModel:
    return DiffusionModel("ou", {"kappa": float(kappa), "theta": float(theta), "sigma": float(sigma)})


def cir(kappa: float, theta: float, sigma: float) -> DiffusionModel:
    return DiffusionModel("cir", {"kappa": float(kappa), "theta": float(theta), "sigma": float(sigma)},
                          StateInterval(0.0, math.inf))


def tabulated(u, mu, sigma) -> DiffusionModel:
    table = np.array([u, mu, sigma], dtype=float)
    _check_table(table)
    return DiffusionModel("tabulated", {}, StateInterval(table[0, 0], table[0, -1]), table)


def read_table_csv(path) -> DiffusionModel:
    """Load a tabulated model from a CSV with header ``u,mu,sigma``."""
    with Path(path).open(newline="") as fh:
        reader = csv.reader(fh)
        header = [h.strip() for h in next(reader, [])]
        if header != ["u", "mu", "sigma"]:
            raise ValidationError("model CSV header must be exactly u,mu,sigma")
        rows = []
        for line in reader:
            if not line or all(not c.strip() for c in line):
                continue
            if len(line) != 3:
                raise ValidationError(f"malformed model CSV row {line}")
            try:
                rows.append([float(c) for c in line])
            except ValueError as exc:
                raise ValidationError(f"non-numeric model CSV row {line}") from exc
    if not rows:
        raise ValidationError("model CSV has no rows")
    arr = np.array(rows).T
    return tabulated(arr[0], arr[1], arr[2])


def from_name(kind: str, **params) -> DiffusionModel:
    """Build a catalog model from keyword parameters (CLI helper)."""
    builders = {"bm": bm, "gbm": gbm, "ou": ou, "cir": cir}
    if kind not in builders:
        raise ValidationError(f"unknown model kind {kind!r}")
    need = _REQUIRED[kind]
    missing = [k for k in need if params.get(k) is None]
    if missing:
        raise ValidationError(f"{kind} model needs parameters {missing}")
    return builders[kind](**{k: params[k] for k in need})


def reflect(model: DiffusionModel, x: float) -> DiffusionModel:
    """Model of ``Y = 2x - X``: drift ``-mu(2x - u)``, vol ``sigma(2x - u)``."""
    iv = model.interval
    if not (iv.lo <= x <= iv.hi):
        raise ValidationError("reflection point outside the model interval")
    new_iv = StateInterval(2 * x - iv.hi, 2 * x - iv.lo)
    plain = model.sign == 1.0 and model.shift == 0.0
    if plain and model.kind == "bm":
        return replace(model, params={**model.params, "mu": -model.params["mu"]}, interval=new_iv)
    if plain and model.kind == "ou":
        return replace(model, params={**model.params, "theta": 2 * x - model.params["theta"]},
                       interval=new_iv)
    if plain and model.kind == "tabulated":
        uu, mm, ss = model.table
        table = np.array([2 * x - uu[::-1], -mm[::-1], ss[::-1]])
        return replace(model, table=table, interval=new_iv)
    return replace(model, sign=-model.sign, shift=model.shift + 2 * model.sign * x, interval=new_iv)
