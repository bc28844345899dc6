"""Command-line interface.

Scalar results are printed as one line of JSON
(``{"value": ..., "std_error": ..., "method": ...}``), grids as CSV.  Exit
status is 0 on success, 1 for invalid input and 2 for a numerical failure;
the error class name is printed on standard error.
"""

from __future__ import annotations

import argparse
import json
import math
import sys
from pathlib import Path

import numpy as np

from . import acceptance
from . import applications as app
from . import brownian as bmf
from . import drawdown as dd
from . import montecarlo as mc
from .errors import NumericalError, ValidationError
from .inversion import invert, invert_general
from .models import DiffusionModel, from_name, read_table_csv


class UsageError(ValidationError):
    pass


class _Parser(argparse.ArgumentParser):
    def error(self, message):
        raise UsageError(message)


def _float_grid(text: str) -> np.ndarray:
    """``start:stop:step`` (inclusive stop) or a comma-separated list."""
    try:
        if ":" in text:
            start, stop, step = (float(v) for v in text.split(":"))
            if not step > 0 or stop < start:
                raise ValueError
            n = int(math.floor((stop - start) / step + 1e-9)) + 1
            return start + step * np.arange(n)
        return np.array([float(v) for v in text.split(",")])
    except ValueError as exc:
        raise ValidationError(f"bad grid {text!r}; use start:stop:step or a comma list") from exc


def _add_model(p):
    g = p.add_argument_group("model")
    g.add_argument("--model", default="bm", choices=["bm", "gbm", "ou", "cir", "tabulated"])
    g.add_argument("--mu", type=float)
    g.add_argument("--sigma", type=float)
    g.add_argument("--kappa", type=float)
    g.add_argument("--theta", type=float)
    g.add_argument("--table", type=Path, help="CSV with header u,mu,sigma (tabulated model)")
    g.add_argument("--x", type=float, help="start point (default 0, or 1 for gbm/cir)")


def _add_levels(p, need_b=True):
    p.add_argument("--a", type=float, required=True, help="drawdown size")
    if need_b:
        p.add_argument("--b", type=float, required=True, help="drawup size")


def _add_numerics(p):
    p.add_argument("--quad-tol", type=float, default=1e-9)
    p.add_argument("--term-tol", type=float, default=1e-12)


def _model(args) -> tuple[DiffusionModel, float]:
    if args.model == "tabulated":
        if args.table is None:
            raise ValidationError("--table is required for the tabulated model")
        model = read_table_csv(args.table)
        x = args.x if args.x is not None else 0.5 * (model.interval.lo + model.interval.hi)
        return model, x
    if args.model == "bm":
        params = {"mu": 0.0 if args.mu is None else args.mu, "sigma": 1.0 if args.sigma is None else args.sigma}
    else:
        params = {k: getattr(args, k) for k in ("mu", "sigma", "kappa", "theta")}
    model = from_name(args.model, **params)
    x = args.x if args.x is not None else (1.0 if args.model in ("gbm", "cir") else 0.0)
    return model, x


def _bm_params(model: DiffusionModel):
    if model.kind == "bm":
        return bmf.BmParams(model.params["mu"], model.params["sigma"])
    return None


def _numerics(args):
    return dd.NumericsConfig(quad_tol=args.quad_tol)


def _series(args):
    return bmf.DensitySeriesConfig(term_tol=args.term_tol)


def _emit(value, method, std_error=None, **extra):
    print(json.dumps({"value": value, "std_error": std_error, "method": method, **extra}))


# ---------------------------------------------------------------------------
# subcommands
# ---------------------------------------------------------------------------

def _cmd_laplace(args):
    model, x = _model(args)
    bp = _bm_params(model)
    if bp is not None and not args.numerical:
        _emit(float(bmf.bm_laplace_ddu(bp, args.a, args.b, args.lam)), "closed-form")
    else:
        _emit(dd.laplace_ddu(model, x, args.a, args.b, args.lam, _numerics(args)), "ode-quadrature")


def _cmd_prob(args):
    model, x = _model(args)
    _emit(dd.precede_probability(model, x, args.a, args.b, _numerics(args)), "small-lambda-extrapolation")


def _density_rows(args):
    model, x = _model(args)
    bp = _bm_params(model)
    rows = []
    for t in _float_grid(args.t):
        if not t > 0:
            raise ValidationError("density times must be positive")
        if bp is not None:
            try:
                res = bmf.density_ddu(bp, args.a, args.b, t, _series(args))
                val, conv = res.value, res.converged
            except NumericalError:
                val, conv = math.nan, False
            if not conv:
                val = max(invert(lambda s: bmf.bm_laplace_ddu(bp, args.a, args.b, s), t), 0.0)
        else:
            val, conv = max(invert_general(model, x, args.a, args.b, t, _numerics(args)), 0.0), False
        rows.append((t, val, conv))
    return rows


def _cmd_density(args):
    rows = _density_rows(args)
    lines = ["t,density,converged"] + [f"{float(t):.12g},{float(v)!r},{int(c)}" for t, v, c in rows]
    text = "\n".join(lines) + "\n"
    if args.out:
        Path(args.out).write_text(text)
    else:
        sys.stdout.write(text)


def _cmd_prob_horizon(args):
    model, x = _model(args)
    a, b = args.a, args.b
    if model.kind == "gbm":
        # stock prices: relative moves of S are absolute moves of log S
        if args.alpha is not None or args.beta is not None:
            a, b = app.relative_to_log(app.RelativeEventSpec(args.alpha, args.beta))
        sig = model.params["sigma"]
        bp = bmf.BmParams(model.params["mu"] - 0.5 * sig * sig, sig)
    else:
        bp = _bm_params(model)
    if a is None or b is None:
        raise ValidationError("give --a and --b (or --alpha and --beta for gbm)")
    if bp is not None:
        _emit(app.discounted_mass(bp, a, b, args.T, 0.0, _series(args)), "density-series")
    else:
        val = invert(lambda s: dd.laplace_ddu(model, x, a, b, s, _numerics(args)) / s, args.T)
        _emit(min(max(val, 0.0), 1.0), "talbot")


def _cmd_price(args):
    spec = app.RelativeEventSpec(args.alpha, args.beta)
    if args.perpetual == (args.T is not None):
        raise ValidationError("give exactly one of --T and --perpetual")
    p = app.PricingSpec(args.r, args.sigma, maturity=args.T, perpetual=args.perpetual)
    if args.perpetual:
        _emit(app.price_perpetual(spec, p), "laplace-closed-form")
    else:
        _emit(app.price_finite(spec, p, _series(args)), "density-series")


def _cmd_misid(args):
    model, x = _model(args)
    if (args.rate is None) == (args.life is None):
        raise ValidationError("give exactly one of --rate and --life")
    dens = app.read_start_density(args.start_density) if args.start_density else None
    spec = app.SignalSpec(model, args.a, args.b, rate=args.rate, life=args.life, start_density=dens)
    if args.life is not None:
        if args.a != args.b:
            raise ValidationError("fixed-life misidentification uses a single threshold: set --a equal to --b")
        _emit(app.misid_deterministic(model, args.a, args.life, _series(args)), "density-series")
    elif dens is not None:
        _emit(app.misid_aggregate(spec, x, _numerics(args)), "aggregate-trapezoid")
    else:
        _emit(app.misid_exponential(spec, x, _numerics(args)), "laplace")


def _cmd_simulate(args):
    model, x = _model(args)
    cfg = mc.SimConfig(paths=args.paths, dt=args.dt, horizon=args.horizon, seed=args.seed,
                       scheme=args.scheme, stop=args.stop, kill_rate=args.kill_rate, workers=args.workers)
    ens = mc.simulate(model, x, args.a, args.b, cfg)
    if args.out:
        ens.to_csv(args.out)
    freq, se = mc.estimate_frequency(ens)
    summary = {"value": freq, "std_error": se, "method": "monte-carlo", "paths": len(ens),
               "seed": args.seed, "dt": ens.dt, "horizon": ens.horizon,
               "censored_dd": int(ens.censored_dd.sum()), "censored_du": int(ens.censored_du.sum())}
    if args.lam is not None:
        summary["laplace"], summary["laplace_std_error"] = mc.estimate_laplace(ens, args.lam)
    text = json.dumps(summary)
    if args.summary:
        Path(args.summary).write_text(text + "\n")
    print(text)


def _cmd_selftest(args):
    selected = set(args.only.split(",")) if args.only else None
    results = acceptance.run(selected)
    failed = [r for r in results if not (r.passed and r.in_budget)]
    print(f"{len(results) - len(failed)}/{len(results)} checks passed")
    return 2 if failed else 0


def build_parser() -> argparse.ArgumentParser:
    parser = _Parser(prog="ddlab", description="Drawdown/drawup stopping-time analytics")
    sub = parser.add_subparsers(dest="command", required=True, parser_class=_Parser)

    p = sub.add_parser("laplace", help="E_x[exp(-lam T_D(a)); T_D(a) < T_U(b)]")
    _add_model(p), _add_levels(p), _add_numerics(p)
    p.add_argument("--lambda", dest="lam", type=float, required=True)
    p.add_argument("--numerical", action="store_true", help="use the ODE pipeline even for bm")
    p.set_defaults(func=_cmd_laplace)

    p = sub.add_parser("prob", help="P_x(T_D(a) < T_U(b))")
    _add_model(p), _add_levels(p), _add_numerics(p)
    p.set_defaults(func=_cmd_prob)

    p = sub.add_parser("density", help="density of T_D(a) on {T_D(a) < T_U(b)} over a t grid")
    _add_model(p), _add_levels(p), _add_numerics(p)
    p.add_argument("--t", required=True, help="start:stop:step or comma list")
    p.add_argument("--out", type=Path)
    p.set_defaults(func=_cmd_density)

    p = sub.add_parser("prob-horizon", help="P_x(T_D(a) <= T, T_D(a) < T_U(b))")
    _add_model(p), _add_numerics(p)
    p.add_argument("--a", type=float)
    p.add_argument("--b", type=float)
    p.add_argument("--alpha", type=float, help="relative drop (gbm; physical drift mu - sigma^2/2)")
    p.add_argument("--beta", type=float, help="relative rise (gbm)")
    p.add_argument("--T", type=float, required=True)
    p.set_defaults(func=_cmd_prob_horizon)

    p = sub.add_parser("price", help="digital option on a relative drawdown preceding a relative drawup")
    p.add_argument("--alpha", type=float, required=True)
    p.add_argument("--beta", type=float, required=True)
    p.add_argument("--r", type=float, required=True)
    p.add_argument("--sigma", type=float, required=True)
    p.add_argument("--T", type=float)
    p.add_argument("--perpetual", action="store_true")
    _add_numerics(p)
    p.set_defaults(func=_cmd_price)

    p = sub.add_parser("misid", help="misidentification probability of a transient signal")
    _add_model(p), _add_levels(p), _add_numerics(p)
    p.add_argument("--rate", type=float, help="exponential signal life rate")
    p.add_argument("--life", type=float, help="fixed signal life (bm only)")
    p.add_argument("--start-density", type=Path, help="CSV y,f of the state at the change point")
    p.set_defaults(func=_cmd_misid)

    p = sub.add_parser("simulate", help="Monte Carlo ensemble")
    _add_model(p), _add_levels(p)
    p.add_argument("--paths", type=int, default=100_000)
    p.add_argument("--dt", type=float)
    p.add_argument("--horizon", type=float)
    p.add_argument("--seed", type=int, default=42)
    p.add_argument("--scheme", default="auto", choices=["auto", "exact-bm", "euler"])
    p.add_argument("--stop", default="both", choices=["both", "first"])
    p.add_argument("--kill-rate", type=float, default=0.0)
    p.add_argument("--workers", type=int, default=1)
    p.add_argument("--lambda", dest="lam", type=float, help="also estimate the Laplace transform")
    p.add_argument("--out", type=Path, help="ensemble CSV")
    p.add_argument("--summary", type=Path, help="summary JSON")
    p.set_defaults(func=_cmd_simulate)

    p = sub.add_parser("selftest", help="run the acceptance checks")
    p.add_argument("--only", help="comma-separated criterion numbers")
    p.set_defaults(func=_cmd_selftest)
    return parser


def main(argv=None) -> int:
    try:
        args = build_parser().parse_args(argv)
        return args.func(args) or 0
    except ValidationError as exc:
        print(f"{type(exc).__name__}: {exc}", file=sys.stderr)
        return 1
    except NumericalError as exc:
        print(f"{type(exc).__name__}: {exc}", file=sys.stderr)
        return 2


if __name__ == "__main__":
    sys.exit(main())
