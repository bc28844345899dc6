import math

import numpy as np
import pytest

from ddlab import (BmParams, NumericsConfig, SimConfig, ValidationError, bm, bm_J0, bm_laplace_dd_larger,
                   bm_laplace_du_larger, bm_laplace_equal, estimate_frequency, estimate_laplace, gbm_log,
                   h_factor, laplace_dd_larger, laplace_dd_uncond, laplace_ddu, laplace_du_larger, laplace_equal,
                   ou, precede_probability, simulate, t_lambda)

FD = NumericsConfig(derivatives="fd")


def test_equal_levels_closed_form():
    val = laplace_equal(bm(0.5, 1.0), 0.0, 1.0, 0.5)
    assert val == pytest.approx(bm_laplace_equal(BmParams(0.5, 1.0), 1.0, 0.5), rel=1e-5)


def test_equal_levels_small_lambda_symmetry():
    assert laplace_equal(bm(0.0, 1.0), 0.0, 1.0, 1e-10) == pytest.approx(0.5, abs=1e-6)


def test_finite_difference_route_agrees():
    exact = laplace_ddu(bm(0.3, 1.2), 0.0, 1.0, 1.4, 0.7)
    assert laplace_ddu(bm(0.3, 1.2), 0.0, 1.0, 1.4, 0.7, FD) == pytest.approx(exact, rel=1e-5)
    exact = laplace_ddu(ou(1.0, 0.0, 1.0), 0.0, 0.8, 0.5, 1.0)
    assert laplace_ddu(ou(1.0, 0.0, 1.0), 0.0, 0.8, 0.5, 1.0, FD) == pytest.approx(exact, rel=1e-5)


def test_h_factor():
    assert h_factor(bm(0.0, 1.0), 1.0, 1.0, 1.0, 0.5) == 1.0
    assert h_factor(bm(0.0, 1.0), 1.0, 1.0, 0.0, 0.5) == pytest.approx(math.exp(-1 / math.tanh(1)), rel=1e-8)
    assert h_factor(bm(0.0, 1.0), 1.0, 1.0, 0.0, 0.5) == pytest.approx(0.2690, abs=5e-5)
    p = BmParams(0.5, 1.0)
    for lam in (0.2, 0.5, 2.0):
        ref = math.exp(t_lambda(p, lam, 1.0) * 0.5)
        assert h_factor(bm(0.5, 1.0), 0.3, 1.0, -0.2, lam) == pytest.approx(ref, rel=1e-5)


def test_h_factor_bounds_general():
    vals = [h_factor(ou(1.5, 0.2, 0.8), 0.4, 0.6, c, 0.7) for c in (0.4, 0.2, 0.0, -0.3)]
    assert vals[0] == 1.0
    assert all(0 < b < a for a, b in zip(vals, vals[1:]))


def test_larger_drawdown_closed_form():
    val = laplace_dd_larger(bm(0.5, 1.0), 0.0, 1.5, 1.0, 0.5)
    assert val == pytest.approx(bm_laplace_dd_larger(BmParams(0.5, 1.0), 1.5, 1.0, 0.5), rel=1e-5)


@pytest.mark.parametrize("model", [bm(0.4, 1.0), ou(1.0, 0.2, 0.9)])
def test_seams_are_continuous(model):
    eq = laplace_equal(model, 0.0, 1.0, 0.6)
    assert laplace_dd_larger(model, 0.0, 1.0, 1.0 - 1e-6, 0.6) == pytest.approx(eq, abs=1e-4)
    assert laplace_du_larger(model, 0.0, 1.0, 1.0 + 1e-6, 0.6) == pytest.approx(eq, abs=1e-4)


def test_drawdown_time_transform():
    assert laplace_dd_uncond(bm(0.0, 1.0), 0.0, 1.0, 0.5) == pytest.approx(1 / math.cosh(1), rel=1e-6)
    assert laplace_dd_uncond(bm(0.0, 1.0), 0.0, 1.0, 0.5) == pytest.approx(0.64805, abs=5e-6)
    ref = bm_J0(BmParams(0.5, 1.0), 1.0, 1.0)
    assert laplace_dd_uncond(bm(0.5, 1.0), 0.0, 1.0, 1.0) == pytest.approx(ref, rel=1e-5)
    assert laplace_dd_uncond(bm(0.0, 1.0), 0.0, 1.0, 1e-8) == pytest.approx(1.0, abs=1e-3)


def test_larger_drawup():
    ref = bm_laplace_du_larger(BmParams(-0.3, 1.0), 1.0, 1.5, 0.5)
    assert laplace_du_larger(bm(-0.3, 1.0), 0.0, 1.0, 1.5, 0.5) == pytest.approx(ref, rel=1e-5)
    far = laplace_du_larger(bm(0.5, 1.0), 0.0, 1.0, 20.0, 0.5)
    assert far == pytest.approx(laplace_dd_uncond(bm(0.5, 1.0), 0.0, 1.0, 0.5), rel=1e-6)


def test_dispatch():
    m = ou(1.0, 0.0, 1.0)
    assert laplace_ddu(m, 0.0, 0.7, 0.7, 0.4) == laplace_equal(m, 0.0, 0.7, 0.4)
    assert laplace_ddu(m, 0.0, 0.9, 0.7, 0.4) == laplace_dd_larger(m, 0.0, 0.9, 0.7, 0.4)
    assert laplace_ddu(m, 0.0, 0.7, 0.9, 0.4) == laplace_du_larger(m, 0.0, 0.7, 0.9, 0.4)


@pytest.mark.parametrize("model", [bm(0.2, 1.0), ou(1.0, 0.0, 1.0)])
def test_monotonicity(model):
    bs = [0.5, 0.8, 1.0, 1.3, 2.0]
    vals = [laplace_ddu(model, 0.0, 1.0, b, 0.5) for b in bs]
    assert all(y >= x - 1e-9 for x, y in zip(vals, vals[1:]))
    as_ = [0.5, 0.8, 1.0, 1.3, 2.0]
    vals = [laplace_ddu(model, 0.0, a, 1.0, 0.5) for a in as_]
    assert all(y <= x + 1e-9 for x, y in zip(vals, vals[1:]))
    lams = [0.05, 0.3, 1.0, 4.0]
    vals = [laplace_ddu(model, 0.0, 1.0, 1.2, lam) for lam in lams]
    assert all(y <= x + 1e-12 for x, y in zip(vals, vals[1:]))
    assert all(0 <= v <= 1 for v in vals)
    for b in bs:
        assert laplace_ddu(model, 0.0, 1.0, b, 0.5) <= laplace_dd_uncond(model, 0.0, 1.0, 0.5) + 1e-9


def test_du_larger_increases_to_uncond():
    m = ou(1.0, 0.0, 1.0)
    vals = [laplace_du_larger(m, 0.0, 0.6, b, 0.5) for b in (0.8, 1.5, 3.0, 6.0)]
    lim = laplace_dd_uncond(m, 0.0, 0.6, 0.5)
    assert all(y >= x for x, y in zip(vals, vals[1:]))
    assert vals[-1] <= lim + 1e-9 and vals[-1] == pytest.approx(lim, rel=1e-4)


def test_complex_lambda_matches_closed_form():
    lam = 0.8 + 1.5j
    p = BmParams(0.3, 1.0)
    for a, b, ref in ((1.0, 1.0, bm_laplace_equal(p, 1.0, lam)),
                      (1.4, 1.0, bm_laplace_dd_larger(p, 1.4, 1.0, lam)),
                      (1.0, 1.4, bm_laplace_du_larger(p, 1.0, 1.4, lam))):
        got = laplace_ddu(bm(0.3, 1.0), 0.0, a, b, lam)
        assert abs(got - ref) <= 1e-5 * abs(ref)


def test_precede_probability():
    assert precede_probability(bm(0.0, 1.0), 0.0, 1.0, 1.0) == pytest.approx(0.5, abs=1e-4)
    assert precede_probability(bm(0.5, 1.0), 0.0, 1.0, 1.0) < 0.5
    # oracle: the a = b drawdown-first probability from the closed form at a tiny rate
    p = BmParams(0.5, 1.0)
    ref = bm_laplace_equal(p, 1.0, 1e-12)
    assert precede_probability(bm(0.5, 1.0), 0.0, 1.0, 1.0) == pytest.approx(ref, abs=1e-8)


def test_validation():
    with pytest.raises(ValidationError):
        laplace_equal(bm(), 0.0, -1.0, 0.5)
    with pytest.raises(ValidationError):
        laplace_dd_larger(bm(), 0.0, 1.0, 1.5, 0.5)
    with pytest.raises(ValidationError):
        laplace_du_larger(bm(), 0.0, 1.5, 1.0, 0.5)
    with pytest.raises(ValidationError):
        laplace_ddu(bm(), 0.0, 1.0, 1.0, -0.5)
    with pytest.raises(ValidationError):
        NumericsConfig(quad_tol=0.0)
    with pytest.raises(ValidationError):
        NumericsConfig(max_subdiv=4)


# Monte Carlo oracles; grid bias is removed by the coarse-grid extrapolation

def test_equal_levels_ou_against_mc():
    model = ou(1.0, 0.0, 1.0)
    val = laplace_equal(model, 0.0, 0.5, 1.0)
    ens = simulate(model, 0.0, 0.5, 0.5, SimConfig(paths=20_000, seed=11, stop="first", horizon=20.0))
    est, se = estimate_laplace(ens, 1.0, extrapolate=True)
    assert abs(est - val) <= 3 * se


def test_larger_drawdown_log_gbm_against_mc():
    model = gbm_log(0.05, 0.2)
    val = laplace_dd_larger(model, 0.0, 0.2, 0.1, 0.3)
    ens = simulate(model, 0.0, 0.2, 0.1, SimConfig(paths=20_000, seed=12, stop="first"))
    est, se = estimate_laplace(ens, 0.3, extrapolate=True)
    assert abs(est - val) <= 3 * se


def test_precede_probability_against_mc():
    val = precede_probability(bm(0.5, 1.0), 0.0, 1.0, 1.0)
    ens = simulate(bm(0.5, 1.0), 0.0, 1.0, 1.0, SimConfig(paths=20_000, seed=13, stop="first"))
    est, se = estimate_frequency(ens, extrapolate=True)
    assert abs(est - val) <= 3 * se
