import csv
import math
import warnings

import numpy as np
import pytest
from scipy import stats

from ddlab import (BmParams, SimConfig, StateLeftInterval, ValidationError, bm, bm_laplace_equal, cir,
                   estimate_finite_horizon, estimate_frequency, estimate_laplace, gbm, ou, simulate,
                   verify_range_identity)
from ddlab.montecarlo import CSV_HEADER

SMALL = SimConfig(paths=3000, seed=3, stop="first")


def _same(e1, e2):
    for name in ("t_dd", "t_du", "censored_dd", "censored_du", "x_at_dd", "sup_du_before_dd", "t_range"):
        np.testing.assert_array_equal(getattr(e1, name), getattr(e2, name))


def test_deterministic_across_workers():
    cfg = SimConfig(paths=5000, seed=9, block=1000, stop="first")
    e1 = simulate(ou(1.0, 0.0, 1.0), 0.0, 0.5, 0.7, cfg)
    e2 = simulate(ou(1.0, 0.0, 1.0), 0.0, 0.5, 0.7, SimConfig(paths=5000, seed=9, block=1000, stop="first",
                                                             workers=3))
    _same(e1, e2)
    e3 = simulate(ou(1.0, 0.0, 1.0), 0.0, 0.5, 0.7, SimConfig(paths=5000, seed=10, block=1000, stop="first"))
    assert not np.array_equal(e1.t_dd, e3.t_dd)


def test_exact_scheme_marginal_is_gaussian():
    mu, sig, T = 0.3, 1.4, 1.0
    ens = simulate(bm(mu, sig), 0.0, 1e3, 1e3, SimConfig(paths=100_000, dt=0.05, horizon=T, seed=1))
    assert ens.censored_dd.all() and ens.censored_du.all()
    res = stats.kstest(ens.x_end, "norm", args=(mu * T, sig * math.sqrt(T)))
    assert res.pvalue > 0.01


def test_unreachable_levels_censor_everything():
    ens = simulate(bm(0.0, 1.0), 0.0, 50.0, 50.0, SimConfig(paths=500, horizon=1.0, dt=0.01))
    assert ens.censored_dd.all() and ens.censored_du.all()
    assert estimate_frequency(ens) == (0.0, 0.0)


def test_symmetric_frequency():
    ens = simulate(bm(0.0, 1.0), 0.0, 1.0, 1.0, SimConfig(paths=20_000, seed=4, stop="first"))
    est, se = estimate_frequency(ens)
    assert abs(est - 0.5) <= 3 * se


def test_laplace_estimate_against_closed_form():
    ens = simulate(bm(0.0, 1.0), 0.0, 1.0, 1.0, SimConfig(paths=20_000, seed=6, stop="first"))
    est, se = estimate_laplace(ens, 0.5, extrapolate=True)
    assert abs(est - bm_laplace_equal(BmParams(0.0, 1.0), 1.0, 0.5)) <= 3 * se
    big, _ = estimate_laplace(ens, 1e4)
    assert big < 1e-6


def test_finite_horizon_estimates():
    ens = simulate(bm(0.2, 1.0), 0.0, 1.0, 0.8, SMALL)
    assert estimate_finite_horizon(ens, 1e-9)[0] == 0.0
    vals = [estimate_finite_horizon(ens, T)[0] for T in (0.1, 0.5, 1.0, 2.0, 5.0, 20.0)]
    assert all(y >= x for x, y in zip(vals, vals[1:]))
    with pytest.raises(ValidationError):
        estimate_finite_horizon(ens, 2 * ens.horizon)


def test_longer_horizon_never_lowers_frequency():
    freqs = []
    for horizon in (0.5, 1.0, 2.0, 4.0):
        ens = simulate(bm(0.0, 1.0), 0.0, 1.0, 1.5, SimConfig(paths=2000, seed=8, horizon=horizon, stop="first"))
        freqs.append(estimate_frequency(ens)[0])
    assert all(y >= x for x, y in zip(freqs, freqs[1:]))


def test_both_mode_records():
    # block=1 gives every path its own substream, so the two stop modes see the same paths
    ens = simulate(bm(0.1, 1.0), 0.0, 0.6, 0.9, SimConfig(paths=500, seed=2, block=1))
    done = ~ens.censored_dd
    assert (ens.sup_du_before_dd >= 0).all()
    assert (ens.t_dd[done] <= ens.horizon).all()
    # drawups seen before the drawdown stay below the drawup level when the drawdown came first
    first = ens.dd_first
    assert (ens.sup_du_before_dd[first] <= 0.9 + 1e-12).all()
    # stop="first" reproduces the same precedence indicator path by path
    quick = simulate(bm(0.1, 1.0), 0.0, 0.6, 0.9, SimConfig(paths=500, seed=2, block=1, stop="first"))
    np.testing.assert_array_equal(first, quick.dd_first)
    np.testing.assert_array_equal(ens.t_dd[first], quick.t_dd[first])
    rec = ens.record(0)
    assert rec.t_dd == ens.t_dd[0] and len(list(ens.records())) == len(ens) == 500


def test_range_identity_small():
    for model in (bm(0.0, 1.0), bm(0.5, 1.0), ou(1.0, 0.0, 1.0)):
        ens = simulate(model, 0.0, 0.7, 0.7, SimConfig(paths=2000, seed=1, stop="first"))
        rep = verify_range_identity(ens)
        assert rep.violations == 0 and rep.checked > 0 and rep.max_gap <= ens.dt * (1 + 1e-9)
    with pytest.raises(ValidationError):
        verify_range_identity(simulate(bm(), 0.0, 0.7, 0.9, SimConfig(paths=10)))


def test_gbm_and_cir_paths():
    for model in (gbm(0.05, 0.3), cir(2.0, 1.0, 0.5)):
        # state-dependent vol: pick dt with room for the vol to double along the path
        ens = simulate(model, 1.0, 0.2, 0.2, SimConfig(paths=1000, seed=1, stop="first", dt=1e-5))
        assert (ens.x_end > 0).all()
        assert 0 < estimate_frequency(ens)[0] < 1


def test_kill_rate_censors():
    slow = simulate(bm(0.0, 1.0), 0.0, 1.0, 1.0, SimConfig(paths=4000, seed=5, stop="first"))
    killed = simulate(bm(0.0, 1.0), 0.0, 1.0, 1.0, SimConfig(paths=4000, seed=5, stop="first", kill_rate=0.5))
    assert estimate_frequency(killed)[0] < estimate_frequency(slow)[0]
    with pytest.warns(RuntimeWarning, match="exponential censoring"):
        estimate_laplace(killed, 0.5)


def test_short_horizon_warns():
    ens = simulate(bm(0.0, 1.0), 0.0, 0.5, 0.5, SimConfig(paths=100, horizon=1.0, stop="first"))
    with pytest.warns(RuntimeWarning, match="horizon too short"):
        estimate_laplace(ens, 0.5)


def test_auto_dt_obeys_resolution_rule():
    with warnings.catch_warnings():
        warnings.simplefilter("error")
        ens = simulate(ou(1.0, 0.0, 1.3), 0.2, 0.4, 0.6, SimConfig(paths=200))
    assert 1.3 * math.sqrt(ens.dt) <= 0.4 / 100 * (1 + 1e-12)
    assert ens.horizon == pytest.approx(50 * (0.6 / 1.3) ** 2)


def test_csv_dump(tmp_path):
    ens = simulate(bm(0.2, 1.0), 0.0, 0.5, 0.5, SimConfig(paths=50, seed=42, stop="first"))
    out = tmp_path / "e.csv"
    ens.to_csv(out)
    rows = list(csv.reader(out.open()))
    assert tuple(rows[0]) == CSV_HEADER
    assert len(rows) == 51
    assert [float(v) for v in rows[1][1:3]] == [ens.t_dd[0], ens.t_du[0]]


def test_validation():
    with pytest.raises(ValidationError):
        SimConfig(paths=0)
    with pytest.raises(ValidationError):
        SimConfig(scheme="milstein")
    with pytest.raises(ValidationError):
        SimConfig(seed=-1)
    with pytest.raises(ValidationError):
        simulate(bm(), 0.0, 1.0, 1.0, SimConfig(paths=10, dt=0.01))
    with pytest.raises(ValidationError):
        simulate(ou(1.0, 0.0, 1.0), 0.0, 1.0, 1.0, SimConfig(paths=10, scheme="exact-bm"))
    with pytest.raises(ValidationError):
        simulate(gbm(0.1, 0.2), -1.0, 1.0, 1.0, SimConfig(paths=10))
    with pytest.raises(ValidationError):
        estimate_laplace(simulate(bm(), 0.0, 0.5, 0.5, SimConfig(paths=10)), 0.0)


def test_state_leaving_interval():
    # Euler steps on CIR close to zero can jump below the boundary
    model = cir(0.1, 0.01, 2.0)
    with pytest.raises(StateLeftInterval):
        simulate(model, 0.02, 5.0, 5.0, SimConfig(paths=2000, seed=1, dt=1e-3, horizon=5.0))
