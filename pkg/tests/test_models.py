import math

import numpy as np
import pytest

from ddlab import ValidationError, bm, cir, gbm, gbm_log, ou, read_table_csv, reflect, tabulated
from ddlab.models import StateInterval, from_name

GRID = np.linspace(-1.5, 1.5, 31)


def test_catalog_coefficients():
    m, s = ou(1.5, 0.2, 0.8).coefficients(GRID)
    np.testing.assert_allclose(m, 1.5 * (0.2 - GRID))
    np.testing.assert_allclose(s, 0.8)
    m, s = gbm(0.05, 0.3).coefficients(np.array([2.0]))
    assert m[0] == pytest.approx(0.1) and s[0] == pytest.approx(0.6)
    m, s = cir(2.0, 1.0, 0.5).coefficients(np.array([4.0]))
    assert m[0] == pytest.approx(-6.0) and s[0] == pytest.approx(1.0)


def test_gbm_log_drift():
    m = gbm_log(0.1, 0.4)
    assert m.params["mu"] == pytest.approx(0.1 - 0.08)
    assert m.params["sigma"] == 0.4


def test_reflect_bm_flips_drift():
    r = reflect(bm(0.7, 1.3), 0.4)
    assert r.kind == "bm" and r.params["mu"] == -0.7 and r.params["sigma"] == 1.3


def test_reflect_ou_drift():
    r = reflect(ou(1.2, 0.3, 1.0), 0.0)
    np.testing.assert_allclose(r.drift(GRID), -1.2 * (0.3 + GRID))


@pytest.mark.parametrize("model,x", [
    (bm(0.3, 1.1), 0.2),
    (ou(1.5, 0.2, 0.8), -0.3),
    (gbm(0.05, 0.3), 1.0),
    (cir(2.0, 1.0, 0.5), 1.0),
    (tabulated(GRID, np.sin(GRID), 1 + 0.1 * GRID**2), 0.1),
])
def test_reflect_is_involution(model, x):
    back = reflect(reflect(model, x), x)
    iv = model.interval
    u = np.linspace(max(iv.lo, x - 0.5) + 1e-3, min(iv.hi, x + 0.5) - 1e-3, 17)
    for f, g in zip(model.coefficients(u), back.coefficients(u)):
        np.testing.assert_allclose(g, f, rtol=1e-13, atol=1e-14)
    assert back.interval == model.interval


def test_reflect_mirrors_coefficients():
    m = gbm(0.05, 0.3)
    r = reflect(m, 1.0)
    u = np.linspace(0.5, 1.5, 11)
    np.testing.assert_allclose(r.drift(u), -m.drift(2.0 - u))
    np.testing.assert_allclose(r.vol(u), m.vol(2.0 - u))
    assert r.interval == StateInterval(-math.inf, 2.0)


def test_table_csv(tmp_path):
    p = tmp_path / "m.csv"
    p.write_text("u,mu,sigma\n-1,0.1,1\n0,0,1.2\n1,-0.1,1\n")
    m = read_table_csv(p)
    assert m.interval == StateInterval(-1.0, 1.0)
    assert m.vol(0.5) == pytest.approx(1.1)


@pytest.mark.parametrize("text", [
    "u,mu\n0,1\n",
    "u,mu,sigma\n0,0,1\n0,0,1\n",
    "u,mu,sigma\n0,0,1\n1,0,-1\n",
    "u,mu,sigma\n0,0,1\n1,x,1\n",
    "u,mu,sigma\n0,0,1\n1,nan,1\n",
    "u,mu,sigma\n",
])
def test_table_csv_rejects(tmp_path, text):
    p = tmp_path / "bad.csv"
    p.write_text(text)
    with pytest.raises(ValidationError):
        read_table_csv(p)


def test_validation():
    with pytest.raises(ValidationError):
        bm(0.0, 0.0)
    with pytest.raises(ValidationError):
        from_name("ou", kappa=1.0, sigma=1.0)
    with pytest.raises(ValidationError):
        from_name("levy")
    with pytest.raises(ValidationError):
        reflect(gbm(0.1, 0.2), -1.0)
    with pytest.raises(ValidationError):
        tabulated(GRID, GRID, GRID).coefficients(0.0)
    with pytest.raises(ValidationError):
        tabulated(GRID, 0 * GRID, 1 + 0 * GRID).coefficients(5.0)
