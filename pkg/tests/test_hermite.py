import math

import numpy as np
import pytest
from numpy.polynomial.hermite import hermgauss
from scipy import integrate, special

from wickchaos.hermite import (PI_QUARTER, brownian_coeff, hermite_fn, hermite_fns, hermite_poly,
                               white_noise_coeff)


def direct_hermite_fn(n, x):
    # closed form with explicit factorial, fine for small n
    h = special.eval_hermitenorm(n - 1, math.sqrt(2) * x)
    return (math.factorial(n - 1) * math.sqrt(math.pi)) ** -0.5 * np.exp(-x ** 2 / 2) * h


def test_hermite_poly_examples():
    x = np.linspace(-3, 3, 7)
    assert np.all(hermite_poly(0, x) == 1)
    assert np.allclose(hermite_poly(2, x), x ** 2 - 1, rtol=0, atol=1e-14)
    assert float(hermite_poly(3, 2.0)) == 2.0
    for n in range(12):
        assert np.allclose(hermite_poly(n, x), special.eval_hermitenorm(n, x), rtol=1e-12)


def test_hermite_poly_recurrence():
    x = np.linspace(-2, 2, 9)
    for n in range(1, 10):
        assert np.allclose(hermite_poly(n + 1, x), x * hermite_poly(n, x) - n * hermite_poly(n - 1, x))


def test_hermite_fn_first():
    x = np.linspace(-4, 4, 17)
    assert np.allclose(hermite_fn(1, x), math.pi ** -0.25 * np.exp(-x ** 2 / 2), rtol=1e-14)
    assert float(hermite_fn(1, 0.0)) == pytest.approx(0.7511255444649425, abs=1e-12)
    with pytest.raises(ValueError):
        hermite_fn(0, 0.0)


def test_hermite_fn_matches_direct_formula():
    x = np.linspace(-5, 5, 41)
    for n in range(1, 13):
        d = direct_hermite_fn(n, x)
        assert np.allclose(hermite_fn(n, x), d, rtol=1e-10, atol=1e-14)


def test_hermite_fn_normalised_by_quadrature():
    val, _ = integrate.quad(lambda s: float(hermite_fn(2, s)) ** 2, -np.inf, np.inf, epsabs=1e-12)
    assert val == pytest.approx(1.0, abs=1e-10)


def test_gram_matrix():
    x, w = hermgauss(80)
    rows = hermite_fns(20, x) * np.exp(x ** 2 / 2)
    gram = (rows * w) @ rows.T
    assert np.max(np.abs(gram - np.eye(20))) < 1e-8


def test_hermite_fns_rows_agree():
    x = np.linspace(-3, 3, 11)
    rows = hermite_fns(15, x)
    for n in range(1, 16):
        assert np.allclose(rows[n - 1], hermite_fn(n, x), rtol=0, atol=1e-15)


def test_high_order_stays_finite():
    x = np.linspace(-20, 20, 401)
    assert np.all(np.isfinite(hermite_fn(200, x)))


def test_brownian_coeff_examples():
    assert brownian_coeff(3, 0.0) == 0.0
    closed = PI_QUARTER * math.sqrt(math.pi / 2) * math.erf(1 / math.sqrt(2))
    assert brownian_coeff(1, 1.0) == pytest.approx(closed, abs=1e-10)
    assert closed == pytest.approx(0.642681, abs=1e-6)
    # xi_2 is odd: the full-line integral vanishes while the half-line one is sqrt(2) pi^(-1/4)
    assert brownian_coeff(2, np.inf) == pytest.approx(math.sqrt(2) * PI_QUARTER, abs=1e-10)
    full, _ = integrate.quad(lambda s: float(hermite_fn(2, s)), -np.inf, np.inf)
    assert abs(full) < 1e-10
    with pytest.raises(ValueError):
        brownian_coeff(1, -1.0)


def test_white_noise_coeff():
    assert white_noise_coeff(1, 0.0) == pytest.approx(math.pi ** -0.25)
    assert float(white_noise_coeff(2, 0.0)) == 0.0


@pytest.mark.parametrize("k", [1, 2, 3, 5])
def test_brownian_white_noise_duality(k):
    h = 1e-4
    for t in np.linspace(h, 5, 11):
        fd = (brownian_coeff(k, t + h) - brownian_coeff(k, t - h)) / (2 * h)
        assert fd == pytest.approx(float(white_noise_coeff(k, t)), abs=1e-6)
