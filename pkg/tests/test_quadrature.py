import math

import pytest
from scipy.integrate import quad

from neckfield.quadrature import QuadratureError, adaptive_integral, integral_to_infinity


def test_polynomial_exact():
    val = adaptive_integral(lambda x: 3 * x * x, 0.0, 2.0)
    assert val == pytest.approx(8.0, rel=1e-13)


def test_arctan_kernel_matches_antiderivative():
    eps = 1e-6
    val = adaptive_integral(lambda x: 1.0 / (eps + x * x), 0.0, 0.5)
    exact = math.atan(0.5 / math.sqrt(eps)) / math.sqrt(eps)
    assert val == pytest.approx(exact, rel=1e-10)


def test_cross_check_against_scipy():
    f = lambda x: math.exp(-x) * math.cos(7 * x)
    ours = adaptive_integral(f, 0.0, 5.0)
    ref, _ = quad(f, 0.0, 5.0, epsabs=1e-13, epsrel=1e-13)
    assert ours == pytest.approx(ref, rel=1e-11)


def test_improper_tail():
    val = integral_to_infinity(lambda y: 1.0 / (1.0 + y * y), 0.0)
    assert val == pytest.approx(math.pi / 2.0, rel=1e-11)


def test_improper_tail_from_offset():
    val = integral_to_infinity(lambda y: 1.0 / (1.0 + y * y), 3.0)
    assert val == pytest.approx(math.pi / 2.0 - math.atan(3.0), rel=1e-11)


def test_budget_exhaustion_is_explicit():
    # an integrable singularity needs unbounded subdivision near 0
    with pytest.raises(QuadratureError):
        adaptive_integral(lambda x: x**-0.5 if x > 0 else 0.0, 0.0, 1.0, max_panels=12)


def test_reversed_interval_rejected():
    with pytest.raises(QuadratureError):
        adaptive_integral(lambda x: x, 1.0, 0.0)
