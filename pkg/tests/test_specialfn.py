import math

import numpy as np
import pytest
from numpy.testing import assert_allclose

from deltaspec.errors import ConvergenceError, DomainError
from deltaspec.specialfn import (QuadratureSpec, bessel_closed_forms, bessel_estimate_integrals, bessel_k,
                                 bessel_product_integral, double_integral_su, expm1_difference, laplace_integral,
                                 refine, semi_infinite_rule, sn)


def test_semi_infinite_rule_moments():
    rule = semi_infinite_rule(32)
    assert_allclose(np.sum(rule.weights), 1.0, rtol=1e-12)
    assert_allclose(np.sum(rule.weights * rule.nodes ** 2), 2.0, rtol=1e-12)
    assert_allclose(np.sum(rule.plain_weights * np.exp(-2 * rule.nodes)), 0.5, rtol=1e-10)


def test_semi_infinite_rule_is_cached():
    assert semi_infinite_rule(32) is semi_infinite_rule(32)
    with pytest.raises(ValueError):
        semi_infinite_rule(32).nodes[0] = 1.0


def test_laplace_integral_constant():
    assert_allclose(laplace_integral(np.ones_like, 2.5), 0.4, rtol=1e-12)


def test_laplace_integral_inverse_square_root():
    # int exp(-p t) t^-1/2 dt = sqrt(pi/p)
    value = laplace_integral(lambda t: t ** -0.5, 3.0)
    assert_allclose(value, math.sqrt(math.pi / 3.0), rtol=1e-10)


def test_laplace_integral_vector_valued():
    powers = np.array([0.0, 1.0, 2.0])
    values = laplace_integral(lambda t: t[:, None] ** powers[None, :], 2.0)
    assert_allclose(values, [0.5, 0.25, 0.25], rtol=1e-10)


def test_laplace_integral_rejects_nonpositive_rate():
    with pytest.raises(DomainError):
        laplace_integral(np.ones_like, 0.0)


def test_refine_reports_failure():
    with pytest.raises(ConvergenceError) as failure:
        refine(lambda count: np.array(float(count)), QuadratureSpec(), "diverging test")
    assert "diverging test" in str(failure.value)


@pytest.mark.parametrize("tolerance", [0.0, 1e-2])
def test_quadrature_spec_tolerance_range(tolerance):
    with pytest.raises(DomainError):
        QuadratureSpec(relative_tolerance=tolerance)


def test_quadrature_spec_with_tolerance():
    spec = QuadratureSpec().with_tolerance(1e-8)
    assert spec.relative_tolerance == 1e-8
    assert spec.node_count == QuadratureSpec().node_count


def test_double_integral_gaussian_weight():
    value = double_integral_su(lambda s, u: np.ones_like(s) * np.ones_like(u), u_decay_rate=2.0)
    assert_allclose(value, math.sqrt(math.pi) / 2.0, rtol=1e-9)


def test_bessel_k_half_order():
    x = np.array([0.1, 1.0, 5.0])
    assert_allclose(bessel_k(0.5, x), np.sqrt(np.pi / (2 * x)) * np.exp(-x), rtol=1e-13)


def test_bessel_k_zero_order_reference():
    assert_allclose(bessel_k(0, 1.0), 0.42102443824, rtol=1e-10)


def test_bessel_k_large_argument_underflows():
    assert bessel_k(0.0, 2000.0) == 0.0


@pytest.mark.parametrize("order, argument", [(2.0, 1.0), (0.0, 0.0), (1.0, -1.0)])
def test_bessel_k_domain(order, argument):
    with pytest.raises(DomainError):
        bessel_k(order, argument)


def test_sn_flat_and_curved():
    assert sn(0.0, 1.5) == 1.5
    assert_allclose(sn(1.0, math.pi / 2), 1.0, rtol=1e-14)
    assert_allclose(sn(-4.0, 1.0), math.sinh(2.0) / 2, rtol=1e-14)


def test_sn_continuous_at_zero_curvature():
    assert_allclose(sn(1e-9, 1.0), sn(-1e-9, 1.0), rtol=1e-9)
    assert_allclose(sn(1e-9, 1.0), 1.0, rtol=1e-9)


def test_sn_domain():
    with pytest.raises(DomainError):
        sn(1.0, 4.0)
    with pytest.raises(DomainError):
        sn(0.0, -1.0)


@pytest.mark.parametrize("dimension", [2, 3])
def test_bessel_integrals_match_closed_forms(dimension):
    closed = bessel_closed_forms(1.3, dimension)
    for name, (power, mu, nu) in bessel_estimate_integrals(1.3, dimension).items():
        assert_allclose(bessel_product_integral(power, mu, nu, 1.3), closed[name], rtol=1e-8, err_msg=name)


def test_bessel_closed_form_k1_squared():
    # int r^3 K1(r)^2 dr = 2/3
    assert_allclose(bessel_closed_forms(1.0, 2)["r^(D+1) K1^2"], 2 / 3, rtol=1e-14)


def test_expm1_difference_small_gap():
    a, t = 2.0, 0.7
    b = a + 1e-12
    gap = (b - a) * t
    expected = math.exp(-a * t) * gap * (1 - gap / 2)
    assert_allclose(expm1_difference(a, b, t), expected, rtol=1e-9)
    assert_allclose(expm1_difference(1.0, 3.0, 0.5), math.exp(-0.5) - math.exp(-1.5), rtol=1e-14)
