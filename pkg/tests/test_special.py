import math

import mpmath
import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from nfris.special import (SWITCH_POINT, BesselOrder, DomainError, _asymptotic, _series_j,
                           _series_y, bessel_j, bessel_y, hankel2)

mpmath.mp.dps = 30
ARGS = np.logspace(-3, 4, 200)


def _ref(kind, n, x):
    f = mpmath.besselj if kind == "j" else mpmath.bessely
    return float(f(n, mpmath.mpf(float(x))))


@pytest.mark.parametrize("order", [0, 1])
def test_bessel_j_matches_mpmath(order):
    got = bessel_j(order, ARGS)
    ref = np.array([_ref("j", order, x) for x in ARGS])
    assert np.max(np.abs(got - ref)) < 1e-8


@pytest.mark.parametrize("order", [0, 1])
def test_bessel_y_matches_mpmath(order):
    got = bessel_y(order, ARGS)
    ref = np.array([_ref("y", order, x) for x in ARGS])
    # Y1 grows like 2/(pi x) near the origin; compare relative there
    err = np.abs(got - ref) / np.maximum(1.0, np.abs(ref))
    assert np.max(err) < 1e-8


def test_known_values():
    assert bessel_j(0, 0.0) == 1.0
    assert bessel_j(1, 0.0) == 0.0
    assert bessel_j(0, 1.0) == pytest.approx(0.76519768655796655, abs=1e-12)
    assert bessel_y(0, 1.0) == pytest.approx(0.08825696421567696, abs=1e-12)
    assert bessel_y(1, 1.0) == pytest.approx(-0.78121282130028872, abs=1e-12)
    h = hankel2(0, 1.0)
    assert h.real == pytest.approx(0.76519769, abs=1e-8)
    assert h.imag == pytest.approx(-0.08825696, abs=1e-8)


def test_hankel_large_argument_asymptote():
    x = 500.0
    h = hankel2(0, x)
    assert abs(h) == pytest.approx(math.sqrt(2 / (math.pi * x)), rel=1e-4)
    expected = complex(math.cos(x - math.pi / 4), -math.sin(x - math.pi / 4))
    assert abs(h / abs(h) - expected) < 1e-3


def test_hankel_parts_are_exact_composition():
    xs = np.linspace(0.3, 900, 257)
    for n in (0, 1):
        h = hankel2(n, xs)
        assert np.array_equal(h.real, bessel_j(n, xs))
        assert np.array_equal(h.imag, -bessel_y(n, xs))


def test_wronskian():
    x = np.logspace(-1, 3, 400)
    w = bessel_j(1, x) * bessel_y(0, x) - bessel_j(0, x) * bessel_y(1, x)
    assert np.max(np.abs(w - 2 / (np.pi * x))) < 1e-9


@settings(max_examples=200, deadline=None)
@given(st.floats(min_value=1e-2, max_value=15.0))
def test_derivative_relation(x):
    # with a relative step the difference quotient's own truncation error
    # passes 1e-7 near x = 20, so larger x says nothing about J0 or J1
    h = 1e-4 * max(1.0, x)
    deriv = (bessel_j(0, x + h) - bessel_j(0, x - h)) / (2 * h)
    assert abs(deriv + bessel_j(1, x)) < 1e-7


@pytest.mark.parametrize("order", [0, 1])
def test_branches_agree_at_switch(order):
    x = np.array([SWITCH_POINT])
    j_a, y_a = _asymptotic(order, x)
    assert abs(_series_j(order, x)[0] - j_a[0]) < 1e-8
    assert abs(_series_y(order, x)[0] - y_a[0]) < 1e-8


def test_array_shape_preserved():
    x = np.linspace(1, 20, 12).reshape(3, 4)
    assert bessel_j(0, x).shape == (3, 4)
    assert hankel2(1, x).shape == (3, 4)


@pytest.mark.parametrize("bad", [math.nan, math.inf, -math.inf])
def test_non_finite_rejected(bad):
    with pytest.raises(DomainError):
        bessel_j(0, bad)
    with pytest.raises(DomainError):
        bessel_y(0, bad)


def test_domain_errors():
    with pytest.raises(DomainError):
        bessel_j(0, -1.0)
    with pytest.raises(DomainError):
        bessel_y(0, 0.0)
    with pytest.raises(DomainError):
        hankel2(1, 0.0)
    with pytest.raises(DomainError):
        bessel_j(2, 1.0)


def test_y_near_origin_overflows_cleanly():
    with pytest.raises(OverflowError):
        bessel_y(1, 1e-320)


def test_order_enum():
    assert BesselOrder(0) == 0 and BesselOrder(1) == 1
    with pytest.raises(ValueError):
        BesselOrder(2)
    assert issubclass(DomainError, ValueError)
