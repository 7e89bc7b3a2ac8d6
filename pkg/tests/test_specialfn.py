import math

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st
import mpmath
from scipy import special as sp

from cbbre.specialfn import (SpecialFnConfig, SpecialFunctionError, bessel_k0, bessel_k0_integral,
                             exp_integral_e1, gamma_fn, kummer_u, kummer_u_scaled, lgamma,
                             log_kummer_u)


def test_gamma_values():
    assert gamma_fn(5.0) == pytest.approx(24.0, rel=1e-14)
    assert gamma_fn(0.5) == pytest.approx(math.sqrt(math.pi), rel=1e-14)
    assert gamma_fn(4.7) == pytest.approx(3.7 * gamma_fn(3.7), rel=1e-12)
    assert lgamma(10.0) == pytest.approx(math.log(362880.0), rel=1e-14)


@pytest.mark.parametrize("x", [0.0, -1.0])
def test_gamma_domain(x):
    with pytest.raises(SpecialFunctionError):
        gamma_fn(x)


def test_gamma_recursion_grid():
    for x in np.geomspace(0.1, 50.0, 40):
        assert gamma_fn(x + 1) == pytest.approx(x * gamma_fn(x), rel=1e-9)


@pytest.mark.parametrize("a", [0.01, 0.1, 1.0, 5.0, 20.0])
def test_k0_representations(a):
    ref = sp.k0(a)
    for rep in (1, 2):
        assert bessel_k0_integral(a, rep) == pytest.approx(ref, rel=1e-8)
    assert bessel_k0(a) == pytest.approx(bessel_k0_integral(a, 2), rel=1e-8)


def test_k0_bounds():
    assert bessel_k0(10.0) < math.exp(-10.0)
    small = bessel_k0_integral(1e-3, 2)
    assert small > 5.0
    assert small == pytest.approx(-math.log(5e-4) - 0.5772156649015329, rel=1e-5)
    grid = np.linspace(0.05, 8, 50)
    assert np.all(np.diff(bessel_k0(grid)) < 0)


def test_k0_domain():
    with pytest.raises(SpecialFunctionError):
        bessel_k0(0.0)
    with pytest.raises(SpecialFunctionError):
        bessel_k0_integral(-1.0)


def test_kummer_examples():
    assert kummer_u(2.0, 3.0, 1.5) == pytest.approx(1.5 ** -2, rel=1e-12)
    # independent quadrature oracle for E1
    assert kummer_u(1.0, 1.0, 1.0) == pytest.approx(math.e * exp_integral_e1(1.0), rel=1e-11)
    assert kummer_u(1.0, 1.0, 1.0) == pytest.approx(0.596347362323194, rel=1e-12)
    assert kummer_u_scaled(0.7, 0.3, 1e4) == pytest.approx(1.0, rel=1e-2)


@pytest.mark.parametrize("a", [0.5, 1.0, 2.0, 4.0])
@pytest.mark.parametrize("r", [0.1, 1.0, 10.0])
def test_kummer_b_equals_a_plus_one(a, r):
    assert kummer_u(a, a + 1, r) == pytest.approx(r ** -a, rel=1e-9)


@given(a=st.floats(0.05, 8.0), b=st.floats(-4.0, 6.0), r=st.floats(0.01, 50.0))
@settings(max_examples=60, deadline=None)
def test_kummer_matches_mpmath(a, b, r):
    ref = float(mpmath.hyperu(a, b, r))
    assert kummer_u(a, b, r) == pytest.approx(ref, rel=1e-9)


def test_kummer_log_form_and_monotone():
    assert log_kummer_u(3.0, 3.0, 2.0) == pytest.approx(math.log(kummer_u(3.0, 3.0, 2.0)), rel=1e-13)
    vals = [kummer_u(0.5, 1.0, r) for r in np.geomspace(0.01, 100, 25)]
    assert all(v > 0 for v in vals)
    assert all(b < a for a, b in zip(vals, vals[1:]))


@pytest.mark.parametrize("a, b, r", [(0.0, 1.0, 1.0), (1.0, 1.0, 0.0), (1.0, float("inf"), 1.0)])
def test_kummer_domain(a, b, r):
    with pytest.raises(SpecialFunctionError):
        kummer_u(a, b, r)


def test_e1():
    assert exp_integral_e1(1.0) == pytest.approx(0.219383934395520, rel=1e-11)
    assert exp_integral_e1(1.0) == pytest.approx(sp.exp1(1.0), rel=1e-12)
    x = 100.0
    assert x * math.exp(x) * exp_integral_e1(x) == pytest.approx(1.0, rel=2e-2)
    # classical sandwich 0.5 e^-x ln(1 + 2/x) < E1(x) < e^-x ln(1 + 1/x)
    x = 0.5
    assert 0.5 * math.exp(-x) * math.log(1 + 2 / x) < exp_integral_e1(x) < math.exp(-x) * math.log(1 + 1 / x)
    with pytest.raises(SpecialFunctionError):
        exp_integral_e1(0.0)


def test_config_validation():
    with pytest.raises(ValueError):
        SpecialFnConfig(rel_tol=0.1)
    with pytest.raises(ValueError):
        SpecialFnConfig(max_evals=10)
    loose = SpecialFnConfig(rel_tol=1e-6)
    assert kummer_u(2.0, 3.0, 1.5, loose) == pytest.approx(1.5 ** -2, rel=1e-6)
