import math

import numpy as np
import pytest
from scipy.special import digamma

from cbbre.model import InvalidParameterError, ModelParams, derive
from cbbre.specialfn import exp_integral_e1, kummer_u
from cbbre.yaglom import (csbp_no_env_conditioned_lt, csbp_no_env_lt, csbp_no_env_survival,
                          csbp_no_env_yaglom, kummer_arguments, survival_asymptotic_constant,
                          survival_log_scale, yaglom_curve, yaglom_lt, yaglom_lt_regime)

WEAK = derive(ModelParams(0.0, 1.0, 1.0, 1.0))
INTER = derive(ModelParams(-0.5, 1.0, 1.0, 1.0))
STRONG = derive(ModelParams(-1.5, 1.0, 1.0, 1.0))
NOENV = ModelParams(-1.0, 0.0, 1.0, 1.0)


def test_intermediate_half():
    ref = 1.0 - math.e * exp_integral_e1(1.0)
    assert yaglom_lt(INTER, 0.5) == pytest.approx(ref, rel=1e-10)
    assert yaglom_lt(INTER, 0.5) == pytest.approx(0.403653, abs=1e-6)
    assert yaglom_lt_regime(INTER, 0.5) == pytest.approx(ref, rel=1e-10)


def test_regime_forms_by_hand():
    assert yaglom_lt_regime(WEAK, 1.0) == pytest.approx(1 - math.sqrt(2) * kummer_u(0.5, 1.0, 2.0), rel=1e-10)
    assert yaglom_lt_regime(STRONG, 1.0) == pytest.approx(1 - 8 * kummer_u(3.0, 3.0, 2.0), rel=1e-10)
    assert yaglom_lt(WEAK, 1.0) == pytest.approx(yaglom_lt_regime(WEAK, 1.0), rel=1e-9)
    assert yaglom_lt(STRONG, 1.0) == pytest.approx(yaglom_lt_regime(STRONG, 1.0), rel=1e-9)


def test_kummer_arguments():
    assert kummer_arguments(WEAK) == pytest.approx((0.5, 1.0))
    assert kummer_arguments(INTER) == pytest.approx((1.0, 1.0))
    assert kummer_arguments(STRONG) == pytest.approx((3.0, 3.0))


@pytest.mark.parametrize("beta", [0.5, 1.0])
@pytest.mark.parametrize("ratio", [-0.25, -1.0, -2.0])
@pytest.mark.parametrize("lam", [0.1, 0.5, 1.0, 2.0, 10.0])
def test_unified_equals_regime(beta, ratio, lam):
    d = derive(ModelParams(ratio + 0.5, 1.0, 1.0, beta))
    u, r = yaglom_lt(d, lam), yaglom_lt_regime(d, lam)
    assert abs(u - r) <= 1e-9 * abs(r)


@pytest.mark.parametrize("d", [INTER, STRONG], ids=["intermediate", "strong"])
def test_small_lambda_limit(d):
    assert yaglom_lt(d, 1e-6) >= 0.99


def test_small_lambda_weak_log_power_law():
    # With b = 1 the Kummer function has a logarithmic singularity, so
    # 1 - L ~ r^(1/2) (-ln r - digamma(1/2) - 2 euler) / Gamma(1/2) with r = 2 lam.
    for lam in (1e-10, 1e-8):
        r = WEAK.gamma * lam / 2
        approx = math.sqrt(r) * (-math.log(r) - digamma(0.5) - 2 * np.euler_gamma) / math.sqrt(math.pi)
        assert 1 - yaglom_lt(WEAK, lam) == pytest.approx(approx, rel=1e-3)
    # the 0.99 threshold is reached only far below lam = 1e-6
    assert yaglom_lt(WEAK, 1e-6) == pytest.approx(0.98888, abs=1e-5)
    assert yaglom_lt(WEAK, 1e-10) >= 0.99


@pytest.mark.parametrize("d", [WEAK, INTER, STRONG], ids=["weak", "intermediate", "strong"])
def test_large_lambda_limit_and_monotone(d):
    assert yaglom_lt(d, 1e6) <= 0.01
    curve = yaglom_curve(d, list(np.geomspace(1e-3, 1e3, 25)), check=True)
    assert curve.is_monotone()
    assert all(0 < v < 1 for v in curve.values)
    assert curve.max_deviation <= 1e-9


def test_rejects_non_subcritical():
    with pytest.raises(InvalidParameterError):
        yaglom_lt(derive(ModelParams(0.5, 1.0, 1.0, 1.0)), 1.0)
    with pytest.raises(InvalidParameterError):
        yaglom_lt(WEAK, 0.0)


def test_survival_constants():
    assert survival_asymptotic_constant(INTER, 1.0) == pytest.approx(math.sqrt(2) / (2 * math.sqrt(math.pi)), rel=1e-12)
    assert survival_asymptotic_constant(STRONG, 1.0) == pytest.approx(1.0, rel=1e-12)
    assert survival_asymptotic_constant(STRONG, 2.0) == pytest.approx(2.0, rel=1e-12)
    assert survival_asymptotic_constant(INTER, 3.0) == pytest.approx(3 * survival_asymptotic_constant(INTER, 1.0))


def test_survival_log_scale():
    t = 10.0
    # log of the decay factor that the survival constants normalise away
    assert survival_log_scale(STRONG, t) == pytest.approx((STRONG.m + 0.5) * t)
    assert survival_log_scale(INTER, t) == pytest.approx(-0.5 * math.log(t) - 0.5 * t)
    assert survival_log_scale(WEAK, t) == pytest.approx(-1.5 * math.log(t) - WEAK.m ** 2 * t / 2)


def test_no_env_lt():
    assert csbp_no_env_lt(1.0, 1.0, 1.0, NOENV) == pytest.approx(math.exp(-1 / (2 * math.e - 1)), rel=1e-12)
    assert csbp_no_env_lt(2.0, 3.0, 1e-8, NOENV) == pytest.approx(math.exp(-6.0), abs=1e-6)
    big = csbp_no_env_lt(1.0, 1e8, 1.0, NOENV)
    assert big == pytest.approx(math.exp(-1.0 / (math.e - 1.0)), rel=1e-6)
    assert csbp_no_env_lt(2.0, 1.0, 1.0, NOENV) < csbp_no_env_lt(1.0, 1.0, 1.0, NOENV)


def test_no_env_yaglom():
    assert csbp_no_env_yaglom(1.0, NOENV) == pytest.approx(0.5, rel=1e-14)
    assert csbp_no_env_yaglom(1e6, NOENV) <= 1e-5
    for lam in (0.3, 1.0, 4.0):
        assert csbp_no_env_conditioned_lt(1.0, lam, 50.0, NOENV) == pytest.approx(
            csbp_no_env_yaglom(lam, NOENV), abs=1e-6)
        via_ratio = 1 - (1 - csbp_no_env_lt(1.0, lam, 10.0, NOENV)) / csbp_no_env_survival(1.0, 10.0, NOENV)
        assert csbp_no_env_conditioned_lt(1.0, lam, 10.0, NOENV) == pytest.approx(via_ratio, rel=1e-8)


def test_no_env_rejections():
    with pytest.raises(InvalidParameterError):
        csbp_no_env_yaglom(1.0, ModelParams(-1.0, 1.0, 1.0, 1.0))
    with pytest.raises(InvalidParameterError):
        csbp_no_env_yaglom(1.0, ModelParams(1.0, 0.0, 1.0, 1.0))
