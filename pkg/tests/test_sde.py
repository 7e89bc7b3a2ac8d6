import math

import numpy as np
import pytest
from scipy import integrate

from cbbre.model import InvalidParameterError, ModelParams, derive
from cbbre.montecarlo import PathConfig, duality_lt
from cbbre.sde import (RateExplosionError, SdeConfig, dt_halving_gap, estimate_lt_sde, estimate_mean_sde,
                       jump_compensator, jump_rate, simulate_bdre, simulate_stable_cbbre, simulate_terminal,
                       small_jump_variance)

STABLE = ModelParams(0.0, 1.0, 1.0, 0.5)


def levy_density(z, c, beta):
    return c * beta * (beta + 1) / (math.gamma(1 - beta) * z ** (2 + beta))


class TestJumpConstants:
    @pytest.mark.parametrize("beta", [0.3, 0.5, 0.8])
    def test_against_quadrature(self, beta):
        c, eps = 1.3, 0.05
        assert jump_rate(c, beta, eps) == pytest.approx(
            integrate.quad(lambda z: levy_density(z, c, beta), eps, np.inf)[0], rel=1e-8)
        assert jump_compensator(c, beta, eps) == pytest.approx(
            integrate.quad(lambda z: z * levy_density(z, c, beta), eps, np.inf)[0], rel=1e-8)
        assert small_jump_variance(c, beta, eps) == pytest.approx(
            integrate.quad(lambda z: z * z * levy_density(z, c, beta), 0, eps)[0], rel=1e-8)


class TestConfig:
    def test_validation(self):
        with pytest.raises(InvalidParameterError):
            SdeConfig(dt=0.1)
        with pytest.raises(InvalidParameterError):
            SdeConfig(jump_cutoff=0.0)

    def test_steps(self):
        assert SdeConfig(dt=1e-3).steps(1.0) == (1000, pytest.approx(1e-3))


class TestBranchingDiffusion:
    def test_lognormal_without_branching(self):
        p = ModelParams(0.2, 0.7, 1e-8, 1.0)
        z = simulate_bdre(1.0, 1.0, p, SdeConfig(), np.random.default_rng(0), 20_000)
        logs = np.log(z)
        m = 0.2 - 0.5 * 0.49
        assert abs(logs.mean() - m) < 4 * 0.7 / math.sqrt(len(z))
        assert logs.var() == pytest.approx(0.49, rel=0.05)

    def test_mean_law(self):
        p = ModelParams(0.3, 1.0, 1.0, 1.0)
        est = estimate_mean_sde(1.0, 1.0, p, SdeConfig(), 50_000, 1)
        assert abs(est.mean - math.exp(0.3)) <= 3 * est.stderr

    def test_trivial_cases(self):
        p = ModelParams(0.0, 1.0, 1.0, 1.0)
        rng = np.random.default_rng(0)
        assert np.all(simulate_terminal(0.0, 1.0, p, SdeConfig(), rng, 10) == 0)
        assert np.all(simulate_terminal(2.0, 0.0, p, SdeConfig(), rng, 10) == 2.0)
        assert estimate_lt_sde(1.0, 0.0, 1.0, p, SdeConfig(), 100, 1).mean == 1.0

    def test_nonnegative(self):
        z = simulate_bdre(0.5, 2.0, ModelParams(-0.5, 1.0, 2.0, 1.0), SdeConfig(), np.random.default_rng(4), 5000)
        assert np.all(z >= 0)
        assert np.any(z == 0)

    def test_step_halving_below_stderr(self):
        gap = dt_halving_gap(1.0, 1.0, 1.0, ModelParams(-0.5, 1.0, 1.0, 1.0), SdeConfig(dt=1e-3), 50_000, 3)
        assert abs(gap.fine.mean - gap.coarse.mean) < gap.fine.stderr

    def test_matches_duality(self):
        p = ModelParams(0.0, 1.0, 1.0, 1.0)
        sde = estimate_lt_sde(1.0, 1.0, 1.0, p, SdeConfig(), 50_000, 5)
        dual = duality_lt(1.0, 1.0, 1.0, derive(p), PathConfig(50_000, 6))
        assert sde.z_score(dual) < 3

    def test_wrong_beta(self):
        with pytest.raises(InvalidParameterError):
            simulate_bdre(1.0, 1.0, STABLE, SdeConfig(), np.random.default_rng(0), 2)
        with pytest.raises(InvalidParameterError):
            simulate_stable_cbbre(1.0, 1.0, ModelParams(0.0, 1.0, 1.0, 1.0), SdeConfig(),
                                  np.random.default_rng(0), 2)


class TestStableJumps:
    def test_mean_law(self):
        p = ModelParams(0.3, 1.0, 1.0, 0.8)
        est = estimate_mean_sde(1.0, 1.0, p, SdeConfig(), 50_000, 2)
        assert abs(est.mean - math.exp(0.3)) <= 3 * est.stderr

    def test_matches_duality_with_small_jump_diffusion(self):
        sde = estimate_lt_sde(1.0, 1.0, 1.0, STABLE, SdeConfig(small_jump_diffusion=True), 100_000, 8)
        dual = duality_lt(1.0, 1.0, 1.0, derive(STABLE), PathConfig(100_000, 9))
        assert sde.z_score(dual) < 3

    def test_truncation_bias_shrinks(self):
        dual = duality_lt(1.0, 1.0, 1.0, derive(STABLE), PathConfig(100_000, 9)).mean
        coarse = estimate_lt_sde(1.0, 1.0, 1.0, STABLE, SdeConfig(jump_cutoff=0.05), 100_000, 10)
        fine = estimate_lt_sde(1.0, 1.0, 1.0, STABLE, SdeConfig(jump_cutoff=0.01), 100_000, 11)
        assert abs(fine.mean - dual) < abs(coarse.mean - dual)

    def test_nonnegative(self):
        z = simulate_stable_cbbre(1.0, 1.0, STABLE, SdeConfig(), np.random.default_rng(1), 5000)
        assert np.all(z >= 0)

    def test_rate_guard(self):
        cfg = SdeConfig(dt=1e-2, jump_cutoff=0.01, max_substeps=1)
        with pytest.raises(RateExplosionError):
            simulate_stable_cbbre(1e4, 0.1, STABLE, cfg, np.random.default_rng(0), 2)
