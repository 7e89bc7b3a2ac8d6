"""Direct simulation of the branching SDEs in a Brownian environment.

Two schemes, both absorbing at zero:

* ``beta = 1``: ``dZ = alpha Z dt + sigma Z dB^e + sqrt(2 c Z) dB^b``.  The
  linear part is advanced with the exact geometric factor
  ``exp(m dt + sigma dB^e)``; the branching noise uses an Euler step with
  full truncation (a non-positive proposal is absorbed).
* ``beta < 1``: the compensated jump integral with Levy density
  ``c beta (beta+1) / (Gamma(1-beta) z^(2+beta))`` per unit mass.  Jumps
  larger than ``eps`` are drawn per step from a Poisson count with mean
  ``Z Lambda(eps) dt`` and Pareto sizes; their compensator enters as a
  drift.  A step whose expected jump count exceeds ``max_jumps_per_step``
  is split into equal sub-steps (the mass can be large after a big jump).
  Jumps below ``eps`` are dropped (bias of order ``eps^(1-beta)``) or, with
  ``small_jump_diffusion=True``, replaced by a Gaussian of equal variance.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numba
import numpy as np

from .model import DerivedParams, InvalidParameterError, ModelParams
from .montecarlo import CHUNK_SIZE, MCEstimate, StepDoubling, chunk_generator

__all__ = [
    "SdeConfig",
    "RateExplosionError",
    "jump_rate",
    "jump_compensator",
    "small_jump_variance",
    "simulate_bdre",
    "simulate_stable_cbbre",
    "simulate_terminal",
    "estimate_lt_sde",
    "estimate_mean_sde",
    "dt_halving_gap",
]

_SDE_STREAM = 7


class RateExplosionError(ArithmeticError):
    """The expected number of large jumps in one step exceeded the guard."""


@dataclass(frozen=True)
class SdeConfig:
    dt: float = 1e-3
    jump_cutoff: float = 0.05
    absorb_at_zero: bool = True
    small_jump_diffusion: bool = False
    max_jumps_per_step: float = 10.0
    max_substeps: int = 100_000

    def __post_init__(self):
        if not 0 < self.dt <= 1e-2:
            raise InvalidParameterError("dt must lie in (0, 1e-2]")
        if not 0 < self.jump_cutoff <= 1:
            raise InvalidParameterError("jump_cutoff must lie in (0, 1]")
        if not self.absorb_at_zero:
            raise InvalidParameterError("zero is always absorbing")

    def steps(self, t: float) -> tuple[int, float]:
        n = max(1, int(math.ceil(t / self.dt - 1e-9)))
        return n, t / n


def _params(d) -> ModelParams:
    return d.params if isinstance(d, DerivedParams) else d


def jump_rate(c: float, beta: float, eps: float) -> float:
    """``Lambda(eps)``: mass of the Levy density above ``eps``."""
    return c * beta / (math.gamma(1.0 - beta) * eps ** (1.0 + beta))


def jump_compensator(c: float, beta: float, eps: float) -> float:
    """``int_eps^inf z nu(dz)``."""
    return c * (beta + 1.0) / (math.gamma(1.0 - beta) * eps ** beta)


def small_jump_variance(c: float, beta: float, eps: float) -> float:
    """``int_0^eps z^2 nu(dz)``."""
    return c * beta * (beta + 1.0) * eps ** (1.0 - beta) / ((1.0 - beta) * math.gamma(1.0 - beta))


@numba.njit(cache=True, nogil=True)
def _bdre_kernel(gen, z0, n, n_steps, h, m, sigma, c, out):
    sq = math.sqrt(h)
    for p in range(n):
        z = z0
        for _ in range(n_steps):
            if z <= 0.0:
                break
            env = math.exp(m * h + sigma * sq * gen.standard_normal())
            z = z * env + math.sqrt(2.0 * c * z) * sq * gen.standard_normal()
        out[p] = z if z > 0.0 else 0.0


@numba.njit(cache=True, nogil=True)
def _bdre_paired_kernel(gen, z0, n, n_steps, h, m, sigma, c, out_fine, out_coarse):
    """Step sizes ``h / 2`` and ``h`` driven by the same Brownian increments."""
    hf = 0.5 * h
    sq = math.sqrt(hf)
    for p in range(n):
        zf = z0
        zc = z0
        for _ in range(n_steps):
            e1 = sq * gen.standard_normal()
            b1 = sq * gen.standard_normal()
            e2 = sq * gen.standard_normal()
            b2 = sq * gen.standard_normal()
            if zf > 0.0:
                zf = zf * math.exp(m * hf + sigma * e1) + math.sqrt(2.0 * c * zf) * b1
            if zf > 0.0:
                zf = zf * math.exp(m * hf + sigma * e2) + math.sqrt(2.0 * c * zf) * b2
            if zc > 0.0:
                zc = zc * math.exp(m * h + sigma * (e1 + e2)) + math.sqrt(2.0 * c * zc) * (b1 + b2)
        out_fine[p] = zf if zf > 0.0 else 0.0
        out_coarse[p] = zc if zc > 0.0 else 0.0


@numba.njit(cache=True, nogil=True)
def _stable_step(gen, z, h, m, sigma, beta, eps, lam_eps, comp, small_var):
    inv = -1.0 / (1.0 + beta)
    jumps = 0.0
    k = gen.poisson(z * lam_eps * h)
    for _j in range(k):
        jumps += eps * (1.0 - gen.random()) ** inv
    env = math.exp(m * h + sigma * math.sqrt(h) * gen.standard_normal())
    incr = jumps - z * comp * h
    if small_var > 0.0:
        incr += math.sqrt(z * small_var * h) * gen.standard_normal()
    return z * env + incr


@numba.njit(cache=True, nogil=True)
def _stable_kernel(gen, z0, n, n_steps, h, m, sigma, beta, eps, lam_eps, comp, small_var,
                   guard, max_sub, out):
    for p in range(n):
        z = z0
        for _ in range(n_steps):
            if z <= 0.0:
                break
            rate = z * lam_eps * h
            if rate <= guard:
                z = _stable_step(gen, z, h, m, sigma, beta, eps, lam_eps, comp, small_var)
                continue
            # Large mass: split the step so no sub-step expects more than
            # `guard` large jumps.
            n_sub = int(math.ceil(rate / guard))
            if n_sub > max_sub:
                return 1
            hs = h / n_sub
            for _s in range(n_sub):
                if z <= 0.0:
                    break
                z = _stable_step(gen, z, hs, m, sigma, beta, eps, lam_eps, comp, small_var)
        out[p] = z if z > 0.0 else 0.0
    return 0


def _simulate(z0: float, t: float, params: ModelParams, cfg: SdeConfig,
              gen: np.random.Generator, n: int) -> np.ndarray:
    if z0 < 0:
        raise InvalidParameterError("z0 must be nonnegative")
    if t < 0:
        raise InvalidParameterError("t must be nonnegative")
    out = np.full(n, float(z0))
    if z0 == 0 or t == 0:
        return out
    n_steps, h = cfg.steps(t)
    m = params.alpha - 0.5 * params.sigma ** 2
    if params.beta == 1.0:
        _bdre_kernel(gen, float(z0), n, n_steps, h, m, params.sigma, params.c, out)
        return out
    b, c, eps = params.beta, params.c, cfg.jump_cutoff
    small = small_jump_variance(c, b, eps) if cfg.small_jump_diffusion else 0.0
    flag = _stable_kernel(gen, float(z0), n, n_steps, h, m, params.sigma, b, eps,
                          jump_rate(c, b, eps), jump_compensator(c, b, eps), small,
                          cfg.max_jumps_per_step, cfg.max_substeps, out)
    if flag:
        raise RateExplosionError("Z * Lambda(eps) * dt exceeded the guard even after sub-stepping; "
                                 "reduce dt or raise eps")
    return out


def simulate_bdre(z0: float, t: float, d, cfg: SdeConfig, rng: np.random.Generator,
                  n_paths: int = 1) -> np.ndarray:
    """Terminal values ``Z_t`` of the ``beta = 1`` diffusion."""
    p = _params(d)
    if p.beta != 1.0:
        raise InvalidParameterError("simulate_bdre requires beta = 1")
    return _simulate(z0, t, p, cfg, rng, n_paths)


def simulate_stable_cbbre(z0: float, t: float, d, cfg: SdeConfig, rng: np.random.Generator,
                          n_paths: int = 1) -> np.ndarray:
    """Terminal values ``Z_t`` of the jump SDE, ``beta in (0, 1)``."""
    p = _params(d)
    if not p.beta < 1.0:
        raise InvalidParameterError("simulate_stable_cbbre requires beta < 1")
    return _simulate(z0, t, p, cfg, rng, n_paths)


def simulate_terminal(z0: float, t: float, d, cfg: SdeConfig, rng: np.random.Generator,
                      n_paths: int = 1) -> np.ndarray:
    """Dispatch on ``beta``."""
    return _simulate(z0, t, _params(d), cfg, rng, n_paths)


def _chunked_stat(stat, z0, t, d, cfg, n_paths, master_seed) -> MCEstimate:
    p = _params(d)
    if n_paths < 2:
        raise InvalidParameterError("n_paths must be at least 2")
    s1 = s2 = 0.0
    n_chunks = -(-n_paths // CHUNK_SIZE)
    for k in range(n_chunks):
        size = min(CHUNK_SIZE, n_paths - k * CHUNK_SIZE)
        vals = stat(_simulate(z0, t, p, cfg, chunk_generator(master_seed, _SDE_STREAM, k), size))
        s1 += float(vals.sum())
        s2 += float(np.square(vals).sum())
    mean = s1 / n_paths
    var = max(s2 / n_paths - mean * mean, 0.0) * n_paths / (n_paths - 1)
    return MCEstimate(mean, math.sqrt(var / n_paths), n_paths)


def estimate_lt_sde(z0: float, lam: float, t: float, d, cfg: SdeConfig, n_paths: int,
                    master_seed: int) -> MCEstimate:
    """Average of ``exp(-lam Z_t)`` over simulated paths."""
    if lam < 0:
        raise InvalidParameterError("lam must be nonnegative")
    if lam == 0:
        return MCEstimate(1.0, 0.0, n_paths)
    return _chunked_stat(lambda z: np.exp(-lam * z), z0, t, d, cfg, n_paths, master_seed)


def estimate_mean_sde(z0: float, t: float, d, cfg: SdeConfig, n_paths: int,
                      master_seed: int) -> MCEstimate:
    """Average of ``Z_t``; compare with ``z0 exp(alpha t)``."""
    return _chunked_stat(lambda z: z, z0, t, d, cfg, n_paths, master_seed)


def dt_halving_gap(z0: float, lam: float, t: float, d, cfg: SdeConfig, n_paths: int,
                   master_seed: int) -> StepDoubling:
    """``estimate_lt_sde`` at ``dt`` and ``dt / 2`` on shared Brownian paths (``beta = 1``)."""
    p = _params(d)
    if p.beta != 1.0:
        raise InvalidParameterError("dt_halving_gap requires beta = 1")
    if not (z0 > 0 and lam > 0 and t > 0):
        raise InvalidParameterError("z0, lam and t must be positive")
    n_steps, h = cfg.steps(t)
    m = p.alpha - 0.5 * p.sigma ** 2
    s1 = np.zeros(3)
    s2 = np.zeros(3)
    for k in range(-(-n_paths // CHUNK_SIZE)):
        size = min(CHUNK_SIZE, n_paths - k * CHUNK_SIZE)
        fine, coarse = np.empty(size), np.empty(size)
        _bdre_paired_kernel(chunk_generator(master_seed, _SDE_STREAM + 1, k), float(z0), size, n_steps, h,
                            m, p.sigma, p.c, fine, coarse)
        lf, lc = np.exp(-lam * fine), np.exp(-lam * coarse)
        vals = np.stack([lc, lf, lf - lc], axis=1)
        s1 += vals.sum(axis=0)
        s2 += np.square(vals).sum(axis=0)
    out = []
    for j in range(3):
        mean = s1[j] / n_paths
        var = max(s2[j] / n_paths - mean * mean, 0.0) * n_paths / (n_paths - 1)
        out.append(MCEstimate(float(mean), math.sqrt(var / n_paths), n_paths))
    return StepDoubling(*out)
