"""Monte Carlo estimators built on exponential functionals of Brownian motion.

Paths are simulated on the Brownian clock ``tau = sigma^2 beta^2 t / 4`` with
exact Gaussian increments.  On each step the integral of ``exp(2 X_s)`` is
replaced by its conditional mean given the two grid values (a Brownian
bridge average), which keeps the discretization bias of nonlinear
functionals of ``A`` at ``O(h^2)``; the plain trapezoid rule is available
as ``scheme="trapezoid"``.

Reproducibility: paths are processed in chunks of ``CHUNK_SIZE``.  Chunk
``k`` of stream ``s`` draws from ``PCG64(SeedSequence(seed, spawn_key=(s, k)))``
and chunk results are reduced in chunk order, so estimates do not depend on
the number of worker threads.

Rare events (survival probabilities of order ``e^{-20}``) are estimated by
sampling the driving Brownian motion with a drift ``kappa`` different from
``eta`` and reweighting with the likelihood ratio
``exp((eta - kappa) X_tau - (eta^2 - kappa^2) tau / 2)``.
"""

from __future__ import annotations

import math
import os
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field
from typing import Callable, Sequence

import numba
import numpy as np

from .model import DerivedParams, InvalidParameterError, Regime

__all__ = [
    "CHUNK_SIZE",
    "MCEstimate",
    "PathConfig",
    "MonteCarloError",
    "DegenerateDenominatorError",
    "chunk_generator",
    "sample_expfun",
    "xi_zeta_sample",
    "default_tilt",
    "duality_lt",
    "survival_mc",
    "conditioned_lt_mc",
    "shifted_moment",
    "DufresneReport",
    "dufresne_check",
    "dufresne_horizon",
    "BH12Report",
    "bh12_check",
    "bh12_limit",
    "second_moment_zeta",
    "StepDoubling",
    "step_doubling_gap",
]

CHUNK_SIZE = 16384
_OVERFLOW_EXP = 700.0


class MonteCarloError(ArithmeticError):
    """Numerical failure inside a simulation (e.g. exponent overflow)."""


class DegenerateDenominatorError(MonteCarloError):
    """The survival estimate is too noisy to divide by."""


@dataclass(frozen=True)
class MCEstimate:
    mean: float
    stderr: float
    n: int

    def combine(self, other: "MCEstimate") -> "MCEstimate":
        """Pool two independent estimates of the same quantity (n-weighted)."""
        n = self.n + other.n
        mean = (self.n * self.mean + other.n * other.mean) / n
        # Recover sums of squares from (mean, stderr, n) and pool.
        def ss(e: MCEstimate) -> float:
            var = e.stderr ** 2 * e.n * (e.n - 1) if e.n > 1 else 0.0
            return var + e.n * e.mean ** 2

        total = ss(self) + ss(other) - n * mean ** 2
        var = max(total, 0.0) / (n - 1) if n > 1 else 0.0
        return MCEstimate(mean, math.sqrt(var / n), n)

    def z_score(self, other: "MCEstimate") -> float:
        s = math.hypot(self.stderr, other.stderr)
        return abs(self.mean - other.mean) / s if s > 0 else (0.0 if self.mean == other.mean else math.inf)

    def scaled(self, factor: float) -> "MCEstimate":
        return MCEstimate(self.mean * factor, self.stderr * abs(factor), self.n)


@dataclass(frozen=True)
class PathConfig:
    """Simulation settings.

    ``n_steps`` counts grid steps over the longest Brownian horizon of the
    call; when omitted it is chosen so the step is at most ``max_step``.
    """

    n_paths: int
    master_seed: int
    n_steps: int | None = None
    max_step: float = 0.01
    threads: int | None = None
    scheme: str = "bridge"

    def __post_init__(self):
        if self.n_paths < 1:
            raise InvalidParameterError("n_paths must be positive")
        if self.n_steps is not None and self.n_steps < 100:
            raise InvalidParameterError("n_steps must be at least 100")
        if not self.max_step > 0:
            raise InvalidParameterError("max_step must be positive")
        if self.scheme not in ("bridge", "trapezoid"):
            raise InvalidParameterError("scheme must be 'bridge' or 'trapezoid'")
        if not 0 <= int(self.master_seed) < 2 ** 64:
            raise InvalidParameterError("master_seed must be a 64-bit unsigned integer")

    def steps_for(self, tau: float) -> int:
        if self.n_steps is not None:
            return self.n_steps
        return max(100, int(math.ceil(tau / self.max_step)))

    def worker_count(self) -> int:
        if self.threads is not None:
            return max(1, int(self.threads))
        env = os.environ.get("CBBRE_THREADS")
        if env:
            return max(1, int(env))
        return os.cpu_count() or 1


def chunk_generator(master_seed: int, stream: int, chunk: int) -> np.random.Generator:
    """The generator owning paths of chunk ``chunk`` in stream ``stream``."""
    ss = np.random.SeedSequence(int(master_seed), spawn_key=(int(stream), int(chunk)))
    return np.random.Generator(np.random.PCG64(ss))


# ---------------------------------------------------------------------------
# Path kernel
# ---------------------------------------------------------------------------

@numba.njit(cache=True, nogil=True)
def _bridge_factor(c, h):
    """``int_0^1 exp(c u + 2 h u (1-u)) du`` to O(h^2): the conditional mean of
    ``int exp(2X)`` over a step, divided by ``h exp(2 x0)``, with ``c = 2 (x1 - x0)``."""
    if abs(c) < 0.05:
        e0 = 1.0 + c * (0.5 + c * (1.0 / 6.0 + c * (1.0 / 24.0 + c * (1.0 / 120.0 + c / 720.0))))
        k = 1.0 / 6.0 + c * (1.0 / 12.0 + c * (1.0 / 40.0 + c * (1.0 / 180.0 + c / 1008.0)))
    else:
        ec = math.exp(c)
        e0 = (ec - 1.0) / c
        k = (ec * (c - 2.0) + c + 2.0) / (c * c * c)
    return e0 + 2.0 * h * k


@numba.njit(cache=True, nogil=True)
def _simulate_chunk(gen, n_paths, drift, h, n_steps, snap_idx, bridge, stop_log_ratio,
                    log_a_out, x_out):
    """Fill ``log A`` and the endpoint ``X`` at each snapshot step.

    ``snap_idx`` holds increasing step indices in ``1..n_steps``.  When
    ``stop_log_ratio`` is finite, a path stops once
    ``2 X < ln A + stop_log_ratio``; later snapshots reuse its last values.
    Returns 1 if an exponent exceeded the overflow guard, else 0.
    """
    n_snap = snap_idx.shape[0]
    sq = math.sqrt(h)
    mu = drift * h
    flag = 0
    for p in range(n_paths):
        x = 0.0
        a = 0.0
        k = 0
        i = 0
        stopped = False
        while i < n_steps:
            i += 1
            x1 = x + mu + sq * gen.standard_normal()
            if 2.0 * x1 > _OVERFLOW_EXP or 2.0 * x > _OVERFLOW_EXP:
                flag = 1
            if bridge:
                a += h * math.exp(2.0 * x) * _bridge_factor(2.0 * (x1 - x), h)
            else:
                a += 0.5 * h * (math.exp(2.0 * x) + math.exp(2.0 * x1))
            x = x1
            while k < n_snap and snap_idx[k] == i:
                log_a_out[p, k] = math.log(a)
                x_out[p, k] = x
                k += 1
            if stop_log_ratio < np.inf and 2.0 * x < math.log(a) + stop_log_ratio:
                stopped = True
                break
        if stopped:
            la = math.log(a)
            while k < n_snap:
                log_a_out[p, k] = la
                x_out[p, k] = x
                k += 1
    return flag


@numba.njit(cache=True, nogil=True)
def _paired_chunk(gen, n_paths, drift, h, n_coarse, bridge, log_a_fine, log_a_coarse, x_out):
    """Simulate ``2 n_coarse`` steps of size ``h / 2`` and accumulate ``A`` on
    both the fine grid and the coarse grid built from the same path."""
    hf = 0.5 * h
    sq = math.sqrt(hf)
    mu = drift * hf
    flag = 0
    for p in range(n_paths):
        x = 0.0
        af = 0.0
        ac = 0.0
        for _ in range(n_coarse):
            x0 = x
            for _j in range(2):
                x1 = x + mu + sq * gen.standard_normal()
                if 2.0 * x1 > _OVERFLOW_EXP:
                    flag = 1
                if bridge:
                    af += hf * math.exp(2.0 * x) * _bridge_factor(2.0 * (x1 - x), hf)
                else:
                    af += 0.5 * hf * (math.exp(2.0 * x) + math.exp(2.0 * x1))
                x = x1
            if bridge:
                ac += h * math.exp(2.0 * x0) * _bridge_factor(2.0 * (x - x0), h)
            else:
                ac += 0.5 * h * (math.exp(2.0 * x0) + math.exp(2.0 * x))
        log_a_fine[p] = math.log(af)
        log_a_coarse[p] = math.log(ac)
        x_out[p] = x
    return flag


def _grid(taus: Sequence[float], cfg: PathConfig) -> tuple[float, int, np.ndarray]:
    taus = np.asarray(taus, dtype=float)
    if np.any(taus <= 0) or np.any(np.diff(taus) <= 0):
        raise InvalidParameterError("snapshot times must be positive and increasing")
    tau_max = float(taus[-1])
    n_steps = cfg.steps_for(tau_max)
    h = tau_max / n_steps
    idx = np.rint(taus / h).astype(np.int64)
    if np.any(np.abs(idx * h - taus) > 1e-9 * tau_max) or np.any(idx < 1):
        raise InvalidParameterError(
            "snapshot times must lie on the step grid; choose n_steps accordingly")
    return h, n_steps, idx


@dataclass
class _Sums:
    n: np.ndarray          # paths per chunk
    s1: np.ndarray         # (chunks, k) sums
    s2: np.ndarray         # (chunks, k) sums of squares


def _run(cfg: PathConfig, drift: float, taus: Sequence[float],
         stat: Callable[[np.ndarray, np.ndarray], np.ndarray], *, stream: int = 0,
         stop_log_ratio: float = math.inf) -> _Sums:
    h, n_steps, idx = _grid(taus, cfg)
    n_chunks = -(-cfg.n_paths // CHUNK_SIZE)
    bridge = cfg.scheme == "bridge"

    def work(c: int):
        size = min(CHUNK_SIZE, cfg.n_paths - c * CHUNK_SIZE)
        gen = chunk_generator(cfg.master_seed, stream, c)
        log_a = np.empty((size, idx.size))
        x = np.empty((size, idx.size))
        flag = _simulate_chunk(gen, size, float(drift), h, n_steps, idx, bridge,
                               float(stop_log_ratio), log_a, x)
        if flag:
            raise MonteCarloError("exponent exceeded the overflow guard; shorten the horizon "
                                  "or change the sampling drift")
        vals = np.asarray(stat(log_a, x), dtype=float)
        if vals.ndim == 1:
            vals = vals[:, None]
        if not np.all(np.isfinite(vals)):
            raise MonteCarloError("non-finite path statistic")
        return size, vals.sum(axis=0), np.square(vals).sum(axis=0)

    workers = min(cfg.worker_count(), n_chunks)
    if workers > 1:
        with ThreadPoolExecutor(max_workers=workers) as pool:
            results = list(pool.map(work, range(n_chunks)))
    else:
        results = [work(c) for c in range(n_chunks)]
    n = np.array([r[0] for r in results], dtype=np.int64)
    s1 = np.stack([r[1] for r in results])
    s2 = np.stack([r[2] for r in results])
    return _Sums(n, s1, s2)


def _estimates(sums: _Sums) -> list[MCEstimate]:
    n = int(sums.n.sum())
    s1 = np.zeros(sums.s1.shape[1])
    s2 = np.zeros(sums.s1.shape[1])
    for row1, row2 in zip(sums.s1, sums.s2):  # fixed-order reduction
        s1 = s1 + row1
        s2 = s2 + row2
    out = []
    for j in range(s1.size):
        mean = s1[j] / n
        var = max(s2[j] / n - mean * mean, 0.0) * n / (n - 1) if n > 1 else 0.0
        out.append(MCEstimate(float(mean), math.sqrt(var / n), n))
    return out


def _ratio_jackknife(sums: _Sums, num: int, den: int) -> tuple[float, float, MCEstimate]:
    """``sum(num)/sum(den)`` with a leave-one-chunk-out jackknife stderr."""
    n_tot = sums.s1[:, num].sum()
    d_tot = sums.s1[:, den].sum()
    ratio = n_tot / d_tot
    g = sums.n.size
    den_est = _estimates(_Sums(sums.n, sums.s1[:, [den]], sums.s2[:, [den]]))[0]
    if g < 2:
        return float(ratio), float("nan"), den_est
    loo = (n_tot - sums.s1[:, num]) / (d_tot - sums.s1[:, den])
    var = (g - 1) / g * np.sum((loo - loo.mean()) ** 2)
    return float(ratio), float(math.sqrt(var)), den_est


# ---------------------------------------------------------------------------
# Samplers
# ---------------------------------------------------------------------------

def sample_expfun(eta_drift: float, tau: float, n_steps: int, rng: np.random.Generator,
                  n_paths: int = 1, scheme: str = "bridge") -> tuple[np.ndarray, np.ndarray]:
    """Draw ``(A_tau, eta tau + B_tau)`` for ``A_tau = int_0^tau exp(2(eta s + B_s)) ds``."""
    if not tau > 0:
        raise InvalidParameterError("tau must be positive")
    if n_steps < 1:
        raise InvalidParameterError("n_steps must be positive")
    log_a = np.empty((n_paths, 1))
    x = np.empty((n_paths, 1))
    flag = _simulate_chunk(rng, n_paths, float(eta_drift), tau / n_steps, n_steps,
                           np.array([n_steps], dtype=np.int64), scheme == "bridge", math.inf, log_a, x)
    if flag:
        raise MonteCarloError("exponent exceeded the overflow guard")
    return np.exp(log_a[:, 0]), x[:, 0]


def _log_xi(log_a, x, lam, d: DerivedParams):
    """``ln xi`` for the bracket ``gamma A + lam^-beta e^{2X}`` (``lam = inf`` gives ``zeta``)."""
    b = d.beta
    first = math.log(d.gamma) + log_a
    if math.isinf(lam):
        return -first / b
    return -np.logaddexp(first, -b * math.log(lam) + 2.0 * x) / b


def xi_zeta_sample(lam: float, t: float, d: DerivedParams, n_steps: int, rng: np.random.Generator,
                   n_paths: int = 1) -> tuple[np.ndarray, np.ndarray]:
    """Draw ``(xi_t(lam), zeta_t)`` from the same Brownian paths."""
    d.require_subcritical()
    a, x = sample_expfun(d.eta, d.tau(t), n_steps, rng, n_paths)
    log_a = np.log(a)
    return np.exp(_log_xi(log_a, x, lam, d)), np.exp(_log_xi(log_a, x, math.inf, d))


def default_tilt(d: DerivedParams) -> float:
    """Sampling drift for rare-event estimators: ``max(eta - 2/beta, 0)``."""
    return max(d.eta - 2.0 / d.beta, 0.0)


def _log_weight(x, tau, eta, kappa):
    return (eta - kappa) * x - 0.5 * (eta * eta - kappa * kappa) * tau


def _check_positive(**kw):
    for k, v in kw.items():
        if not v > 0:
            raise InvalidParameterError(f"{k} must be positive, got {v}")


# ---------------------------------------------------------------------------
# Estimators
# ---------------------------------------------------------------------------

def duality_lt(z: float, lam: float, t: float, d: DerivedParams, cfg: PathConfig,
               drift: float | None = None) -> MCEstimate:
    """``E^z exp(-lam Z_t) = E exp(-z xi_t(lam))``.

    By default paths use the natural drift ``eta``; any other ``drift``
    switches to likelihood-ratio weighting.  The complement
    ``1 - exp(-z xi)`` is averaged so small values keep relative accuracy.
    """
    d.require_subcritical()
    _check_positive(z=z, lam=lam, t=t)
    tau = d.tau(t)
    kappa = d.eta if drift is None else float(drift)

    def stat(log_a, x):
        lx = _log_xi(log_a[:, 0], x[:, 0], lam, d)
        w = np.exp(_log_weight(x[:, 0], tau, d.eta, kappa)) if kappa != d.eta else 1.0
        return -np.expm1(-z * np.exp(lx)) * w

    f = _estimates(_run(cfg, kappa, [tau], stat))[0]
    return MCEstimate(1.0 - f.mean, f.stderr, f.n)


@dataclass(frozen=True)
class StepDoubling:
    coarse: MCEstimate
    fine: MCEstimate
    difference: MCEstimate


def step_doubling_gap(z: float, lam: float, t: float, d: DerivedParams, cfg: PathConfig) -> StepDoubling:
    """``duality_lt`` with ``n`` and ``2 n`` steps evaluated on the same paths.

    The coarse grid reuses the fine Brownian path, so ``difference`` (fine
    minus coarse) isolates the discretization effect from sampling noise.
    """
    d.require_subcritical()
    _check_positive(z=z, lam=lam, t=t)
    tau = d.tau(t)
    n_coarse = cfg.steps_for(tau)
    h = tau / n_coarse
    n_chunks = -(-cfg.n_paths // CHUNK_SIZE)
    bridge = cfg.scheme == "bridge"

    def work(c: int):
        size = min(CHUNK_SIZE, cfg.n_paths - c * CHUNK_SIZE)
        gen = chunk_generator(cfg.master_seed, 5, c)
        la_f, la_c, x = np.empty(size), np.empty(size), np.empty(size)
        if _paired_chunk(gen, size, float(d.eta), h, n_coarse, bridge, la_f, la_c, x):
            raise MonteCarloError("exponent exceeded the overflow guard")
        fine = np.exp(-z * np.exp(_log_xi(la_f, x, lam, d)))
        coarse = np.exp(-z * np.exp(_log_xi(la_c, x, lam, d)))
        vals = np.stack([coarse, fine, fine - coarse], axis=1)
        return size, vals.sum(axis=0), np.square(vals).sum(axis=0)

    workers = min(cfg.worker_count(), n_chunks)
    if workers > 1:
        with ThreadPoolExecutor(max_workers=workers) as pool:
            results = list(pool.map(work, range(n_chunks)))
    else:
        results = [work(c) for c in range(n_chunks)]
    sums = _Sums(np.array([r[0] for r in results], dtype=np.int64),
                 np.stack([r[1] for r in results]), np.stack([r[2] for r in results]))
    coarse, fine, diff = _estimates(sums)
    return StepDoubling(coarse, fine, diff)


def survival_mc(z: float, t: float, d: DerivedParams, cfg: PathConfig,
                drift: float | None = None) -> MCEstimate:
    """``P^z(Z_t > 0) = 1 - E exp(-z zeta_t)``, sampled with drift ``default_tilt(d)``."""
    d.require_subcritical()
    _check_positive(z=z, t=t)
    tau = d.tau(t)
    kappa = default_tilt(d) if drift is None else float(drift)

    def stat(log_a, x):
        lz = _log_xi(log_a[:, 0], x[:, 0], math.inf, d)
        return -np.expm1(-z * np.exp(lz)) * np.exp(_log_weight(x[:, 0], tau, d.eta, kappa))

    return _estimates(_run(cfg, kappa, [tau], stat))[0]


@dataclass(frozen=True)
class ConditionedRow:
    t: float
    z: float
    lam: float
    estimate: MCEstimate
    numerator: MCEstimate
    survival: MCEstimate


def conditioned_lt_mc(z, lam, t, d: DerivedParams, cfg: PathConfig,
                      drift: float | None = None, min_signal: float = 5.0):
    """Conditioned transform ``L_t = 1 - E[1 - e^{-lam Z_t}] / P(Z_t > 0)``.

    ``z``, ``lam`` and ``t`` may be scalars or sequences; all combinations
    share the same paths (times are snapshots of one path).  Returns an
    :class:`MCEstimate` for scalar input, otherwise a list of
    :class:`ConditionedRow`.  The stderr is a leave-one-chunk-out jackknife.
    """
    d.require_subcritical()
    scalar = all(np.ndim(v) == 0 for v in (z, lam, t))
    zs = [float(v) for v in np.atleast_1d(z)]
    lams = [float(v) for v in np.atleast_1d(lam)]
    ts = sorted(float(v) for v in np.atleast_1d(t))
    for v in zs + lams + ts:
        _check_positive(value=v)
    taus = [d.tau(v) for v in ts]
    kappa = default_tilt(d) if drift is None else float(drift)
    combos = [(k, zz, ll) for k in range(len(ts)) for zz in zs for ll in lams]

    def stat(log_a, x):
        cols = []
        for k, zz, ll in combos:
            w = np.exp(_log_weight(x[:, k], taus[k], d.eta, kappa))
            cols.append(-np.expm1(-zz * np.exp(_log_xi(log_a[:, k], x[:, k], ll, d))) * w)
            cols.append(-np.expm1(-zz * np.exp(_log_xi(log_a[:, k], x[:, k], math.inf, d))) * w)
        return np.stack(cols, axis=1)

    sums = _run(cfg, kappa, taus, stat)
    ests = _estimates(sums)
    rows = []
    for j, (k, zz, ll) in enumerate(combos):
        ratio, se, den = _ratio_jackknife(sums, 2 * j, 2 * j + 1)
        if den.mean < min_signal * den.stderr:
            raise DegenerateDenominatorError(
                f"survival estimate {den.mean:.3e} is within {min_signal} stderr of zero at t={ts[k]}")
        est = MCEstimate(1.0 - ratio, se, den.n)
        rows.append(ConditionedRow(ts[k], zz, ll, est, ests[2 * j], den))
    if scalar:
        return rows[0].estimate
    return rows


def shifted_moment(lam: float, t: float, d: DerivedParams, cfg: PathConfig,
                   order: int = 1) -> tuple[MCEstimate, MCEstimate]:
    """Two independent estimates of ``E xi_t(lam)`` (``lam = inf`` gives ``E zeta_t``).

    ``direct`` samples ``A^(eta)`` literally; ``flipped`` samples
    ``A^(2/beta - eta)`` and uses
    ``E xi = exp((1/beta - eta) beta sigma^2 t / 2) E[(gamma A^(2/beta-eta) + lam^-beta)^(-1/beta)]``.
    """
    if order != 1:
        raise InvalidParameterError("only the first moment is supported")
    d.require_subcritical()
    _check_positive(lam=lam, t=t)
    tau = d.tau(t)
    b = d.beta
    k = 0.0 if math.isinf(lam) else lam ** (-b)

    def direct_stat(log_a, x):
        return np.exp(_log_xi(log_a[:, 0], x[:, 0], lam, d))

    def flipped_stat(log_a, x):
        return (d.gamma * np.exp(log_a[:, 0]) + k) ** (-1.0 / b)

    direct = _estimates(_run(cfg, d.eta, [tau], direct_stat, stream=1))[0]
    flip_drift = 2.0 / b - d.eta
    pref = math.exp((1.0 / b - d.eta) * b * d.sigma ** 2 * t / 2.0)
    flipped = _estimates(_run(cfg, flip_drift, [tau], flipped_stat, stream=2))[0].scaled(pref)
    return direct, flipped


def second_moment_zeta(t: float, d: DerivedParams, cfg: PathConfig,
                       drift: float | None = None) -> MCEstimate:
    """``E zeta_t^2`` with likelihood-ratio weighting."""
    d.require_subcritical()
    tau = d.tau(t)
    kappa = default_tilt(d) if drift is None else float(drift)

    def stat(log_a, x):
        lz = _log_xi(log_a[:, 0], x[:, 0], math.inf, d)
        return np.exp(2.0 * lz + _log_weight(x[:, 0], tau, d.eta, kappa))

    return _estimates(_run(cfg, kappa, [tau], stat))[0]


# ---------------------------------------------------------------------------
# Exponential-functional identities
# ---------------------------------------------------------------------------

@dataclass(frozen=True)
class DufresneReport:
    b: float
    horizon: float
    mean: MCEstimate
    second_moment: MCEstimate
    variance: float
    variance_stderr: float
    mean_z: float
    second_moment_z: float
    variance_z: float
    truncation_ok: bool

    @property
    def passed(self) -> bool:
        return self.mean_z <= 3.0 and self.second_moment_z <= 3.0


def dufresne_horizon(b: float) -> float:
    """``max(40, ln(1e6) / (2 b))``."""
    return max(40.0, math.log(1e6) / (2.0 * b))


def dufresne_check(b: float, cfg: PathConfig, horizon: float | None = None,
                   stop_log_ratio: float = math.log(1e-10)) -> DufresneReport:
    """Check that ``1 / (2 A_inf^(-b))`` has the Gamma(b, 1) moments.

    Paths run until ``horizon`` or until ``exp(2 X) < 1e-10 A``, after which
    the remaining contribution is below that relative level for typical
    paths.
    """
    _check_positive(b=b)
    horizon = dufresne_horizon(b) if horizon is None else float(horizon)
    truncation_ok = math.exp(-2.0 * b * horizon) < 1e-8

    def stat(log_a, x):
        g = 0.5 * np.exp(-log_a[:, 0])
        return np.stack([g, g * g, g ** 3, g ** 4], axis=1)

    est = _estimates(_run(cfg, -b, [horizon], stat, stream=3, stop_log_ratio=stop_log_ratio))
    m1, m2, m3, m4 = est
    n = m1.n
    var = m2.mean - m1.mean ** 2
    # Delta-method stderr of the sample variance from the raw moments.
    mu4c = m4.mean - 4 * m3.mean * m1.mean + 6 * m2.mean * m1.mean ** 2 - 3 * m1.mean ** 4
    var_se = math.sqrt(max(mu4c - var ** 2, 0.0) / n)
    return DufresneReport(
        b=b, horizon=horizon, mean=m1, second_moment=m2, variance=var, variance_stderr=var_se,
        mean_z=abs(m1.mean - b) / m1.stderr,
        second_moment_z=abs(m2.mean - b * (b + 1.0)) / m2.stderr,
        variance_z=abs(var - b) / var_se if var_se > 0 else math.inf,
        truncation_ok=truncation_ok,
    )


@dataclass(frozen=True)
class BH12Report:
    ts: list[float]
    scaled: list[MCEstimate]
    limit: float

    def ratio(self, i: int = -1) -> float:
        return self.scaled[i].mean / self.limit


def bh12_limit(g: Callable[[np.ndarray], np.ndarray], tol: float = 1e-10) -> float:
    """``int_0^inf g(a) (2 pi)^(-1/2) e^-a / a da``."""
    from .quadrature import integrate_1d

    res = integrate_1d(lambda a: g(np.where(a > 0, a, 1.0)) * np.exp(-a) / np.where(a > 0, a, 1.0)
                       / math.sqrt(2.0 * math.pi), 0.0, math.inf, tol)
    return res.value


def bh12_check(g: Callable[[np.ndarray], np.ndarray], ts: Sequence[float], cfg: PathConfig,
               time_scale: float = 1.0) -> BH12Report:
    """``sqrt(t) E g(1/(2 A_tau^(0)))`` along ``ts`` with ``tau = time_scale * t``.

    With ``time_scale = sigma^2 beta^2 / 4`` the times are model times and
    the limit carries the factor ``sqrt(t/tau)``.
    """
    ts = sorted(float(v) for v in ts)
    taus = [time_scale * v for v in ts]

    def stat(log_a, x):
        return np.stack([g(0.5 * np.exp(-log_a[:, k])) for k in range(len(taus))], axis=1)

    est = _estimates(_run(cfg, 0.0, taus, stat, stream=4))
    scaled = [e.scaled(math.sqrt(t)) for e, t in zip(est, ts)]
    limit = bh12_limit(g) / math.sqrt(time_scale)
    return BH12Report(ts, scaled, limit)
