"""Closed-form Yaglom Laplace transforms and survival constants.

In every subcritical regime the Yaglom limit has Laplace transform

    L(lam) = 1 - (gamma/2)**a * lam**(beta*a) * U(a, b, gamma*lam**beta/2)

with ``a = (Theta - 2m/sigma^2)/beta`` and
``b = 1 + (2/beta)(Theta - m/sigma^2)``; the regime-specific forms are
provided separately so that the two can be checked against each other.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np

from .model import DerivedParams, InvalidParameterError, ModelParams, Regime
from .specialfn import kummer_u, log_kummer_u

__all__ = [
    "LaplaceCurve",
    "kummer_arguments",
    "yaglom_lt",
    "yaglom_lt_regime",
    "yaglom_curve",
    "survival_asymptotic_constant",
    "survival_log_scale",
    "csbp_no_env_lt",
    "csbp_no_env_survival",
    "csbp_no_env_conditioned_lt",
    "csbp_no_env_yaglom",
]


@dataclass(frozen=True)
class LaplaceCurve:
    lambdas: list[float]
    values: list[float]
    params: ModelParams
    regime_values: list[float] | None = field(default=None)

    def __post_init__(self):
        if len(self.lambdas) != len(self.values):
            raise ValueError("lambdas and values must have equal length")

    @property
    def max_deviation(self) -> float:
        if self.regime_values is None:
            return 0.0
        return max((abs(u - v) for u, v in zip(self.values, self.regime_values)), default=0.0)

    def is_monotone(self) -> bool:
        order = np.argsort(self.lambdas)
        vals = np.asarray(self.values)[order]
        return bool(np.all(np.diff(vals) <= 0.0))


def _check_lam(lam: float) -> None:
    if not lam > 0 or not math.isfinite(lam):
        raise InvalidParameterError(f"lambda must be a positive finite real, got {lam}")


def kummer_arguments(d: DerivedParams) -> tuple[float, float]:
    """The ``(a, b)`` pair of the unified formula, read from ``Theta`` and ``m``."""
    d.require_subcritical()
    ratio = d.m / d.sigma ** 2
    a = (d.theta_cap - 2.0 * ratio) / d.beta
    b = 1.0 + (2.0 / d.beta) * (d.theta_cap - ratio)
    return a, b


def yaglom_lt(d: DerivedParams, lam: float) -> float:
    """Unified closed form, assembled in log-space."""
    _check_lam(lam)
    a, b = kummer_arguments(d)
    ratio = d.m / d.sigma ** 2
    lam_pow = d.theta_cap - 2.0 * ratio
    r = 0.5 * d.gamma * lam ** d.beta
    log_term = a * math.log(0.5 * d.gamma) + lam_pow * math.log(lam) + log_kummer_u(a, b, r)
    return -math.expm1(log_term) if log_term < 0 else 1.0 - math.exp(log_term)


def yaglom_lt_regime(d: DerivedParams, lam: float) -> float:
    """Regime-specific closed forms written in terms of ``eta`` and ``gamma``."""
    _check_lam(lam)
    d.require_subcritical()
    eta, g, beta = d.eta, d.gamma, d.beta
    r = 0.5 * g * lam ** beta
    if d.regime is Regime.WEAK:
        return 1.0 - r ** (0.5 * eta) * kummer_u(0.5 * eta, 1.0, r)
    if d.regime is Regime.INTERMEDIATE:
        return 1.0 - (0.5 * g) ** (1.0 / beta) * lam * kummer_u(1.0 / beta, 1.0, r)
    a = eta - 1.0 / beta
    b = eta - 2.0 / beta + 1.0
    log_pref = a * math.log(0.5 * g) + (beta * eta - 1.0) * math.log(lam)
    return 1.0 - math.exp(log_pref) * kummer_u(a, b, r)


def yaglom_curve(d: DerivedParams, lambdas, check: bool = False) -> LaplaceCurve:
    lams = [float(x) for x in lambdas]
    vals = [yaglom_lt(d, x) for x in lams]
    reg = [yaglom_lt_regime(d, x) for x in lams] if check else None
    return LaplaceCurve(lams, vals, d.params, reg)


def survival_asymptotic_constant(d: DerivedParams, z: float, **kwargs) -> float:
    """Limit of the normalized survival probability ``P^z(Z_t > 0) / scale(t)``.

    The normalization is ``t**-1.5 * exp(-m^2 t / (2 sigma^2))`` (weak),
    ``t**-0.5 * exp(-sigma^2 t / 2)`` (intermediate) and
    ``exp((m + sigma^2/2) t)`` (strong); see :func:`survival_log_scale`.
    """
    if not z > 0:
        raise InvalidParameterError(f"z must be positive, got {z}")
    d.require_subcritical()
    beta, sigma, c = d.beta, d.sigma, d.c
    base = (beta * sigma ** 2 / (2.0 * c)) ** (1.0 / beta)
    if d.regime is Regime.INTERMEDIATE:
        return z * math.sqrt(2.0) / (math.sqrt(math.pi) * beta * sigma) * math.gamma(1.0 / beta) * base
    if d.regime is Regime.STRONG:
        return z * base * math.exp(math.lgamma(d.eta - 1.0 / beta) - math.lgamma(d.eta - 2.0 / beta))
    from .weakkernel import weak_survival_constant

    return weak_survival_constant(z, d, **kwargs)


def survival_log_scale(d: DerivedParams, t: float) -> float:
    """``ln`` of the factor by which ``P^z(Z_t > 0)`` decays at time ``t``."""
    d.require_subcritical()
    s2 = d.sigma ** 2
    if d.regime is Regime.WEAK:
        return -1.5 * math.log(t) - d.m ** 2 * t / (2.0 * s2)
    if d.regime is Regime.INTERMEDIATE:
        return -0.5 * math.log(t) - 0.5 * s2 * t
    return (d.m + 0.5 * s2) * t


def _no_env_check(params: ModelParams) -> None:
    if params.sigma != 0:
        raise InvalidParameterError("no-environment formulas require sigma = 0")


def _no_env_growth(params: ModelParams, t: float) -> float:
    """``(c/m)(1 - exp(-m beta t))`` with the ``m -> 0`` limit ``c beta t``."""
    m, beta = params.alpha, params.beta
    if m == 0:
        return params.c * beta * t
    return -params.c / m * math.expm1(-m * beta * t)


def csbp_no_env_lt(z: float, lam: float, t: float, params: ModelParams) -> float:
    """``E^z exp(-lam Z_t)`` for the stable CSBP without environment."""
    _no_env_check(params)
    if not (z > 0 and lam > 0 and t >= 0):
        raise InvalidParameterError("need z > 0, lam > 0, t >= 0")
    return math.exp(-_no_env_exponent(z, lam, t, params))


def csbp_no_env_survival(z: float, t: float, params: ModelParams) -> float:
    """``P^z(Z_t > 0)``, the ``lam -> inf`` limit of ``1 - csbp_no_env_lt``."""
    _no_env_check(params)
    if not (z > 0 and t > 0):
        raise InvalidParameterError("need z > 0 and t > 0")
    return -math.expm1(-z * _no_env_growth(params, t) ** (-1.0 / params.beta))


def _no_env_exponent(z: float, lam: float, t: float, params: ModelParams) -> float:
    m, beta = params.alpha, params.beta
    inner = lam ** (-beta) * math.exp(-m * beta * t) + _no_env_growth(params, t)
    return z * inner ** (-1.0 / beta)


def csbp_no_env_conditioned_lt(z: float, lam: float, t: float, params: ModelParams) -> float:
    """``E^z[exp(-lam Z_t) | Z_t > 0]``, computed without cancellation."""
    num = -math.expm1(-_no_env_exponent(z, lam, t, params))
    return 1.0 - num / csbp_no_env_survival(z, t, params)


def csbp_no_env_yaglom(lam: float, params: ModelParams) -> float:
    """Yaglom Laplace transform ``1 - (1 - (alpha/c) lam^-beta)^(-1/beta)``; needs alpha < 0."""
    _no_env_check(params)
    _check_lam(lam)
    if not params.alpha < 0:
        raise InvalidParameterError("the no-environment Yaglom limit requires alpha < 0")
    beta = params.beta
    return 1.0 - (1.0 - params.alpha / params.c * lam ** (-beta)) ** (-1.0 / beta)
