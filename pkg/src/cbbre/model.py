"""Model parameters, derived constants and regime classification."""

from __future__ import annotations

import enum
import math
from dataclasses import dataclass

__all__ = [
    "InvalidParameterError",
    "Regime",
    "ModelParams",
    "DerivedParams",
    "derive",
    "branching_mechanism",
    "classify",
]


class InvalidParameterError(ValueError):
    """A parameter violates the model's domain constraints."""


class Regime(enum.Enum):
    SUPERCRITICAL = "supercritical"
    CRITICAL = "critical"
    WEAK = "weak"
    INTERMEDIATE = "intermediate"
    STRONG = "strong"

    @property
    def is_subcritical(self) -> bool:
        return self in (Regime.WEAK, Regime.INTERMEDIATE, Regime.STRONG)


@dataclass(frozen=True)
class ModelParams:
    """Branching mechanism ``psi(l) = -alpha*l + c*l**(beta+1)`` in an
    environment of volatility ``sigma``."""

    alpha: float
    sigma: float
    c: float
    beta: float
    z0: float | None = None

    def __post_init__(self):
        for name in ("alpha", "sigma", "c", "beta"):
            v = getattr(self, name)
            if not isinstance(v, (int, float)) or not math.isfinite(v):
                raise InvalidParameterError(f"{name} must be a finite real, got {v!r}")
        if self.c <= 0:
            raise InvalidParameterError(f"c must be positive, got {self.c}")
        if not 0.0 < self.beta <= 1.0:
            raise InvalidParameterError(f"beta must lie in (0, 1], got {self.beta}")
        if self.sigma < 0:
            raise InvalidParameterError(f"sigma must be nonnegative, got {self.sigma}")
        if self.z0 is not None and not self.z0 > 0:
            raise InvalidParameterError(f"z0 must be positive, got {self.z0}")

    @property
    def m(self) -> float:
        return self.alpha - 0.5 * self.sigma ** 2


@dataclass(frozen=True)
class DerivedParams:
    m: float
    eta: float
    gamma: float
    theta_cap: float
    regime: Regime
    params: ModelParams

    @property
    def beta(self) -> float:
        return self.params.beta

    @property
    def sigma(self) -> float:
        return self.params.sigma

    @property
    def c(self) -> float:
        return self.params.c

    @property
    def alpha(self) -> float:
        return self.params.alpha

    def tau(self, t: float) -> float:
        """Brownian clock ``sigma**2 * beta**2 * t / 4`` matching model time ``t``."""
        return self.sigma ** 2 * self.beta ** 2 * t / 4.0

    def require_subcritical(self) -> None:
        if not self.regime.is_subcritical:
            raise InvalidParameterError(
                f"operation requires a subcritical regime, got {self.regime.value}"
            )


def classify(m: float, sigma: float) -> Regime:
    """Regime from exact comparisons of ``m`` with ``0`` and ``-sigma**2``."""
    s2 = sigma * sigma
    if m > 0:
        return Regime.SUPERCRITICAL
    if m == 0:
        return Regime.CRITICAL
    if m > -s2:
        return Regime.WEAK
    if m == -s2:
        return Regime.INTERMEDIATE
    return Regime.STRONG


def derive(params: ModelParams) -> DerivedParams:
    if params.sigma <= 0:
        raise InvalidParameterError(
            "sigma must be positive; the sigma=0 case has dedicated no-environment functions"
        )
    s2 = params.sigma ** 2
    m = params.alpha - 0.5 * s2
    eta = -2.0 * m / (params.beta * s2)
    gamma = 4.0 * params.c / (params.beta * s2)
    theta_cap = max(m / s2, -1.0)
    return DerivedParams(m, eta, gamma, theta_cap, classify(m, params.sigma), params)


def branching_mechanism(params: ModelParams, lam: float) -> float:
    if lam < 0:
        raise InvalidParameterError(f"lambda must be nonnegative, got {lam}")
    return -params.alpha * lam + params.c * lam ** (params.beta + 1.0)
