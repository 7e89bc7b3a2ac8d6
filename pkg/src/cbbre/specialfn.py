"""Special functions used by the closed forms.

Gamma and K0 delegate to the standard library and scipy.  Kummer's U and
the exponential integral are evaluated from their integral
representations with :mod:`cbbre.quadrature`; the integral forms of K0
are provided separately so the library value can be cross-checked.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np
from scipy import special as _sp

from .quadrature import QuadResult, integrate_1d

__all__ = [
    "SpecialFnConfig",
    "SpecialFunctionError",
    "gamma_fn",
    "lgamma",
    "bessel_k0",
    "bessel_k0_integral",
    "kummer_u",
    "log_kummer_u",
    "kummer_u_scaled",
    "exp_integral_e1",
]


class SpecialFunctionError(ArithmeticError):
    """Argument outside the domain or a quadrature that failed to converge."""


@dataclass(frozen=True)
class SpecialFnConfig:
    rel_tol: float = 1e-12
    max_evals: int = 200_000

    def __post_init__(self):
        if not 0.0 < self.rel_tol <= 1e-3:
            raise ValueError("rel_tol must lie in (0, 1e-3]")
        if self.max_evals < 1000:
            raise ValueError("max_evals must be at least 1000")


DEFAULT_CONFIG = SpecialFnConfig()


def _check(res: QuadResult, what: str) -> QuadResult:
    if not res.converged:
        raise SpecialFunctionError(
            f"{what}: quadrature did not converge (value={res.value!r}, err={res.err_estimate!r})"
        )
    return res


def gamma_fn(x: float) -> float:
    if not x > 0:
        raise SpecialFunctionError(f"gamma_fn requires x > 0, got {x}")
    return math.gamma(x)


def lgamma(x: float) -> float:
    if not x > 0:
        raise SpecialFunctionError(f"lgamma requires x > 0, got {x}")
    return math.lgamma(x)


def bessel_k0(a):
    """Modified Bessel function K0 (scalar or array)."""
    arr = np.asarray(a, dtype=float)
    if np.any(arr <= 0):
        raise SpecialFunctionError("bessel_k0 requires a > 0")
    out = _sp.k0(arr)
    return float(out) if np.ndim(out) == 0 else out


def bessel_k0_integral(a: float, representation: int = 1,
                       cfg: SpecialFnConfig = DEFAULT_CONFIG) -> float:
    """K0 from one of its two real integral representations.

    1: ``a * int_0^inf u exp(-a cosh u) sinh u du``
    2: ``(1/2) int_0^inf t^-1 exp(-t - a^2/(4t)) dt`` (evaluated in ``s = ln t``)
    """
    if not a > 0:
        raise SpecialFunctionError(f"bessel_k0_integral requires a > 0, got {a}")
    if representation == 1:
        # a*cosh(U) >= 745 makes the integrand underflow past U.
        u_max = math.acosh(max(1.0, 745.0 / a))
        res = integrate_1d(lambda u: a * u * np.exp(-a * np.cosh(u)) * np.sinh(u),
                           0.0, u_max, cfg.rel_tol, max_evals=cfg.max_evals, n_init=8)
    elif representation == 2:
        q = 0.25 * a * a
        s_hi = math.log(745.0)
        s_lo = math.log(q / 745.0)
        res = integrate_1d(lambda s: 0.5 * np.exp(-np.exp(s) - q * np.exp(-s)),
                           s_lo, s_hi, cfg.rel_tol, max_evals=cfg.max_evals, n_init=8)
    else:
        raise ValueError("representation must be 1 or 2")
    return _check(res, "bessel_k0_integral").value


def _scaled_integral(a: float, b: float, r: float, cfg: SpecialFnConfig) -> float:
    """``int_0^inf e^-s s^(a-1) (1 + s/r)^(b-a-1) ds`` for a > 0, r > 0."""
    e = b - a - 1.0

    def f(s):
        with np.errstate(divide="ignore"):
            ls = np.log(s)
        return np.exp(-s + (a - 1.0) * ls + e * np.log1p(s / r))

    # Split at the scale where (1 + s/r) changes behaviour, and remove the
    # s^(a-1) endpoint singularity on the first panel.
    split = min(1.0, r)
    parts = []
    res1 = integrate_1d(f, 0.0, split, cfg.rel_tol, singular_exponent=a - 1.0,
                        singular_width=split, max_evals=cfg.max_evals)
    parts.append(_check(res1, "kummer_u"))
    res2 = integrate_1d(f, split, math.inf, cfg.rel_tol, max_evals=cfg.max_evals, n_init=4)
    parts.append(_check(res2, "kummer_u"))
    return sum(p.value for p in parts)


def _validate_u(a: float, b: float, r: float) -> None:
    if not a > 0:
        raise SpecialFunctionError(f"kummer_u requires a > 0, got a={a}")
    if not r > 0:
        raise SpecialFunctionError(f"kummer_u requires r > 0, got r={r}")
    if not math.isfinite(b):
        raise SpecialFunctionError(f"kummer_u requires finite b, got b={b}")


def kummer_u_scaled(a: float, b: float, r: float, cfg: SpecialFnConfig = DEFAULT_CONFIG) -> float:
    """``r**a * U(a, b, r)``, which tends to 1 as ``r`` grows."""
    _validate_u(a, b, r)
    return _scaled_integral(a, b, r, cfg) / math.gamma(a) if a < 170 else math.exp(
        math.log(_scaled_integral(a, b, r, cfg)) - math.lgamma(a))


def log_kummer_u(a: float, b: float, r: float, cfg: SpecialFnConfig = DEFAULT_CONFIG) -> float:
    """``ln U(a, b, r)``."""
    _validate_u(a, b, r)
    return -a * math.log(r) - math.lgamma(a) + math.log(_scaled_integral(a, b, r, cfg))


def kummer_u(a: float, b: float, r: float, cfg: SpecialFnConfig = DEFAULT_CONFIG) -> float:
    """Kummer's confluent hypergeometric function of the second kind,

    ``U(a, b, r) = Gamma(a)^-1 int_0^inf e^(-r t) t^(a-1) (1+t)^(b-a-1) dt``,

    evaluated after the substitution ``t = s / r``.
    """
    return math.exp(log_kummer_u(a, b, r, cfg))


def exp_integral_e1(x: float, cfg: SpecialFnConfig = DEFAULT_CONFIG) -> float:
    """``E1(x) = int_1^inf e^(-x t) / t dt = e^-x int_0^inf e^(-x s) / (1+s) ds``."""
    if not x > 0:
        raise SpecialFunctionError(f"exp_integral_e1 requires x > 0, got {x}")
    res = integrate_1d(lambda s: np.exp(-x * s) / (1.0 + s), 0.0, math.inf, cfg.rel_tol,
                       max_evals=cfg.max_evals, n_init=4)
    return math.exp(-x) * _check(res, "exp_integral_e1").value
