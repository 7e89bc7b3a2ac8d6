"""Weak-regime kernels, the functions Phi and Psi, and their measures.

Conventions used throughout:

* ``theta_hw(r, t)`` is the Hartman-Watson type kernel entering the joint
  density of ``(A_t^(eta), eta*t + B_t)``.
* ``G(y, v)`` is the time-independent kernel and ``G_t`` its finite-time
  analogue at Brownian time ``tau = sigma^2 beta^2 t / 4``.
* Double integrals over ``(y, v)`` are computed with ``s = ln y`` outermost
  and ``v`` innermost.  For ``y -> inf`` the integrand behaves like
  ``y**(eta/2 - p) * (a ln y + b)``; the part beyond ``s = S_TAIL`` is added
  in closed form from that expansion (the neglected terms are
  ``O(S_TAIL * exp(-S_TAIL))`` relative).
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Callable, Sequence

import numpy as np
from scipy import special as _sp

from .model import DerivedParams, InvalidParameterError, Regime
from .quadrature import (
    QuadResult,
    QuadratureError,
    integrate_1d,
    integrate_2d,
    integrate_damped_oscillatory,
)
from .specialfn import kummer_u_scaled

__all__ = [
    "KernelParams",
    "WeakKernelError",
    "theta_hw",
    "theta_hw_array",
    "joint_density",
    "joint_density_normalization",
    "x_marginal",
    "g_kernel",
    "g_t_kernel",
    "moment_identity",
    "moment_rhs",
    "psi_fn",
    "phi_fn",
    "nu_psi_density",
    "nu_phi_density",
    "nu_phi_density_w",
    "mgf_nu",
    "yaglom_ratio_weak",
    "f_of_t_numeric",
    "survival_prob_numeric",
    "weak_survival_constant",
    "phi_a",
    "alt_weak_survival_constant",
    "SCALE_CONSTANT",
]

_EULER = 0.5772156649015329
_S_LOW = -7.0  # exp(-1/(2y)) < 1e-230 below this s = ln y
S_TAIL = 30.0


class WeakKernelError(ArithmeticError):
    """A weak-regime integral failed to reach its tolerance."""


@dataclass(frozen=True)
class KernelParams:
    eta: float
    gamma: float
    beta: float
    sigma: float = 1.0
    m: float | None = None

    def __post_init__(self):
        if not self.eta > 0:
            raise InvalidParameterError(f"eta must be positive, got {self.eta}")
        if not self.gamma > 0:
            raise InvalidParameterError(f"gamma must be positive, got {self.gamma}")
        if not 0 < self.beta <= 1:
            raise InvalidParameterError(f"beta must lie in (0, 1], got {self.beta}")
        if not self.eta < 2.0 / self.beta:
            raise InvalidParameterError("kernel parameters require the weak regime eta < 2/beta")

    @classmethod
    def from_derived(cls, d: DerivedParams) -> "KernelParams":
        if d.regime is not Regime.WEAK:
            raise InvalidParameterError(f"weak regime required, got {d.regime.value}")
        return cls(d.eta, d.gamma, d.beta, d.sigma, d.m)

    @property
    def c(self) -> float:
        return self.gamma * self.beta * self.sigma ** 2 / 4.0


def SCALE_CONSTANT(sigma: float, beta: float) -> float:
    """``4 sqrt(2) / (sigma^3 beta^3 sqrt(pi))``, the weak-regime time constant."""
    return 4.0 * math.sqrt(2.0) / (sigma ** 3 * beta ** 3 * math.sqrt(math.pi))


def _as_kp(kp) -> KernelParams:
    if isinstance(kp, KernelParams):
        return kp
    if isinstance(kp, DerivedParams):
        return KernelParams.from_derived(kp)
    raise TypeError("expected KernelParams or DerivedParams")


def _require(res: QuadResult, what: str) -> QuadResult:
    if not res.converged:
        raise WeakKernelError(f"{what}: no convergence (value={res.value!r}, err={res.err_estimate!r})")
    return res


# ---------------------------------------------------------------------------
# theta(r, t)
# ---------------------------------------------------------------------------

def _log_sinh(u):
    u = np.asarray(u, dtype=float)
    with np.errstate(divide="ignore"):
        return u + np.log1p(-np.exp(-2.0 * u)) - math.log(2.0)


def _theta_log_envelope(u, r, t):
    """log of |integrand| without the sine, relative to nothing."""
    return (math.pi ** 2 - u * u) / (2.0 * t) - r * np.cosh(u) + _log_sinh(u)


def _theta_cutoff(r: np.ndarray, t: float, drop: float = 50.0) -> np.ndarray:
    """Per-``r`` upper limit ``U`` beyond which the envelope is ``exp(-drop)``
    below its maximum; the envelope is log-concave so bisection is exact."""
    r = np.asarray(r, dtype=float)

    def env(u):
        return -u * u / (2.0 * t) - r * np.cosh(u) + _log_sinh(np.maximum(u, 1e-300))

    # Maximizer: derivative -u/t - r sinh u + coth u = 0 (decreasing in u).
    lo = np.zeros_like(r)
    hi = np.full_like(r, math.sqrt(t) + 1.0)
    for _ in range(200):
        grow = (-hi / t - r * np.sinh(hi) + 1.0 / np.tanh(hi)) > 0
        if not np.any(grow):
            break
        hi = np.where(grow, 2.0 * hi, hi)
    for _ in range(80):
        mid = 0.5 * (lo + hi)
        pos = (-mid / t - r * np.sinh(mid) + 1.0 / np.tanh(mid)) > 0
        lo = np.where(pos, mid, lo)
        hi = np.where(pos, hi, mid)
    u_star = 0.5 * (lo + hi)
    target = env(u_star) - drop
    lo = u_star.copy()
    hi = u_star + 1.0
    for _ in range(200):
        up = env(hi) > target
        if not np.any(up):
            break
        hi = np.where(up, lo + 2.0 * (hi - lo), hi)
    for _ in range(80):
        mid = 0.5 * (lo + hi)
        above = env(mid) > target
        lo = np.where(above, mid, lo)
        hi = np.where(above, hi, mid)
    return hi


_GL_X, _GL_W = np.polynomial.legendre.leggauss(16)


def theta_hw_array(r, t: float, rtol: float = 1e-10, *, over_r: bool = False,
                   return_error: bool = False, max_panels: int = 4096):
    """Vectorized ``theta(r, t)`` by composite Gauss-Legendre on ``[0, U(r)]``.

    Panels are doubled until successive values agree to ``rtol`` (or to the
    roundoff floor set by the absolute integrand).  With ``over_r=True``
    returns ``theta(r, t) / r``, which stays finite as ``r -> 0``.
    """
    r = np.atleast_1d(np.asarray(r, dtype=float))
    if np.any(r <= 0) or not t > 0:
        raise InvalidParameterError("theta_hw requires r > 0 and t > 0")
    shape = r.shape
    r = r.ravel()
    u_max = _theta_cutoff(r, t)
    pref = 1.0 / math.sqrt(2.0 * math.pi ** 3 * t)

    def composite(idx, panels):
        rr = r[idx][:, None, None]
        h = (u_max[idx] / panels)[:, None, None]
        k = np.arange(panels)[None, :, None]
        u = h * (k + 0.5 + 0.5 * _GL_X[None, None, :])
        logabs = _theta_log_envelope(u, rr, t)
        f = np.exp(logabs) * np.sin(math.pi * u / t)
        w = 0.5 * h * _GL_W[None, None, :]
        return np.sum(f * w, axis=(1, 2)), np.sum(np.abs(f) * w, axis=(1, 2))

    out = np.empty_like(r)
    err = np.empty_like(r)
    panels = 4
    active = np.arange(r.size)
    prev, _ = composite(active, panels)
    while active.size:
        panels *= 2
        cur, l1 = composite(active, panels)
        diff = np.abs(cur - prev)
        floor = 1e3 * np.finfo(float).eps * l1
        done = diff <= np.maximum(rtol * np.abs(cur), floor)
        if panels >= max_panels:
            done[:] = True
        out[active[done]] = cur[done]
        err[active[done]] = np.maximum(diff[done], floor[done])
        active = active[~done]
        prev = cur[~done]
    scale = pref if over_r else pref * r
    val = (out * scale).reshape(shape)
    if return_error:
        return val, (err * np.abs(scale)).reshape(shape)
    return val


def theta_hw(r: float, t: float, rtol: float = 1e-10) -> float:
    """Scalar ``theta(r, t)`` via the damped-oscillatory integrator.

    Raises :class:`WeakKernelError` when cancellation leaves fewer than the
    requested digits (typically ``r -> 0`` with ``t`` large).
    """
    if not (r > 0 and t > 0):
        raise InvalidParameterError("theta_hw requires r > 0 and t > 0")
    u_cap = float(_theta_cutoff(np.array([r]), t)[0])
    e0 = math.pi ** 2 / (2.0 * t)

    def f(u):
        return np.exp(_theta_log_envelope(u, r, t) - e0) * np.sin(math.pi * u / t)

    def absf(u):
        return np.exp(_theta_log_envelope(u, r, t) - e0)

    l1 = integrate_1d(absf, 0.0, u_cap, 1e-6, n_init=8).value
    if l1 == 0.0:
        raise WeakKernelError(f"theta_hw({r}, {t}): integrand underflows")
    res = integrate_damped_oscillatory(f, r, 200.0 * np.finfo(float).eps * l1, bound=1.0, u_cap=u_cap,
                                       rel_tol=0.1 * rtol)
    value = res.value
    floor = 200.0 * np.finfo(float).eps * l1
    if abs(value) * max(rtol, 1e-8) < floor or not res.converged:
        raise WeakKernelError(
            f"theta_hw({r}, {t}): cancellation limits accuracy "
            f"(value={value!r}, absolute-integral={l1!r})"
        )
    log_pref = math.log(r) - 0.5 * math.log(2.0 * math.pi ** 3 * t) + e0
    return math.copysign(math.exp(log_pref + math.log(abs(value))), value) if value else 0.0


# ---------------------------------------------------------------------------
# Matsumoto-Yor joint density
# ---------------------------------------------------------------------------

def joint_density(y, x, t: float, eta: float):
    """Joint density of ``(A_t^(eta), eta t + B_t)`` at ``(y, x)``."""
    y = np.asarray(y, dtype=float)
    x = np.asarray(x, dtype=float)
    y, x = np.broadcast_arrays(y, x)
    if np.any(y <= 0):
        raise InvalidParameterError("joint_density requires y > 0")
    r = np.exp(x - np.log(y))
    theta = theta_hw_array(r, t)
    log_rest = eta * x - 0.5 * eta * eta * t - np.log(y) - (1.0 + np.exp(2.0 * x)) / (2.0 * y)
    out = np.exp(log_rest) * theta
    return float(out) if out.ndim == 0 else out


def _marginal_integrand(x: float, s: np.ndarray, t: float, eta: float) -> np.ndarray:
    # In (x, r) coordinates with y = e^x / r the density is
    # e^{eta x - eta^2 t/2} r^-1 e^{-r cosh x} theta(r, t); put r = s / cosh x.
    ch = math.cosh(x)
    s = np.asarray(s, dtype=float)
    safe = np.where(s > 0, s, 1.0)
    th = theta_hw_array(safe / ch, t, over_r=True)
    val = math.exp(eta * x - 0.5 * eta * eta * t) * np.exp(-safe) * th / ch
    return np.where(s > 0, val, 0.0)


def x_marginal(x: float, t: float, eta: float, tol: float = 1e-9) -> float:
    """``int joint_density(y, x) dy``; equals the Normal(eta t, t) density."""
    res = integrate_1d(lambda s: _marginal_integrand(x, s, t, eta), 0.0, math.inf, tol,
                       abs_tol=1e-12)
    return _require(res, "x_marginal").value


def joint_density_normalization(t: float, eta: float, tol: float = 1e-7) -> QuadResult:
    """``int int joint_density dy dx`` by nested quadrature."""
    mu = eta * t
    sd = math.sqrt(t)
    lo, hi = mu - 12.0 * sd, mu + 12.0 * sd
    return integrate_2d(lambda x, s: _marginal_integrand(x, s, t, eta), (lo, hi), (0.0, math.inf),
                        tol, outer_kwargs={"n_init": 8}, inner_kwargs={"abs_tol": 1e-11, "max_evals": 20_000})


# ---------------------------------------------------------------------------
# G kernels
# ---------------------------------------------------------------------------

def _log_g(y, v, eta):
    a = np.sqrt(2.0 * v / y)
    h = 0.5 * eta - 1.0
    return (h * math.log(2.0) + h * np.log(y) - 0.5 / y + h * np.log(v) - v
            + np.log(_sp.k0e(a)) - a)


def g_kernel(y, v, eta: float):
    """``G(y, v) = 2^(eta/2-1) y^(eta/2-1) e^(-1/(2y)) v^(eta/2-1) e^-v K0(sqrt(2v/y))``."""
    y = np.asarray(y, dtype=float)
    v = np.asarray(v, dtype=float)
    if np.any(y <= 0) or np.any(v <= 0):
        raise InvalidParameterError("g_kernel requires y > 0 and v > 0")
    out = np.exp(_log_g(y, v, eta))
    return float(out) if out.ndim == 0 else out


def g_t_kernel(y, v, t: float, d):
    """Finite-time kernel ``G_t`` with ``theta`` at ``tau = sigma^2 beta^2 t / 4``."""
    kp = _as_kp(d)
    if kp.m is None:
        raise InvalidParameterError("g_t_kernel needs the drift m")
    y = np.asarray(y, dtype=float)
    v = np.asarray(v, dtype=float)
    y, v = np.broadcast_arrays(y, v)
    eta = kp.eta
    tau = kp.sigma ** 2 * kp.beta ** 2 * t / 4.0
    h = 0.5 * eta - 1.0
    log_rest = (h * math.log(2.0) + h * np.log(y) + h * np.log(v) - kp.m ** 2 * t / (2.0 * kp.sigma ** 2)
                - 0.5 / y - v)
    out = np.exp(log_rest) * np.reshape(theta_hw_array(np.sqrt(2.0 * v / y), tau), y.shape)
    return float(out) if out.ndim == 0 else out


# ---------------------------------------------------------------------------
# (y, v) integrals against G
# ---------------------------------------------------------------------------

def _v_singularity(eta: float) -> dict:
    h = 0.5 * eta - 1.0
    return {"singular_exponent": h} if abs(h) > 1e-14 else {}


def _tail_terms(kp: KernelParams, terms, tol: float) -> float:
    """Closed-form ``s > S_TAIL`` contribution.

    ``terms`` lists ``(coef, p, wv)``: for large ``y`` the weight is
    ``sum coef * y**-p * wv(v)``.  With ``K0(eps) ~ -ln(eps/2) - gamma_E`` the
    ``s``-integrand is ``2^(eta/2-1) e^(-delta s) (M0 s / 2 + M1)``.
    """
    eta = kp.eta
    total = 0.0
    for coef, p, wv in terms:
        delta = p - 0.5 * eta
        if delta <= 0:
            raise InvalidParameterError("moment exponent must exceed eta/2")
        h = 0.5 * eta - 1.0
        m0 = _require(integrate_1d(lambda v: wv(v) * v ** h * np.exp(-v), 0.0, math.inf, tol,
                                   **_v_singularity(eta)), "tail M0").value
        m1 = _require(integrate_1d(
            lambda v: wv(v) * v ** h * np.exp(-v) * (0.5 * math.log(2.0) - 0.5 * np.log(v) - _EULER),
            0.0, math.inf, tol, abs_tol=tol * abs(m0), **_v_singularity(eta)), "tail M1").value
        e = math.exp(-delta * S_TAIL)
        total += coef * 2.0 ** h * (0.5 * m0 * e * (S_TAIL / delta + 1.0 / delta ** 2) + m1 * e / delta)
    return total


def _yv_integral(kp: KernelParams, weight: Callable[[float, np.ndarray], np.ndarray],
                 tail_terms, tol: float) -> QuadResult:
    """``int_0^inf int_0^inf weight(y, v) G(y, v) dv dy``."""
    eta = kp.eta

    def f(s, v):
        y = math.exp(s)
        v = np.asarray(v, dtype=float)
        pos = v > 0
        vv = np.where(pos, v, 1.0)
        val = y * weight(y, vv) * np.exp(_log_g(y, vv, eta))
        return np.where(pos, val, 0.0)

    res = integrate_2d(f, (_S_LOW, S_TAIL), (0.0, math.inf), tol,
                       outer_kwargs={"n_init": 6},
                       inner_kwargs={**_v_singularity(eta), "abs_tol": 1e-300})
    tail = _tail_terms(kp, tail_terms, tol)
    return QuadResult(res.value + tail, res.err_estimate + 1e-12 * abs(tail), res.evals, res.converged)


def _lam_factor(lam: float, beta: float) -> float:
    """``2 lam^-beta``, zero for ``lam = inf``."""
    return 0.0 if math.isinf(lam) else 2.0 * lam ** (-beta)


def moment_rhs(p: float, lam: float, kp: KernelParams) -> float:
    """Closed form of ``int int (gamma y + 2 y v lam^-beta)^-p G dv dy``."""
    kp = _as_kp(kp)
    eta, g = kp.eta, kp.gamma
    if not p > 0.5 * eta:
        raise InvalidParameterError("moment identity requires p > eta/2")
    log_base = ((p - 2.0) * math.log(2.0) - p * math.log(g)
                + 2.0 * (math.lgamma(0.5 * eta) + math.lgamma(p - 0.5 * eta)) - math.lgamma(p))
    base = math.exp(log_base)
    if math.isinf(lam):
        return base
    return base * kummer_u_scaled(0.5 * eta, 1.0, 0.5 * g * lam ** kp.beta)


def moment_identity(p: float, lam: float, kp, tol: float = 1e-9) -> tuple[float, float]:
    """Return ``(lhs, rhs)``: the double integral by quadrature and its closed form."""
    kp = _as_kp(kp)
    rhs = moment_rhs(p, lam, kp)
    k = _lam_factor(lam, kp.beta)
    g = kp.gamma

    def weight(y, v):
        return (y * (g + k * v)) ** (-p)

    terms = [(1.0, p, lambda v: (g + k * v) ** (-p))]
    res = _require(_yv_integral(kp, weight, terms, tol), "moment_identity")
    return res.value, rhs


def _laplace_weight(z: float, kp: KernelParams, lam: float):
    k = _lam_factor(lam, kp.beta)
    g, b = kp.gamma, kp.beta

    def weight(y, v):
        q = (y * (g + k * v)) ** (-1.0 / b)
        return -np.expm1(-z * q)

    # 1 - e^{-zq} = z q - z^2 q^2 / 2 + O(q^3); q ~ y^{-1/beta}.
    terms = [
        (z, 1.0 / b, lambda v: (g + k * v) ** (-1.0 / b)),
        (-0.5 * z * z, 2.0 / b, lambda v: (g + k * v) ** (-2.0 / b)),
    ]
    return weight, terms


def phi_fn(z: float, lam: float, kp, tol: float = 1e-9) -> float:
    """``Phi(z, lam) = int int (1 - exp(-z (gamma y + 2 y v lam^-beta)^(-1/beta))) G dv dy``."""
    kp = _as_kp(kp)
    if not (z > 0 and lam > 0):
        raise InvalidParameterError("phi_fn requires z > 0 and lam > 0")
    weight, terms = _laplace_weight(z, kp, lam)
    return _require(_yv_integral(kp, weight, terms, tol), "phi_fn").value


def psi_fn(z: float, kp, tol: float = 1e-9) -> float:
    """``Psi(z) = int int (1 - exp(-z (gamma y)^(-1/beta))) G dv dy``."""
    kp = _as_kp(kp)
    if not z > 0:
        raise InvalidParameterError("psi_fn requires z > 0")
    weight, terms = _laplace_weight(z, kp, math.inf)
    return _require(_yv_integral(kp, weight, terms, tol), "psi_fn").value


def yaglom_ratio_weak(z: float, lam: float, kp, tol: float = 1e-9) -> float:
    """Numeric ``Phi(z, lam) / Psi(z)``."""
    return phi_fn(z, lam, kp, tol) / psi_fn(z, kp, tol)


# ---------------------------------------------------------------------------
# Reference measures
# ---------------------------------------------------------------------------

def _v_integral(f, eta: float, tol: float) -> float:
    return _require(integrate_1d(f, 0.0, math.inf, tol, abs_tol=1e-300, **_v_singularity(eta)),
                    "v-integral").value


def nu_psi_density(x: float, kp, tol: float = 1e-10) -> float:
    """Density of ``nu_Psi``: ``beta/gamma e^(-beta(1-eta)x) int G(e^(-beta x)/gamma, v) dv``."""
    kp = _as_kp(kp)
    eta, g, b = kp.eta, kp.gamma, kp.beta
    y = math.exp(-b * x) / g
    if 0.5 / y > 740.0:
        return 0.0
    inner = _v_integral(lambda v: np.exp(_log_g(y, np.where(v > 0, v, 1.0), eta)) * (v > 0), eta, tol)
    return b / g * math.exp(-b * (1.0 - eta) * x) * inner


def nu_phi_density(x: float, lam: float, kp, tol: float = 1e-10) -> float:
    """Density of ``nu_Phi`` in the ``v`` parametrization."""
    kp = _as_kp(kp)
    eta, g, b = kp.eta, kp.gamma, kp.beta
    k = _lam_factor(lam, b)
    ebx = math.exp(-b * x)

    def f(v):
        pos = v > 0
        vv = np.where(pos, v, 1.0)
        den = g + k * vv
        y = ebx / den
        val = b * math.exp(-b * (1.0 - eta) * x) / den * np.exp(_log_g(y, vv, eta))
        return np.where(pos, val, 0.0)

    return _v_integral(f, eta, tol)


def nu_phi_density_w(x: float, lam: float, kp, tol: float = 1e-10) -> float:
    """Density of ``nu_Phi`` in its defining ``w`` parametrization,
    ``(beta^2 lam^beta / 2) int_0^{gamma^(-1/beta)} e^(-beta(1-eta)x) w^-1
    G(e^(-beta x) w^beta, lam^beta (w^-beta - gamma) / 2) dw``."""
    kp = _as_kp(kp)
    eta, g, b = kp.eta, kp.gamma, kp.beta
    lb = lam ** b
    w_hi = g ** (-1.0 / b)

    pref = 0.5 * b * b * lb * math.exp(-b * (1.0 - eta) * x)
    ebx = math.exp(-b * x)

    def f_gap(gap):
        # Integrand at w = w_hi - gap; w^-beta - gamma is formed without cancellation.
        gap = np.asarray(gap, dtype=float)
        inside = (gap > 0) & (gap < w_hi)
        gg = np.where(inside, gap, 0.5 * w_hi)
        w = w_hi - gg
        v = 0.5 * lb * g * np.expm1(-b * np.log1p(-gg / w_hi))
        val = pref / w * np.exp(_log_g(ebx * w ** b, v, eta))
        return np.where(inside, val, 0.0)

    # Near w_hi, v vanishes linearly, giving a (w_hi - w)^(eta/2-1) endpoint.
    half = 0.5 * w_hi
    h = 0.5 * eta - 1.0
    sing = {"singular_exponent": h, "singular_width": half} if abs(h) > 1e-14 else {}
    right = integrate_1d(f_gap, 0.0, half, tol, abs_tol=1e-300, **sing)
    left = integrate_1d(f_gap, half, w_hi, tol, abs_tol=1e-300)
    return _require(left, "nu_phi_density_w").value + _require(right, "nu_phi_density_w").value


def _nu_left_tail(q: float, den: Callable[[np.ndarray], np.ndarray], kp: KernelParams,
                  x_lo: float, tol: float) -> float:
    """``int_{-inf}^{x_lo} e^(q x) nu(dx)`` from the large-``y`` form of ``G``.

    With ``D(v)`` the denominator of the measure (``gamma`` for ``nu_Psi``),
    the density behaves like ``beta 2^h e^(beta eta x/2) (A (-beta x) + B)``
    with relative corrections ``O(e^(beta x))``.
    """
    eta, b = kp.eta, kp.beta
    h = 0.5 * eta - 1.0

    def base(v):
        return den(v) ** (-1.0 - h) * v ** h * np.exp(-v)

    a1 = 0.5 * _v_integral(base, eta, tol)
    a0 = _v_integral(lambda v: base(v) * (0.5 * (math.log(2.0) - np.log(den(v)) - np.log(v)) - _EULER),
                     eta, tol)
    c = q + 0.5 * b * eta
    e = math.exp(c * x_lo)
    return b * 2.0 ** h * (a1 * b * e * (-x_lo / c + 1.0 / c ** 2) + a0 * e / c)


def mgf_nu(q: float, which: str, lam: float, kp, tol: float = 1e-8) -> tuple[float, float]:
    """``(lhs, rhs)`` for ``int e^(q x) nu(dx)``; ``which`` is ``'psi'`` or ``'phi'``.

    The left side integrates the density numerically down to
    ``x = -30/beta`` and adds the remaining tail in closed form.
    """
    kp = _as_kp(kp)
    eta, b, g = kp.eta, kp.beta, kp.gamma
    if not q > -0.5 * b * eta:
        raise InvalidParameterError("mgf_nu requires q > -beta*eta/2")
    which = which.lower()
    if which == "psi":
        dens = lambda x: nu_psi_density(x, kp, 0.1 * tol)
        lam_rhs = math.inf
        den = lambda v: np.full(np.shape(v), g)
    elif which == "phi":
        dens = lambda x: nu_phi_density(x, lam, kp, 0.1 * tol)
        lam_rhs = lam
        k = _lam_factor(lam, b)
        den = lambda v: g + k * v
    else:
        raise ValueError("which must be 'psi' or 'phi'")

    def f(xs):
        return np.array([math.exp(q * x) * dens(x) for x in np.ravel(xs)])

    x_lo = -30.0 / b
    x_hi = math.log(1500.0 / g) / b  # e^{-1/(2y)} < e^{-740} beyond
    body = _require(integrate_1d(f, x_lo, x_hi, tol, n_init=8), "mgf_nu").value
    lhs = body + _nu_left_tail(q, den, kp, x_lo, 0.1 * tol)
    rhs = moment_rhs(q / b + eta, lam_rhs, kp)
    return lhs, rhs


# ---------------------------------------------------------------------------
# Finite-time quantities
# ---------------------------------------------------------------------------

def _duality_integral(z: float, lam: float, t: float, kp: KernelParams, tol: float) -> QuadResult:
    """``E[1 - exp(-z xi)]`` under the joint law of ``(A_tau, eta tau + B_tau)``."""
    eta, g, b = kp.eta, kp.gamma, kp.beta
    tau = kp.sigma ** 2 * b ** 2 * t / 4.0
    k = 0.0 if math.isinf(lam) else lam ** (-b)

    def f(x, s):
        s = np.asarray(s, dtype=float)
        pos = s > 0
        ss = np.where(pos, s, 1.0)
        ch = math.cosh(x)
        r = ss / ch
        # A = y = e^x / r,  endpoint = x.
        bracket = g * math.exp(x) / r + k * math.exp(2.0 * x)
        xi = bracket ** (-1.0 / b)
        th = theta_hw_array(r, tau, over_r=True)
        val = -np.expm1(-z * xi) * math.exp(eta * x - 0.5 * eta * eta * tau) * np.exp(-ss) * th / ch
        return np.where(pos, val, 0.0)

    mu, sd = eta * tau, math.sqrt(tau)
    # Absolute tolerances follow the expected size exp(-eta^2 tau/2) tau^(-3/2)
    # of the result, so that large-t values are resolved in relative terms.
    scale = math.exp(-0.5 * eta * eta * tau) * min(1.0, tau ** -1.5)
    return integrate_2d(f, (mu - 14.0 * sd, mu + 14.0 * sd), (0.0, math.inf), tol,
                        outer_kwargs={"n_init": 8, "abs_tol": 1e-12 * scale},
                        # theta carries roundoff of order eps * exp(pi^2 / (2 tau)); for tau
                        # near 0.25 the inner values cannot be resolved below ~1e-10.
                        inner_kwargs={"abs_tol": 1e-10 * scale, "max_evals": 20_000})


def f_of_t_numeric(z: float, lam: float, t: float, d, tol: float = 1e-6) -> QuadResult:
    """``F(t) = E^z[1 - exp(-lam Z_t)]`` from the Matsumoto-Yor density."""
    kp = _as_kp(d)
    if not (z > 0 and lam > 0 and t > 0):
        raise InvalidParameterError("f_of_t_numeric requires z, lam, t > 0")
    return _duality_integral(z, lam, t, kp, tol)


def survival_prob_numeric(z: float, t: float, d, tol: float = 1e-6) -> QuadResult:
    """``P^z(Z_t > 0)`` from the Matsumoto-Yor density."""
    kp = _as_kp(d)
    return _duality_integral(z, math.inf, t, kp, tol)


def weak_survival_constant(z: float, d, tol: float = 1e-9) -> float:
    """``lim t^(3/2) e^(m^2 t/(2 sigma^2)) P^z(Z_t > 0) = 4 sqrt 2 / (sigma^3 beta^3 sqrt pi) Psi(z)``."""
    kp = _as_kp(d)
    return SCALE_CONSTANT(kp.sigma, kp.beta) * psi_fn(z, kp, tol)


def phi_a(a: float, eta: float, tol: float = 1e-9) -> float:
    """The function ``phi(a)`` as a double integral over ``(xi, u)``."""
    if not a > 0:
        raise InvalidParameterError("phi_a requires a > 0")
    p = 0.5 * (eta + 2.0)
    hu = 0.5 * (eta - 1.0)
    log_pref = math.lgamma(p) - a - 0.5 * eta * math.log(a) - math.log(math.sqrt(2.0) * math.pi)

    def f(u, xi):
        xi = np.asarray(xi, dtype=float)
        # sinh*cosh*xi / (u + a cosh^2)^p = tanh*xi * C^(1-p) / (u/C + a)^p with
        # C = cosh^2 taken in log form so large xi cannot overflow.
        log_c = 2.0 * xi + 2.0 * np.log1p(np.exp(-2.0 * xi)) - 2.0 * math.log(2.0)
        val = np.tanh(xi) * xi * np.exp((1.0 - p) * log_c) / (u * np.exp(-log_c) + a) ** p
        return u ** hu * math.exp(-u) * val

    outer_kw = {"abs_tol": 1e-300}
    if abs(hu) > 1e-14:
        outer_kw["singular_exponent"] = hu
    res = integrate_2d(f, (0.0, math.inf), (0.0, math.inf), tol,
                       outer_kwargs=outer_kw, inner_kwargs={"abs_tol": 1e-300})
    return math.exp(log_pref) * _require(res, "phi_a").value


def alt_weak_survival_constant(z: float, d, tol: float = 1e-5) -> float:
    """``(8/(beta^3 sigma^3)) int (1 - exp(-z (beta sigma^2 a/(2c))^(1/beta))) phi(a) da``.

    The outer integral runs over ``s = ln a``.
    """
    kp = _as_kp(d)
    b, sig, c = kp.beta, kp.sigma, kp.c
    k = b * sig ** 2 / (2.0 * c)

    def f(ss):
        out = np.empty(np.shape(ss))
        for i, s in enumerate(np.ravel(ss)):
            a = math.exp(s)
            w = -math.expm1(-z * (k * a) ** (1.0 / b))
            out.flat[i] = a * w * phi_a(a, kp.eta, 0.1 * tol) if w > 0 else 0.0
        return out

    # For small a the integrand in s = ln a decays like |s| e^{(1/beta - eta/2) s}.
    s_lo = max(-30.0 / (1.0 / b - 0.5 * kp.eta), -700.0)
    lower = integrate_1d(f, s_lo, 0.0, tol, n_init=2)
    upper = integrate_1d(f, 0.0, math.log(800.0), tol, n_init=2)
    total = _require(lower, "alt constant").value + _require(upper, "alt constant").value
    return 8.0 / (b ** 3 * sig ** 3) * total
