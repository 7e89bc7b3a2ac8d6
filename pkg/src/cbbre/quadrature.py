"""Deterministic adaptive quadrature.

All integrands are vectorized: ``f(x)`` receives a 1-D float array and must
return an array of the same shape.  The engine is a globally adaptive
21-point Gauss-Kronrod rule with QUADPACK-style error estimates.  Each
refinement round bisects the intervals carrying most of the error and
evaluates every new node in one call, so numpy-heavy integrands stay fast.

Semi-infinite ranges are mapped to ``[0, 1)`` with ``u = s / (1 - s)``.
Integrable algebraic singularities ``(x - lower)**p`` at the lower end are
removed on the first panel by the substitution ``x = lower + w**(1/(p+1))``.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Callable

import numpy as np

__all__ = [
    "QuadResult",
    "QuadratureError",
    "integrate_1d",
    "integrate_2d",
    "integrate_damped_oscillatory",
]

_EPS = np.finfo(float).eps

# Kronrod abscissae (non-negative half) and weights; odd entries are the
# 10-point Gauss nodes.
_XGK = np.array([
    0.995657163025808080735527280689003,
    0.973906528517171720077964012084452,
    0.930157491355708226001207180059508,
    0.865063366688984510732096688423493,
    0.780817726586416897063717578345042,
    0.679409568299024406234327365114874,
    0.562757134668604683339000099272694,
    0.433395394129247190799265943165784,
    0.294392862701460198131126603103866,
    0.148874338981631210884826001129720,
    0.000000000000000000000000000000000,
])
_WGK = np.array([
    0.011694638867371874278064396062192,
    0.032558162307964727478818972459390,
    0.054755896574351996031381300244580,
    0.075039674810919952767043140916190,
    0.093125454583697605535065465083366,
    0.109387158802297641899210590325805,
    0.123491976262065851077958109831074,
    0.134709217311473325928054001771707,
    0.142775938577060080797094273138717,
    0.147739104901338491374841515972068,
    0.149445554002916905664936468389821,
])
_WG = np.array([
    0.066671344308688137593568809893332,
    0.149451349150580593145776339657697,
    0.219086362515982043995534934228163,
    0.269266719309996355091226921569469,
    0.295524224714752870173892994651338,
])

# Full 21-node layout on [-1, 1].
_NODES = np.concatenate([-_XGK[:-1], [0.0], _XGK[:-1][::-1]])
_KW = np.concatenate([_WGK[:-1], [_WGK[-1]], _WGK[:-1][::-1]])
_GW = np.zeros(21)
_GW[1:10:2] = _WG
_GW[11:20:2] = _WG[::-1]


class QuadratureError(ArithmeticError):
    """Raised when an integrand produces a non-finite value."""


@dataclass(frozen=True)
class QuadResult:
    value: float
    err_estimate: float
    evals: int
    converged: bool

    def __float__(self) -> float:
        return self.value


def _gk21(f, a: np.ndarray, b: np.ndarray):
    """Apply the Gauss-Kronrod pair to each interval ``[a[i], b[i]]``."""
    half = 0.5 * (b - a)
    mid = 0.5 * (b + a)
    x = mid[:, None] + half[:, None] * _NODES[None, :]
    fx = np.asarray(f(x.ravel()), dtype=float).reshape(x.shape)
    if not np.all(np.isfinite(fx)):
        bad = x[~np.isfinite(fx)][0]
        raise QuadratureError(f"integrand is not finite at x={bad!r}")
    res_k = (fx @ _KW) * half
    res_g = (fx @ _GW) * half
    reskh = 0.5 * (fx @ _KW)
    resabs = (np.abs(fx) @ _KW) * np.abs(half)
    resasc = (np.abs(fx - reskh[:, None]) @ _KW) * np.abs(half)
    err = np.abs(res_k - res_g)
    with np.errstate(divide="ignore", invalid="ignore"):
        scaled = np.where(
            (resasc != 0.0) & (err != 0.0),
            resasc * np.minimum(1.0, (200.0 * err / resasc) ** 1.5),
            err,
        )
    floor = 50.0 * _EPS * resabs
    err = np.where(resabs > np.finfo(float).tiny / (50.0 * _EPS), np.maximum(scaled, floor), scaled)
    return res_k, err, resabs


def _adaptive(f, lower: float, upper: float, tol: float, abs_tol: float,
              max_evals: int, n_init: int = 1) -> QuadResult:
    edges = np.linspace(lower, upper, n_init + 1)
    a, b = edges[:-1].copy(), edges[1:].copy()
    val, err, _ = _gk21(f, a, b)
    evals = 21 * a.size
    frozen = np.zeros(a.size, dtype=bool)
    while True:
        total = float(np.sum(val))
        total_err = float(np.sum(err))
        target = max(tol * abs(total), abs_tol)
        if total_err <= target:
            return QuadResult(total, total_err, evals, True)
        if evals >= max_evals:
            return QuadResult(total, total_err, evals, False)
        # Bisect the largest-error intervals that together carry half the error.
        order = np.argsort(-np.where(frozen, -1.0, err), kind="stable")
        cum = np.cumsum(err[order])
        n_split = int(np.searchsorted(cum, 0.5 * total_err)) + 1
        n_split = min(n_split, max(1, (max_evals - evals) // 42))
        pick = order[:n_split]
        pick = pick[~frozen[pick]]
        if pick.size == 0:
            return QuadResult(total, total_err, evals, False)
        pa, pb = a[pick], b[pick]
        pm = 0.5 * (pa + pb)
        tiny = np.abs(pb - pa) <= 1e3 * _EPS * np.maximum(np.abs(pm), np.finfo(float).tiny)
        if np.any(tiny):
            frozen[pick[tiny]] = True
            pick, pa, pb, pm = pick[~tiny], pa[~tiny], pb[~tiny], pm[~tiny]
            if pick.size == 0:
                continue
        na = np.concatenate([pa, pm])
        nb = np.concatenate([pm, pb])
        nval, nerr, _ = _gk21(f, na, nb)
        evals += 21 * na.size
        keep = np.ones(a.size, dtype=bool)
        keep[pick] = False
        a = np.concatenate([a[keep], na])
        b = np.concatenate([b[keep], nb])
        val = np.concatenate([val[keep], nval])
        err = np.concatenate([err[keep], nerr])
        frozen = np.concatenate([frozen[keep], np.zeros(na.size, dtype=bool)])
        # Keep interval order canonical so sums are reproducible.
        idx = np.argsort(a, kind="stable")
        a, b, val, err, frozen = a[idx], b[idx], val[idx], err[idx], frozen[idx]


def _power_panel(f, lower: float, width: float, p: float):
    """Integrand on ``[0, width**(p+1)]`` after removing ``(x-lower)**p``."""
    k = 1.0 / (p + 1.0)

    def g(w):
        w = np.asarray(w, dtype=float)
        x = lower + w ** k
        # (x-lower)**p * dx/dw is constant; evaluate f/(x-lower)**p stably.
        with np.errstate(divide="ignore", invalid="ignore"):
            jac = k * w ** (k - 1.0)
            out = f(x) * jac
        out = np.where(w > 0.0, out, 0.0)
        return out

    return g, width ** (p + 1.0)


def _map_upper_infinite(f, lower: float):
    def g(s):
        s = np.asarray(s, dtype=float)
        om = 1.0 - s
        return f(lower + s / om) / (om * om)

    return g


def _map_lower_infinite(f, upper: float):
    def g(s):
        s = np.asarray(s, dtype=float)
        om = 1.0 - s
        return f(upper - s / om) / (om * om)

    return g


def _combine(parts: list[QuadResult]) -> QuadResult:
    return QuadResult(
        float(sum(p.value for p in parts)),
        float(sum(p.err_estimate for p in parts)),
        int(sum(p.evals for p in parts)),
        all(p.converged for p in parts),
    )


def integrate_1d(
    f: Callable[[np.ndarray], np.ndarray],
    lower: float,
    upper: float,
    tol: float = 1e-10,
    *,
    abs_tol: float = 0.0,
    singular_exponent: float | None = None,
    singular_width: float = 1.0,
    max_evals: int = 200_000,
    n_init: int = 1,
) -> QuadResult:
    """Integrate ``f`` over ``[lower, upper]``; either bound may be infinite.

    Convergence means ``err_estimate <= max(tol * |value|, abs_tol)``.  The
    call never raises on non-convergence; it returns ``converged=False``.
    A non-finite integrand value raises :class:`QuadratureError`.

    ``singular_exponent=p`` declares ``f(x) ~ (x - lower)**p`` with
    ``p > -1``; the first panel of width ``singular_width`` is then
    integrated after the substitution ``x = lower + w**(1/(p+1))``.
    """
    if tol <= 0.0 and abs_tol <= 0.0:
        raise ValueError("need a positive tolerance")
    lower, upper = float(lower), float(upper)
    if lower == upper:
        return QuadResult(0.0, 0.0, 0, True)
    if lower > upper:
        r = integrate_1d(f, upper, lower, tol, abs_tol=abs_tol, max_evals=max_evals, n_init=n_init)
        return QuadResult(-r.value, r.err_estimate, r.evals, r.converged)
    if math.isinf(lower) and math.isinf(upper):
        left = integrate_1d(f, -math.inf, 0.0, tol, abs_tol=0.5 * abs_tol, max_evals=max_evals // 2)
        right = integrate_1d(f, 0.0, math.inf, tol, abs_tol=0.5 * abs_tol, max_evals=max_evals // 2)
        return _combine([left, right])

    parts: list[QuadResult] = []
    split_abs = abs_tol
    if singular_exponent is not None:
        p = float(singular_exponent)
        if p <= -1.0:
            raise ValueError("singular_exponent must exceed -1")
        if math.isinf(lower):
            raise ValueError("a singular lower endpoint must be finite")
        width = min(singular_width, upper - lower)
        g, w_hi = _power_panel(f, lower, width, p)
        split_abs = 0.5 * abs_tol
        parts.append(_adaptive(g, 0.0, w_hi, tol, split_abs, max_evals // 2))
        lower = lower + width
        if lower >= upper:
            return _combine(parts)
    if math.isinf(upper):
        g = _map_upper_infinite(f, lower)
        parts.append(_adaptive(g, 0.0, 1.0, tol, split_abs, max_evals, n_init))
    elif math.isinf(lower):
        g = _map_lower_infinite(f, upper)
        parts.append(_adaptive(g, 0.0, 1.0, tol, split_abs, max_evals, n_init))
    else:
        parts.append(_adaptive(f, lower, upper, tol, split_abs, max_evals, n_init))
    return _combine(parts)


def integrate_2d(
    f: Callable[[float, np.ndarray], np.ndarray],
    outer: tuple[float, float],
    inner: tuple[float, float],
    tol: float = 1e-8,
    *,
    outer_kwargs: dict | None = None,
    inner_kwargs: dict | None = None,
) -> QuadResult:
    """Nested integral ``int_outer dx int_inner dy f(x, y)``.

    ``f(x, y)`` gets a scalar ``x`` and a vector ``y``.  Inner integrals use
    tolerance ``tol / 10``.  Extra options for either level (singular
    exponents, absolute floors) go through ``outer_kwargs``/``inner_kwargs``.
    """
    outer_kwargs = dict(outer_kwargs or {})
    inner_kwargs = dict(inner_kwargs or {})
    inner_tol = tol / 10.0
    state = {"evals": 0, "ok": True}

    def g(xs):
        out = np.empty(np.shape(xs))
        for i, x in enumerate(np.ravel(xs)):
            r = integrate_1d(lambda y, x=x: f(x, y), inner[0], inner[1], inner_tol, **inner_kwargs)
            state["evals"] += r.evals
            state["ok"] &= r.converged
            out.flat[i] = r.value
        return out

    res = integrate_1d(g, outer[0], outer[1], tol, **outer_kwargs)
    err = res.err_estimate + inner_tol * abs(res.value)
    return QuadResult(res.value, err, res.evals + state["evals"], res.converged and state["ok"])


def integrate_damped_oscillatory(
    f: Callable[[np.ndarray], np.ndarray],
    envelope: float,
    tol: float,
    *,
    bound: float = 1.0,
    u_cap: float | None = None,
    rel_tol: float = 1e-10,
) -> QuadResult:
    """Integrate over ``[0, inf)`` an ``f`` with ``|f(u)| <= bound*exp(-envelope*cosh u)*sinh u``.

    The range is cut at ``U`` where the analytic tail
    ``bound * exp(-envelope*cosh U) / envelope`` is at most ``tol / 2``; the
    remaining interval is integrated adaptively to absolute accuracy
    ``tol / 2`` (or ``rel_tol`` relative, whichever is looser).  ``u_cap``
    optionally tightens ``U`` when the caller has its own tail bound; the
    caller is then responsible for that tail.
    """
    if envelope <= 0.0:
        raise ValueError("envelope decay rate must be positive")
    ratio = 2.0 * bound / (envelope * tol)
    c = max(1.0, math.log(ratio) / envelope) if ratio > 1.0 else 1.0
    u_max = math.acosh(c)
    tail = bound * math.exp(-envelope * c) / envelope
    if u_cap is not None and u_cap < u_max:
        u_max = u_cap
        tail = 0.5 * tol
    if u_max == 0.0:
        return QuadResult(0.0, tail, 0, True)
    res = integrate_1d(f, 0.0, u_max, rel_tol, abs_tol=0.5 * tol, n_init=4)
    return QuadResult(res.value, res.err_estimate + tail, res.evals, res.converged)
