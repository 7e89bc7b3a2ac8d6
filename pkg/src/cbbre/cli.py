"""Command-line interface: ``cbbre {classify, yaglom-curve, mc, verify}``.

Output is CSV by default (``#`` comment lines carry metadata, floats use 17
significant digits) or a single JSON object ``{"meta": ..., "rows": [...]}``.
Exit codes: 0 success, 2 invalid input, 3 numerical or statistical failure.
"""

from __future__ import annotations

import argparse
import csv
import io
import json
import math
import os
import platform
import shlex
import sys
import time
from dataclasses import dataclass
from typing import Callable, Iterable

import numpy as np

from . import __version__
from .model import InvalidParameterError, ModelParams, derive

SCHEMA_VERSION = 1
EXIT_OK, EXIT_INVALID, EXIT_NUMERIC = 0, 2, 3

DEFAULT_LAMBDAS = [0.1, 0.2, 0.5, 1.0, 2.0, 5.0, 10.0]
MC_KINDS = ("duality", "survival", "conditioned", "dufresne", "bh12", "betatrans", "sde")
SUITES = ("specialfn", "identities", "weak", "mc-cross", "all")


class UsageError(Exception):
    """Bad command-line input (exit code 2)."""


class CheckFailure(Exception):
    """A numerical check or strict-mode warning failed (exit code 3)."""


# ---------------------------------------------------------------------------
# Parsing helpers
# ---------------------------------------------------------------------------

def _float_list(text: str) -> list[float]:
    try:
        vals = [float(tok) for tok in text.split(",") if tok.strip()]
    except ValueError as exc:
        raise argparse.ArgumentTypeError(f"expected a comma-separated list of numbers: {text!r}") from exc
    if not vals:
        raise argparse.ArgumentTypeError("empty list")
    return vals


def _seed(text: str) -> int:
    v = int(text)
    if not 0 <= v < 2 ** 64:
        raise argparse.ArgumentTypeError("seed must be a 64-bit unsigned integer")
    return v


def read_args_file(path: str) -> list[str]:
    """Turn a flat ``key=value`` file into ``--key value`` tokens.

    Blank lines and ``#`` comments are skipped; a key without ``=`` is a
    boolean flag.
    """
    out: list[str] = []
    with open(path, encoding="utf-8") as fh:
        for raw in fh:
            line = raw.strip()
            if not line or line.startswith("#"):
                continue
            key, sep, value = line.partition("=")
            key = key.strip().lstrip("-").replace("_", "-")
            out.append(f"--{key}")
            if sep:
                out.extend(shlex.split(value.strip()) or [""])
    return out


def _expand_args_from(argv: list[str]) -> list[str]:
    out: list[str] = []
    it = iter(argv)
    for tok in it:
        if tok == "--args-from":
            path = next(it, None)
            if path is None:
                raise UsageError("--args-from needs a path")
            out.extend(read_args_file(path))
        elif tok.startswith("--args-from="):
            out.extend(read_args_file(tok.split("=", 1)[1]))
        else:
            out.append(tok)
    return out


def _add_model_flags(p: argparse.ArgumentParser, defaults: bool = True) -> None:
    g = p.add_argument_group("model")
    g.add_argument("--alpha", type=float, default=0.0 if defaults else None)
    g.add_argument("--sigma", type=float, default=1.0 if defaults else None)
    g.add_argument("--c", type=float, default=1.0 if defaults else None)
    g.add_argument("--beta", type=float, default=1.0 if defaults else None)


def _add_output_flags(p: argparse.ArgumentParser) -> None:
    g = p.add_argument_group("output")
    g.add_argument("--out", help="write to this file instead of stdout")
    g.add_argument("--format", choices=("csv", "json"), default="csv")


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="cbbre", description=__doc__.splitlines()[0])
    parser.add_argument("--version", action="version", version=f"cbbre {__version__}")
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("classify", help="regime and derived constants")
    _add_model_flags(p)
    _add_output_flags(p)

    p = sub.add_parser("yaglom-curve", help="closed-form Yaglom Laplace transform on a lambda grid")
    _add_model_flags(p)
    p.add_argument("--lambda", dest="lam", type=_float_list, default=DEFAULT_LAMBDAS)
    p.add_argument("--check", action="store_true", help="add per-regime column and deviation")
    p.add_argument("--no-env", action="store_true", help="sigma = 0 classical formula")
    p.add_argument("--tol", type=float, default=1e-9)
    _add_output_flags(p)

    p = sub.add_parser("mc", help="Monte Carlo estimators")
    _add_model_flags(p)
    p.add_argument("--kind", choices=MC_KINDS, required=True)
    p.add_argument("--z", type=_float_list, default=[1.0])
    p.add_argument("--lambda", dest="lam", type=_float_list, default=[1.0],
                   help="use 'inf' for the survival limit (betatrans)")
    p.add_argument("--t", type=_float_list, default=[1.0])
    p.add_argument("--b", type=_float_list, default=[2.0], help="Dufresne drift(s)")
    p.add_argument("--paths", type=int, default=100_000)
    p.add_argument("--steps", type=int, default=None, help="grid steps over the longest horizon")
    p.add_argument("--dt", type=float, default=None,
                   help="max Brownian-clock step (duality) or SDE step (sde)")
    p.add_argument("--eps-jump", type=float, default=0.05, help="jump cutoff for beta < 1 (sde)")
    p.add_argument("--scheme", choices=("bridge", "trapezoid"), default="bridge")
    p.add_argument("--seed", type=_seed, required=True)
    p.add_argument("--threads", type=int, default=None)
    p.add_argument("--strict", action="store_true", help="escalate warnings to exit code 3")
    _add_output_flags(p)

    p = sub.add_parser("verify", help="run a verification suite")
    p.add_argument("--suite", choices=SUITES, default="all")
    p.add_argument("--fast", action="store_true", help="reduced sizes, 5-sigma bands")
    p.add_argument("--seed", type=_seed, default=20240601)
    p.add_argument("--threads", type=int, default=None)
    _add_output_flags(p)
    return parser


# ---------------------------------------------------------------------------
# Output
# ---------------------------------------------------------------------------

def _fmt(v) -> str:
    if isinstance(v, bool):
        return str(v).lower()
    if isinstance(v, (float, np.floating)):
        return format(float(v), ".17g")
    return str(v)


def _jsonable(v):
    if isinstance(v, (np.floating, float)):
        v = float(v)
        return v if math.isfinite(v) else str(v)
    if isinstance(v, np.integer):
        return int(v)
    if isinstance(v, dict):
        return {k: _jsonable(x) for k, x in v.items()}
    if isinstance(v, (list, tuple)):
        return [_jsonable(x) for x in v]
    return v


def render(meta: dict, rows: list[dict], fmt: str) -> str:
    if fmt == "json":
        return json.dumps({"meta": _jsonable(meta), "rows": _jsonable(rows)}, indent=2) + "\n"
    buf = io.StringIO()
    for k, v in meta.items():
        buf.write(f"# {k}: {json.dumps(_jsonable(v))}\n")
    if rows:
        cols: list[str] = []
        for r in rows:
            cols.extend(k for k in r if k not in cols)
        w = csv.writer(buf, lineterminator="\n")
        w.writerow(cols)
        for r in rows:
            w.writerow([_fmt(r.get(c, "")) for c in cols])
    return buf.getvalue()


def _emit(args, meta: dict, rows: list[dict]) -> None:
    text = render(meta, rows, args.format)
    if args.out:
        with open(args.out, "w", encoding="utf-8") as fh:
            fh.write(text)
    else:
        sys.stdout.write(text)


def _meta(args, **extra) -> dict:
    meta = {"schema": SCHEMA_VERSION, "command": args.command, "cbbre": __version__,
            "numpy": np.__version__, "python": platform.python_version()}
    for k in ("alpha", "sigma", "c", "beta"):
        if getattr(args, k, None) is not None:
            meta[k] = getattr(args, k)
    meta.update(extra)
    return meta


def _params(args) -> ModelParams:
    return ModelParams(args.alpha, args.sigma, args.c, args.beta)


# ---------------------------------------------------------------------------
# Commands
# ---------------------------------------------------------------------------

def cmd_classify(args) -> int:
    params = _params(args)
    if params.sigma == 0:
        raise UsageError("sigma = 0 has no environment; use `yaglom-curve --no-env` for the "
                         "classical branching formulas")
    d = derive(params)
    row = {"m": d.m, "eta": d.eta, "gamma": d.gamma, "theta_cap": d.theta_cap,
           "regime": d.regime.value}
    _emit(args, _meta(args), [row])
    return EXIT_OK


def cmd_yaglom_curve(args) -> int:
    from .yaglom import csbp_no_env_yaglom, yaglom_curve

    params = _params(args)
    lams = sorted(args.lam)
    if args.no_env:
        if params.sigma != 0:
            params = ModelParams(params.alpha, 0.0, params.c, params.beta)
        rows = [{"lambda": lam, "L": csbp_no_env_yaglom(lam, params)} for lam in lams]
        _emit(args, _meta(args, sigma=0.0, regime="no-env"), rows)
        return EXIT_OK
    if params.sigma == 0:
        raise UsageError("sigma = 0 requires --no-env")
    d = derive(params)
    curve = yaglom_curve(d, lams, check=args.check)
    rows = []
    for i, lam in enumerate(curve.lambdas):
        row = {"lambda": lam, "L": curve.values[i]}
        if curve.regime_values is not None:
            row["L_regime"] = curve.regime_values[i]
            row["abs_dev"] = abs(curve.values[i] - curve.regime_values[i])
        rows.append(row)
    meta = _meta(args, regime=d.regime.value, monotone=curve.is_monotone())
    if args.check:
        meta["max_deviation"] = curve.max_deviation
        meta["tol"] = args.tol
    _emit(args, meta, rows)
    if args.check and not (curve.max_deviation <= args.tol and curve.is_monotone()):
        print(f"error: unified/per-regime deviation {curve.max_deviation:.3e} exceeds tol "
              f"{args.tol:.1e} or curve not monotone", file=sys.stderr)
        return EXIT_NUMERIC
    return EXIT_OK


def _path_config(args, n_paths: int | None = None):
    from .montecarlo import PathConfig

    return PathConfig(n_paths=n_paths or args.paths, master_seed=args.seed, n_steps=args.steps,
                      max_step=args.dt or 0.01, threads=args.threads, scheme=args.scheme)


def _est(e, prefix: str = "") -> dict:
    return {f"{prefix}mean": e.mean, f"{prefix}stderr": e.stderr, f"{prefix}n": e.n}


def cmd_mc(args) -> int:
    from . import montecarlo as mc

    cfg = _path_config(args)
    kind = args.kind
    rows: list[dict] = []
    warnings: list[str] = []
    meta = _meta(args, kind=kind, seed=args.seed, paths=args.paths, steps=args.steps,
                 dt=args.dt, scheme=args.scheme)

    if kind == "dufresne":
        for b in args.b:
            r = mc.dufresne_check(b, cfg)
            if not r.truncation_ok:
                warnings.append(f"truncation criterion unmet for b={b}")
            rows.append({"b": b, "horizon": r.horizon, **_est(r.mean), "second_moment": r.second_moment.mean,
                         "second_moment_stderr": r.second_moment.stderr, "variance": r.variance,
                         "variance_stderr": r.variance_stderr, "mean_z": r.mean_z,
                         "second_moment_z": r.second_moment_z, "seed": args.seed})
    elif kind == "bh12":
        d = derive(_params(args))
        g = d.gamma
        b = d.beta

        def gfun(a, lam=args.lam[0]):
            k = 0.0 if math.isinf(lam) else lam ** (-b)
            return (g / (2.0 * a) + k) ** (-1.0 / b)

        r = mc.bh12_check(gfun, args.t, cfg, time_scale=d.tau(1.0))
        for t, e in zip(r.ts, r.scaled):
            rows.append({"t": t, **_est(e), "limit": r.limit, "ratio": e.mean / r.limit, "seed": args.seed})
    else:
        params = _params(args)
        if params.sigma == 0:
            raise UsageError("Monte Carlo estimators need sigma > 0")
        d = derive(params)
        meta["regime"] = d.regime.value
        if kind == "duality":
            for t in args.t:
                for z in args.z:
                    for lam in args.lam:
                        e = mc.duality_lt(z, lam, t, d, cfg)
                        rows.append({"t": t, "z": z, "lambda": lam, **_est(e), "seed": args.seed})
        elif kind == "survival":
            for t in args.t:
                for z in args.z:
                    e = mc.survival_mc(z, t, d, cfg)
                    rows.append({"t": t, "z": z, **_est(e), "seed": args.seed})
        elif kind == "conditioned":
            from .yaglom import yaglom_lt

            for row in mc.conditioned_lt_mc(list(args.z), list(args.lam), list(args.t), d, cfg):
                rows.append({"t": row.t, "z": row.z, "lambda": row.lam, **_est(row.estimate),
                             "survival": row.survival.mean, "survival_stderr": row.survival.stderr,
                             "yaglom_limit": yaglom_lt(d, row.lam), "seed": args.seed})
        elif kind == "betatrans":
            for t in args.t:
                for lam in args.lam:
                    direct, flipped = mc.shifted_moment(lam, t, d, cfg)
                    rows.append({"t": t, "lambda": lam, **_est(direct, "direct_"),
                                 **_est(flipped, "flipped_"), "z_score": direct.z_score(flipped),
                                 "seed": args.seed})
        elif kind == "sde":
            from .sde import SdeConfig, estimate_lt_sde

            scfg = SdeConfig(dt=args.dt or 1e-3, jump_cutoff=args.eps_jump)
            meta["eps_jump"] = args.eps_jump
            for t in args.t:
                for z in args.z:
                    for lam in args.lam:
                        e = estimate_lt_sde(z, lam, t, d, scfg, args.paths, args.seed)
                        rows.append({"t": t, "z": z, "lambda": lam, **_est(e), "seed": args.seed})
    if warnings:
        meta["warnings"] = warnings
    _emit(args, meta, rows)
    for w in warnings:
        print(f"warning: {w}", file=sys.stderr)
    if warnings and args.strict:
        return EXIT_NUMERIC
    return EXIT_OK


# ---------------------------------------------------------------------------
# Verification suites
# ---------------------------------------------------------------------------

@dataclass
class Check:
    suite: str
    name: str
    value: float
    reference: float
    tol: float
    passed: bool
    seconds: float = 0.0

    def row(self) -> dict:
        return {"suite": self.suite, "check": self.name, "value": self.value,
                "reference": self.reference, "tol": self.tol,
                "verdict": "pass" if self.passed else "FAIL", "seconds": self.seconds}


def _rel(a: float, b: float) -> float:
    return abs(a - b) / abs(b) if b != 0 else abs(a)


def _suite_specialfn(fast: bool) -> Iterable[Check]:
    from .specialfn import bessel_k0_integral, exp_integral_e1, gamma_fn, kummer_u

    for x in np.geomspace(0.1, 50.0, 8 if fast else 25):
        lhs, rhs = gamma_fn(x + 1.0), x * gamma_fn(x)
        yield Check("specialfn", f"gamma recursion x={x:.4g}", lhs, rhs, 1e-9, _rel(lhs, rhs) <= 1e-9)
    for a in (0.5, 1.0, 2.0, 4.0):
        for r in (0.1, 1.0, 10.0):
            v = kummer_u(a, a + 1.0, r)
            ref = r ** (-a)
            yield Check("specialfn", f"U(a,a+1,r) a={a} r={r}", v, ref, 1e-9, _rel(v, ref) <= 1e-9)
    for a in (0.01, 0.1, 1.0, 5.0, 20.0):
        v1, v2 = bessel_k0_integral(a, 1), bessel_k0_integral(a, 2)
        yield Check("specialfn", f"K0 representations a={a}", v1, v2, 1e-8, _rel(v1, v2) <= 1e-8)
    v, ref = kummer_u(1.0, 1.0, 1.0), math.e * exp_integral_e1(1.0)
    yield Check("specialfn", "U(1,1,1) = e E1(1)", v, ref, 1e-9, _rel(v, ref) <= 1e-9)


def _suite_identities(fast: bool) -> Iterable[Check]:
    from .weakkernel import KernelParams, moment_identity
    from .yaglom import yaglom_lt, yaglom_lt_regime

    for beta in (0.5, 1.0):
        for sigma2_m in (-0.25, -1.0, -2.0):  # m / sigma^2 for weak, intermediate, strong
            params = ModelParams(sigma2_m + 0.5, 1.0, 1.0, beta)
            d = derive(params)
            for lam in (0.1, 0.5, 1.0, 2.0, 10.0):
                u, r = yaglom_lt(d, lam), yaglom_lt_regime(d, lam)
                yield Check("identities", f"unified vs {d.regime.value} beta={beta} lam={lam}",
                            u, r, 1e-9, _rel(u, r) <= 1e-9)
    grid = [(2.0, 1.0, 4.0, math.inf), (1.0, 1.0, 4.0, 1.0)]
    if not fast:
        grid = [(p, eta, g, lam) for p in (0.75, 1.0, 2.0, 3.5) for eta in (0.5, 1.0, 1.5)
                for g in (2.0, 4.0) for lam in (0.5, 1.0, 2.0, math.inf) if p > eta / 2]
    for p, eta, g, lam in grid:
        lhs, rhs = moment_identity(p, lam, KernelParams(eta, g, 1.0))
        yield Check("identities", f"moment p={p} eta={eta} gamma={g} lam={lam}", lhs, rhs, 1e-5,
                    _rel(lhs, rhs) <= 1e-5)


def _suite_weak(fast: bool) -> Iterable[Check]:
    from .specialfn import kummer_u
    from .weakkernel import (KernelParams, alt_weak_survival_constant, joint_density_normalization,
                             weak_survival_constant, yaglom_ratio_weak)

    kp = KernelParams(1.0, 4.0, 1.0)
    lams = (1.0,) if fast else (0.5, 1.0, 2.0)
    zs = (0.5, 2.0) if fast else (0.5, 1.0, 2.0, 5.0)
    for lam in lams:
        r = 2.0 * lam
        ref = math.sqrt(r) * kummer_u(0.5, 1.0, r)
        for z in zs:
            v = yaglom_ratio_weak(z, lam, kp)
            yield Check("weak", f"Phi/Psi z={z} lam={lam}", v, ref, 1e-4, abs(v - ref) <= 1e-4)
    cases = [(1.0, 1.0)] if fast else [(t, e) for t in (0.5, 1.0, 2.0) for e in (0.5, 1.0)]
    for t, eta in cases:
        v = joint_density_normalization(t, eta).value
        yield Check("weak", f"joint density mass t={t} eta={eta}", v, 1.0, 1e-4, abs(v - 1.0) <= 1e-4)
    if not fast:
        d = derive(ModelParams(0.0, 1.0, 1.0, 1.0))
        a, b = weak_survival_constant(1.0, d), alt_weak_survival_constant(1.0, d)
        yield Check("weak", "survival constant: Psi route vs phi route", a, b, 1e-3, _rel(a, b) <= 1e-3)


def _suite_mc_cross(fast: bool, seed: int, threads: int | None) -> Iterable[Check]:
    from . import montecarlo as mc
    from .sde import SdeConfig, estimate_lt_sde
    from .weakkernel import f_of_t_numeric

    k = 5.0 if fast else 3.0
    n = 20_000 if fast else 100_000
    weak = derive(ModelParams(0.0, 1.0, 1.0, 1.0))
    strong = derive(ModelParams(-1.5, 1.0, 1.0, 1.0))
    inter = derive(ModelParams(-0.5, 1.0, 1.0, 1.0))
    cfg = lambda s, n=n: mc.PathConfig(n, seed + s, threads=threads)

    for b in (0.5, 2.0):
        r = mc.dufresne_check(b, cfg(1, 5 * n if not fast else n))
        yield Check("mc-cross", f"Dufresne mean b={b}", r.mean.mean, b, k, r.mean_z <= k)
        yield Check("mc-cross", f"Dufresne second moment b={b}", r.second_moment.mean, b * (b + 1),
                    k, r.second_moment_z <= k)
    for name, d, lam in (("weak", weak, 1.0), ("strong", strong, math.inf)):
        direct, flipped = mc.shifted_moment(lam, 2.0, d, cfg(2))
        yield Check("mc-cross", f"drift flip {name}", direct.mean, flipped.mean, k,
                    direct.z_score(flipped) <= k)
    a = mc.duality_lt(1.0, 1.0, 1.0, inter, cfg(3))
    s = estimate_lt_sde(1.0, 1.0, 1.0, inter, SdeConfig(dt=1e-3), n, seed + 4)
    yield Check("mc-cross", "SDE vs duality (intermediate, t=1)", s.mean, a.mean, k, a.z_score(s) <= k)
    q = f_of_t_numeric(1.0, 1.0, 1.0, weak)
    e = mc.duality_lt(1.0, 1.0, 1.0, weak, cfg(5))
    f_mc = 1.0 - e.mean
    yield Check("mc-cross", "F(t) quadrature vs MC (weak, t=1)", q.value, f_mc, k,
                abs(q.value - f_mc) <= k * (e.stderr + q.err_estimate))


def run_suites(suite: str, fast: bool, seed: int, threads: int | None) -> list[Check]:
    runners: dict[str, Callable[[], Iterable[Check]]] = {
        "specialfn": lambda: _suite_specialfn(fast),
        "identities": lambda: _suite_identities(fast),
        "weak": lambda: _suite_weak(fast),
        "mc-cross": lambda: _suite_mc_cross(fast, seed, threads),
    }
    names = list(runners) if suite == "all" else [suite]
    checks: list[Check] = []
    for name in names:
        it = iter(runners[name]())
        while True:
            t0 = time.perf_counter()
            try:
                c = next(it)
            except StopIteration:
                break
            c.seconds = time.perf_counter() - t0
            checks.append(c)
    return checks


def cmd_verify(args) -> int:
    checks = run_suites(args.suite, args.fast, args.seed, args.threads)
    failed = [c for c in checks if not c.passed]
    meta = _meta(args, suite=args.suite, fast=args.fast, seed=args.seed,
                 n_checks=len(checks), n_failed=len(failed))
    _emit(args, meta, [c.row() for c in checks])
    for c in failed:
        print(f"FAIL {c.suite}: {c.name}: value={c.value!r} reference={c.reference!r} tol={c.tol}",
              file=sys.stderr)
    return EXIT_NUMERIC if failed else EXIT_OK


COMMANDS = {
    "classify": cmd_classify,
    "yaglom-curve": cmd_yaglom_curve,
    "mc": cmd_mc,
    "verify": cmd_verify,
}


def main(argv: list[str] | None = None) -> int:
    argv = list(sys.argv[1:] if argv is None else argv)
    parser = build_parser()
    try:
        argv = _expand_args_from(argv)
    except (OSError, UsageError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_INVALID
    try:
        args = parser.parse_args(argv)
    except SystemExit as exc:
        return EXIT_OK if exc.code in (0, None) else EXIT_INVALID
    if getattr(args, "threads", None) is None and os.environ.get("CBBRE_THREADS"):
        try:
            args.threads = int(os.environ["CBBRE_THREADS"])
        except ValueError:
            print("error: CBBRE_THREADS must be an integer", file=sys.stderr)
            return EXIT_INVALID
    try:
        return COMMANDS[args.command](args)
    except (UsageError, InvalidParameterError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_INVALID
    except (ArithmeticError, CheckFailure) as exc:
        print(f"numerical failure: {exc}", file=sys.stderr)
        return EXIT_NUMERIC


if __name__ == "__main__":  # pragma: no cover
    raise SystemExit(main())
