"""Command line front end: YAML job configs in, CSV grids and a JSON summary out.

Exit codes: 0 success, 2 configuration error, 3 numerical failure.
"""

from __future__ import annotations

import argparse
import csv
import json
import logging
import os
import sys
from dataclasses import dataclass, field
from pathlib import Path
from typing import Any, Callable, Sequence

import numpy as np
import yaml

from .blockspace import BlockSignature, nevanlinna_defect
from .boundary import U_from_hermitian, check_extension, extend_U, validate_U
from .errors import ConfigError, NumericFailure, WeylkitError
from .oddorder import (
    OddOrderExpression,
    fidelity_residual,
    odd_deficiency,
    reduce_to_system,
)
from .propagator import MODE_TOL, deficiency_indices
from .shipped import CATALOG
from .spectral import (
    WeightedFunction,
    boundary_residual_a,
    bump,
    green_apply,
    hat_block_residual,
    parseval_defect,
    resolvent_residual,
    roundtrip_error,
    sf0_criteria,
    spectrum_readout,
    stieltjes_inversion,
    transform,
)
from .system import (
    AbstractForm,
    ConstantTail,
    PolynomialSampler,
    Regular,
    Sampler,
    SymmetricSystem,
    TableSampler,
    check_definite,
)
from .weyl import (
    WeylContext,
    boundary_residuals,
    make_tau,
    psd_bound_min_eigenvalue,
    symmetry_residual,
    triangularity_residual,
    v_tau,
    x_matrix,
)

log = logging.getLogger("weylkit")

TASKS = ("indices", "mfun", "sigma", "resolve", "fourier", "roundtrip", "check")

EXIT_OK = 0
EXIT_CONFIG = 2
EXIT_NUMERIC = 3


@dataclass(frozen=True)
class TolProfile:
    route: float
    nevanlinna: float
    relation: float
    quad: float
    mode: float


PROFILES = {
    "default": TolProfile(route=1e-8, nevanlinna=1e-7, relation=1e-10, quad=1e-9, mode=MODE_TOL),
    "strict": TolProfile(route=1e-10, nevanlinna=1e-9, relation=1e-12, quad=1e-11, mode=MODE_TOL),
}


# ---------------------------------------------------------------------------
# Config parsing
# ---------------------------------------------------------------------------


def _complex(x: Any) -> complex:
    if isinstance(x, (int, float)) and not isinstance(x, bool):
        return complex(x)
    if isinstance(x, (list, tuple)) and len(x) == 2 and all(isinstance(v, (int, float)) for v in x):
        return complex(float(x[0]), float(x[1]))
    raise ConfigError(f"expected a number or an [re, im] pair, got {x!r}")


def _matrix(x: Any, shape: tuple[int, int] | None = None) -> np.ndarray:
    if not isinstance(x, list) or not x or not all(isinstance(r, list) for r in x):
        raise ConfigError(f"expected a matrix as a list of rows, got {x!r}")
    out = np.array([[_complex(v) for v in row] for row in x], dtype=complex)
    if out.ndim != 2:
        raise ConfigError("ragged matrix rows")
    if shape is not None and out.shape != shape:
        raise ConfigError(f"matrix has shape {out.shape}, expected {shape}")
    return out


class _EntrywiseSampler(Sampler):
    """Matrix sampler assembled from per-entry scalar samplers."""

    def __init__(self, entries: list[list[Callable[[np.ndarray], np.ndarray]]], constant: bool):
        self.entries = entries
        self.shape = (len(entries), len(entries[0]))
        self.is_constant = constant

    def at(self, ts: np.ndarray) -> np.ndarray:
        ts = np.atleast_1d(np.asarray(ts, dtype=float))
        out = np.zeros((ts.size, *self.shape), dtype=complex)
        for i, row in enumerate(self.entries):
            for j, fn in enumerate(row):
                out[:, i, j] = fn(ts)
        return out


def _entry(x: Any) -> tuple[str, Any]:
    if isinstance(x, dict):
        if "polynomial" in x:
            return "poly", [_complex(c) for c in x["polynomial"]]
        if "table" in x:
            tab = x["table"]
            if tab.get("interpolation", "cubic") != "cubic":
                raise ConfigError("only cubic table interpolation is supported")
            ts = [float(t) for t in tab["ts"]]
            vals = np.array([_complex(v) for v in tab["values"]]).reshape(len(ts), 1, 1)
            try:
                return "table", TableSampler(ts, vals)
            except ValueError as exc:
                raise ConfigError(str(exc)) from exc
        raise ConfigError(f"unknown sampler entry {sorted(x)}")
    return "poly", [_complex(x)]


def _sampler(x: Any, n: int) -> Sampler:
    if not isinstance(x, list) or len(x) != n or any(not isinstance(r, list) or len(r) != n for r in x):
        raise ConfigError(f"coefficient must be an {n}x{n} matrix of entries")
    parsed = [[_entry(v) for v in row] for row in x]
    if all(kind == "poly" for row in parsed for kind, _ in row):
        return PolynomialSampler([[c for _, c in row] for row in parsed])

    def wrap(kind, payload):
        if kind == "table":
            return lambda ts, s=payload: s.at(ts)[:, 0, 0]
        coeffs = np.array(payload, dtype=complex)
        return lambda ts, c=coeffs: np.polyval(c[::-1], ts)

    entries = [[wrap(k, p) for k, p in row] for row in parsed]
    return _EntrywiseSampler(entries, constant=False)


def _endpoint(spec: Any, n: int):
    if not isinstance(spec, dict) or len(spec) != 1:
        raise ConfigError("endpoint must have exactly one of regular, constant_tail, abstract_form")
    (kind, body), = spec.items()
    if kind == "regular":
        return Regular(float(body["b"]))
    if kind == "constant_tail":
        return ConstantTail(float(body["t0"]), _matrix(body["B"], (n, n)), _matrix(body["Delta"], (n, n)))
    if kind == "abstract_form":
        Bt = body.get("B_tail")
        Dt = body.get("Delta_tail")
        if (Bt is None) != (Dt is None):
            raise ConfigError("B_tail and Delta_tail must be given together")
        return AbstractForm(
            float(body["t_cut"]),
            _matrix(body["omega"], (n, n)),
            None if Bt is None else _matrix(Bt, (n, n)),
            None if Dt is None else _matrix(Dt, (n, n)),
        )
    raise ConfigError(f"unknown endpoint kind {kind!r}")


def _U(spec: Any, sig: BlockSignature, tol: float):
    spec = spec if spec is not None else {"hermitian": np.zeros((sig.nu_plus, sig.nu_plus)).tolist()}
    if "hermitian" in spec:
        H = _matrix(spec["hermitian"], (sig.nu_plus, sig.nu_plus)) if sig.nu_plus else np.zeros((0, 0))
        return U_from_hermitian(sig, H)
    if "U_hat" in spec and "U_one" in spec:
        Uh = np.asarray(_matrix(spec["U_hat"]) if sig.nu_hat else np.zeros((0, sig.n)))
        U1 = _matrix(spec["U_one"], (sig.nu_plus, sig.n))
        return validate_U(sig, Uh, U1, tol)
    raise ConfigError("U needs either hermitian or U_hat with U_one")


@dataclass
class Job:
    """Parsed configuration: the problem, the task and its numeric knobs."""

    ctx: WeylContext
    task: str
    tau: Any
    knobs: dict
    profile: TolProfile
    expr: OddOrderExpression | None = None
    reduction: Any = None
    name: str = "job"
    raw: dict = field(default_factory=dict)


def _problem(cfg: dict, profile: TolProfile):
    prob = cfg.get("problem")
    if not isinstance(prob, dict) or len(prob) != 1:
        raise ConfigError("problem must have exactly one of system, oddorder, shipped")
    (kind, body), = prob.items()
    mode_tol = float(cfg.get("numeric", {}).get("mode_tol", profile.mode))
    if kind == "shipped":
        if body not in CATALOG:
            raise ConfigError(f"unknown shipped problem {body!r}; choose from {sorted(CATALOG)}")
        p = CATALOG[body]()
        red = p.reduction
        return WeylContext.build(p.sys, p.U, mode_tol), (red.expr if red else None), red, p.name
    if kind == "system":
        s = body["signature"]
        sig = BlockSignature(int(s["nu_plus"]), int(s.get("nu_hat", 0)))
        n = sig.n
        sysm = SymmetricSystem(
            sig,
            float(body.get("a", 0.0)),
            _endpoint(body["endpoint"], n),
            _sampler(body["B"], n),
            _sampler(body["Delta"], n),
            name=str(body.get("name", "system")),
        )
        U = _U(body.get("U"), sig, profile.relation)
        return WeylContext.build(sysm, U, mode_tol), None, None, sysm.name
    if kind == "oddorder":
        m = int(body["m"])
        expr = OddOrderExpression(
            m,
            p=[_complex(c).real for c in body["p"]],
            q=[_complex(c).real for c in body["q"]],
            name=str(body.get("name", "oddorder")),
        )
        a = float(body.get("a", 0.0))
        ep = body.get("endpoint")
        endpoint = None
        if ep is not None:
            if "regular" not in ep:
                raise ConfigError("odd-order endpoint must be regular or omitted (constant tail)")
            endpoint = Regular(float(ep["regular"]["b"]))
        red = reduce_to_system(expr, a, endpoint)
        U = _U(body.get("U"), red.sys.sig, profile.relation)
        return WeylContext.build(red.sys, U, mode_tol), expr, red, expr.name
    raise ConfigError(f"unknown problem kind {kind!r}")


def _tau(spec: Any, ctx: WeylContext):
    spec = spec or {"kind": "tau0"}
    kind = spec.get("kind", "tau0")
    if kind == "tau0":
        return make_tau(ctx.trip, "tau0")
    if kind in ("truncated", "general"):
        return make_tau(ctx.trip, kind, _matrix(spec["D0"]), _matrix(spec["D1"]))
    raise ConfigError(f"unknown boundary parameter kind {kind!r}")


def parse_config(cfg: dict, task: str | None = None, profile: str = "default") -> Job:
    """Validate a loaded config mapping and build the job."""
    if not isinstance(cfg, dict):
        raise ConfigError("config must be a mapping")
    if profile not in PROFILES:
        raise ConfigError(f"unknown tolerance profile {profile!r}")
    prof = PROFILES[profile]
    task = task or cfg.get("task")
    if task not in TASKS:
        raise ConfigError(f"task must be one of {TASKS}, got {task!r}")
    try:
        ctx, expr, red, name = _problem(cfg, prof)
        tau = _tau(cfg.get("tau"), ctx)
    except (KeyError, TypeError) as exc:
        raise ConfigError(f"malformed problem declaration: {exc}") from exc
    except ValueError as exc:
        raise ConfigError(str(exc)) from exc
    knobs = dict(cfg.get("grids", {}))
    knobs.update(cfg.get("numeric", {}))
    return Job(ctx, task, tau, knobs, prof, expr, red, name, cfg)


def load_config(path: str | Path) -> dict:
    try:
        with open(path, encoding="utf-8") as fh:
            return yaml.safe_load(fh)
    except OSError as exc:
        raise ConfigError(f"cannot read config: {exc}") from exc
    except yaml.YAMLError as exc:
        raise ConfigError(f"invalid YAML: {exc}") from exc


# ---------------------------------------------------------------------------
# Grids
# ---------------------------------------------------------------------------


def _lambda_grid(knobs: dict) -> list[complex]:
    spec = knobs.get("lambdas")
    if spec is None:
        return [complex(x, y) for y in (-1.0, 1.0) for x in (-2.0, -0.5, 0.5, 2.0)]
    if isinstance(spec, dict):
        lo, hi, num = spec["re"]
        ims = spec["im"] if isinstance(spec["im"], list) else [spec["im"]]
        out = [complex(x, float(y)) for y in ims for x in np.linspace(float(lo), float(hi), int(num))]
    else:
        out = [_complex(v) for v in spec]
    if any(v.imag == 0 for v in out):
        raise ConfigError("λ samples must be nonreal")
    return out


def _s_grid(knobs: dict) -> np.ndarray:
    spec = knobs.get("s", {"start": -10.0, "stop": 10.0, "num": 101})
    start, stop, num = float(spec["start"]), float(spec["stop"]), int(spec["num"])
    grading = float(spec.get("grading", 1.0))
    if num < 3 or stop <= start:
        raise ConfigError("s grid needs start < stop and at least 3 points")
    if grading == 1.0:
        return np.linspace(start, stop, num)
    # power grading clustered at centre
    c = float(spec.get("center", 0.0))
    u = np.linspace(-1.0, 1.0, num)
    half = np.where(u < 0, c - start, stop - c)
    return c + np.sign(u) * half * np.abs(u) ** grading


def _bump(job: Job) -> WeightedFunction:
    spec = job.knobs.get("bump", {})
    sysm = job.ctx.sys
    lo = float(spec.get("lo", sysm.a + 0.2 * (sysm.end - sysm.a)))
    hi = float(spec.get("hi", sysm.a + 0.7 * (sysm.end - sysm.a)))
    return bump(sysm, lo, hi, int(spec.get("component", 0)))


def _eps(job: Job):
    e = job.knobs.get("eps")
    return None if e is None else tuple(float(v) for v in e)


def _sigma(job: Job, workers: int):
    ctx = job.ctx
    grid = _s_grid(job.knobs)
    return stieltjes_inversion(
        lambda lam: _m(job, lam),
        grid,
        eps_schedule=_eps(job),
        workers=workers,
        hat_cols=ctx.hat_cols,
        quad_tol=float(job.knobs.get("quad_tol", job.profile.quad)),
    )


def _m(job: Job, lam: complex) -> np.ndarray:
    sol = v_tau(job.ctx, job.tau, lam)
    if sol.route_residual > sol.route_tol(job.profile.route):
        raise NumericFailure(f"m-function routes disagree by {sol.route_residual:.3e} at λ={lam}")
    return sol.m


# ---------------------------------------------------------------------------
# Output
# ---------------------------------------------------------------------------


def _fmt(x: float) -> str:
    return repr(float(x))


def _flat(mat: np.ndarray) -> list[str]:
    out = []
    for v in np.asarray(mat, dtype=complex).ravel():
        out += [_fmt(v.real), _fmt(v.imag)]
    return out


def _header(prefix: Sequence[str], shape: tuple[int, ...], name: str) -> list[str]:
    cols = list(prefix)
    idx = np.ndindex(*shape)
    for ij in idx:
        tag = "".join(str(k) for k in ij)
        cols += [f"{name}{tag}_re", f"{name}{tag}_im"]
    return cols


def _write_csv(path: Path, header: list[str], rows: list[list[str]]) -> None:
    with open(path, "w", newline="", encoding="utf-8") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(header)
        w.writerows(rows)


def _jsonable(x):
    if isinstance(x, dict):
        return {str(k): _jsonable(v) for k, v in x.items()}
    if isinstance(x, (list, tuple)):
        return [_jsonable(v) for v in x]
    if isinstance(x, (np.bool_, bool)):
        return bool(x)
    if isinstance(x, (np.integer,)):
        return int(x)
    if isinstance(x, (np.floating, float)):
        return float(x)
    if isinstance(x, complex):
        return [x.real, x.imag]
    if isinstance(x, np.ndarray):
        return _jsonable(x.tolist())
    return x


# ---------------------------------------------------------------------------
# Tasks
# ---------------------------------------------------------------------------


def task_indices(job: Job, out: Path, workers: int) -> dict:
    if job.expr is not None:
        ep = job.ctx.sys.endpoint
        n_plus, n_minus = odd_deficiency(job.expr, ep if isinstance(ep, Regular) else None, job.ctx.sys.a)
    else:
        n_plus, n_minus = deficiency_indices(job.ctx.sys, job.ctx.mode_tol)
    return {"n_plus": n_plus, "n_minus": n_minus}


def task_mfun(job: Job, out: Path, workers: int) -> dict:
    lams = _lambda_grid(job.knobs)
    sols = [v_tau(job.ctx, job.tau, lam) for lam in lams]
    worst = max(s.route_residual for s in sols)
    if worst > job.profile.route:
        raise NumericFailure(f"m-function routes disagree by {worst:.3e}")
    shape = sols[0].m.shape
    rows = [[_fmt(s.lam.real), _fmt(s.lam.imag)] + _flat(s.m) for s in sols]
    _write_csv(out / "mfun.csv", _header(["lam_re", "lam_im"], shape, "m"), rows)
    defect = nevanlinna_defect([(s.lam, s.m) for s in sols])
    return {
        "count": len(sols),
        "shape": list(shape),
        "nevanlinna_defect": defect,
        "route_residual": worst,
        "nevanlinna_ok": defect <= job.profile.nevanlinna,
    }


def task_sigma(job: Job, out: Path, workers: int) -> dict:
    sigma = _sigma(job, workers)
    shape = sigma.increments.shape[1:]
    rows = [[_fmt(s)] + _flat(sigma(s)) for s in sigma.grid]
    _write_csv(out / "sigma.csv", _header(["s"], shape, "sigma"), rows)
    jrows = [[_fmt(j.location)] + _flat(j.weight) for j in sigma.jumps]
    _write_csv(out / "jumps.csv", _header(["s"], shape, "w"), jrows)
    rep = spectrum_readout(sigma, first_cols=job.ctx.first_cols)
    return {
        "cells": int(sigma.increments.shape[0]),
        "jumps": [j.location for j in sigma.jumps],
        "total_mass_trace": sigma.total_mass(),
        "min_eigenvalue": sigma.min_eigenvalue(),
        "hat_block_residual": hat_block_residual(sigma, job.ctx.hat_cols),
        "spectrum": rep.as_dict(),
    }


def task_resolve(job: Job, out: Path, workers: int) -> dict:
    lam = _complex(job.knobs.get("lambda", [0.0, 1.0]))
    if lam.imag == 0:
        raise ConfigError("resolvent λ must be nonreal")
    f = _bump(job)
    y = green_apply(job.ctx, job.tau, lam, f)
    sysm = job.ctx.sys
    hi = sysm.end if isinstance(sysm.endpoint, Regular) else f.hi + (f.hi - f.lo)
    ts = np.linspace(sysm.a, hi, int(job.knobs.get("points", 101)))
    vals = y(ts)
    _write_csv(out / "resolvent.csv", _header(["t"], (sysm.n,), "y"), [[_fmt(t)] + _flat(v) for t, v in zip(ts, vals)])
    inner = ts[(ts > sysm.a) & (ts < hi)][1:-1]
    probe = inner[:: max(1, inner.size // 8)]
    return {
        "lambda": lam,
        "ode_residual": resolvent_residual(y, probe),
        "boundary_residual": boundary_residual_a(y),
        "kernel_jump_residual": y.kernel.jump_residual(list(probe[:4])),
    }


def task_fourier(job: Job, out: Path, workers: int) -> dict:
    sigma = _sigma(job, workers)
    f = _bump(job)
    fh = transform(job.ctx, sigma, f, workers)
    k = fh.at_mids.shape[1]
    rows = [[_fmt(s), "cell"] + _flat(v) for s, v in zip(sigma.mids, fh.at_mids)]
    rows += [[_fmt(j.location), "jump"] + _flat(v) for j, v in zip(sigma.jumps, fh.at_jumps)]
    _write_csv(out / "fourier.csv", _header(["s", "kind"], (k,), "fhat"), rows)
    return {"parseval_defect": parseval_defect(job.ctx, sigma, f, workers, fh), "jumps": len(sigma.jumps)}


def task_roundtrip(job: Job, out: Path, workers: int) -> dict:
    sigma = _sigma(job, workers)
    f = _bump(job)
    fh = transform(job.ctx, sigma, f, workers)
    return {
        "parseval_defect": parseval_defect(job.ctx, sigma, f, workers, fh),
        "roundtrip_error": roundtrip_error(job.ctx, sigma, f, workers=workers, fhat=fh),
    }


def _try(fn: Callable[[], float]) -> float | str:
    try:
        return float(fn())
    except WeylkitError as exc:
        return f"{exc.error_id}: {exc}"


def task_check(job: Job, out: Path, workers: int) -> dict:
    """Run the invariant suite; each entry reports its residual and limit."""
    ctx = job.ctx
    trip = ctx.trip
    prof = job.profile
    lams = [complex(x, y) for y in (-1.0, 1.0) for x in (-1.5, 0.3, 2.0)]
    rows: dict[str, tuple[float | str, float]] = {}

    def add(name, value, limit, upper=True):
        rows[name] = (value, limit, upper)

    U = ctx.U if ctx.U.extended else extend_U(ctx.U)
    add("U relations", max(U.residuals.get(k, 0.0) for k in U.residuals), prof.relation)
    add("extension J-unitary", _try(lambda: check_extension(U)), prof.relation)
    add("abstract Green identity", trip.green_residual(), prof.relation)
    add("endpoint form identity", trip.form.identity_residual(), prof.relation)
    t_hi = max(ctx.sys.end, ctx.sys.a + 1.0)
    definite = check_definite(ctx.sys, [1j, -1j], list(np.linspace(ctx.sys.a, t_hi, 9)))
    add("definite", 0.0 if definite else 1.0, 0.5)
    add("Weyl block identities", _try(lambda: max(x_matrix(ctx, l, check=False).block_residual for l in lams)), 1e-7)
    add(
        "base solution conditions",
        _try(lambda: max(max(boundary_residuals(ctx, x_matrix(ctx, l, check=False)).values()) for l in lams)),
        1e-7,
    )
    add("Weyl block symmetry", _try(lambda: max(symmetry_residual(ctx, l) for l in lams[:3])), 1e-8)
    sols = []

    def routes():
        sols.extend(v_tau(ctx, job.tau, l) for l in lams)
        return max(s.route_residual for s in sols)

    add("m-function routes", _try(routes), prof.route)
    if sols:
        add("Nevanlinna", nevanlinna_defect([(s.lam, s.m) for s in sols]), prof.nevanlinna)
        add("PSD lower bound", _try(lambda: min(psd_bound_min_eigenvalue(ctx, s) for s in sols)), -1e-7, upper=False)
        if job.tau.truncated:
            add("truncated triangularity", max(triangularity_residual(ctx, s.m) for s in sols if s.lam.imag < 0), 1e-10)
    if job.reduction is not None:
        red = job.reduction

        def fid():
            jets = np.eye(red.sys.n, dtype=complex)
            span = ctx.sys.end - ctx.sys.a if isinstance(ctx.sys.endpoint, Regular) else 2.0
            return fidelity_residual(red, 0.7 - 0.4j, jets, span)

        add("reduction fidelity", _try(fid), 1e-8)
        add("SF0 B limit", _try(lambda: sf0_criteria(ctx, job.tau).B_norm), 1e-6)
        add("SF0 Bhat limit", _try(lambda: sf0_criteria(ctx, job.tau).Bhat_norm), 1e-6)
    report = {}
    ok = True
    for name, (value, limit, upper) in rows.items():
        passed = isinstance(value, float) and (value <= limit if upper else value >= limit)
        ok &= passed
        report[name] = {"residual": value, "limit": limit, "pass": passed}
    rep_rows = [[k, str(v["residual"]), _fmt(v["limit"]), str(v["pass"])] for k, v in report.items()]
    _write_csv(out / "check.csv", ["invariant", "residual", "limit", "pass"], rep_rows)
    return {"all_pass": ok, "invariants": report}


TASK_FNS = {
    "indices": task_indices,
    "mfun": task_mfun,
    "sigma": task_sigma,
    "resolve": task_resolve,
    "fourier": task_fourier,
    "roundtrip": task_roundtrip,
    "check": task_check,
}


def run(job: Job, out: Path, workers: int = 1) -> dict:
    """Execute the job, write artifacts into ``out`` and return the summary."""
    out.mkdir(parents=True, exist_ok=True)
    summary = _jsonable(TASK_FNS[job.task](job, out, workers))
    with open(out / "summary.json", "w", encoding="utf-8") as fh:
        json.dump(summary, fh, indent=2, sort_keys=True)
        fh.write("\n")
    return summary


# ---------------------------------------------------------------------------
# Entry point
# ---------------------------------------------------------------------------


def _workers(flag: int | None) -> int:
    if flag is not None:
        return max(1, flag)
    env = os.environ.get("WEYLKIT_WORKERS")
    if env:
        try:
            return max(1, int(env))
        except ValueError as exc:
            raise ConfigError(f"WEYLKIT_WORKERS must be an integer, got {env!r}") from exc
    return 1


def build_parser() -> argparse.ArgumentParser:
    p = argparse.ArgumentParser(prog="weylkit", description="Weyl functions and spectral functions of symmetric systems")
    p.add_argument("--config", required=True, help="YAML job file")
    p.add_argument("--task", choices=TASKS, help="override the task named in the config")
    p.add_argument("--workers", type=int, help="worker threads for grid sweeps (env WEYLKIT_WORKERS)")
    p.add_argument("--out", default="weylkit_out", help="output directory")
    p.add_argument("--tol-profile", choices=sorted(PROFILES), default="default")
    p.add_argument("-v", "--verbose", action="store_true")
    return p


def main(argv: Sequence[str] | None = None) -> int:
    args = build_parser().parse_args(argv)
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING, format="%(levelname)s %(message)s")
    try:
        workers = _workers(args.workers)
        job = parse_config(load_config(args.config), args.task, args.tol_profile)
    except ConfigError as exc:
        print(json.dumps({"error": exc.error_id, "message": str(exc)}), file=sys.stderr)
        return EXIT_CONFIG
    except NumericFailure as exc:
        print(json.dumps({"error": exc.error_id, "message": str(exc)}), file=sys.stderr)
        return EXIT_NUMERIC
    try:
        summary = run(job, Path(args.out), workers)
    except ConfigError as exc:
        print(json.dumps({"error": exc.error_id, "message": str(exc)}), file=sys.stderr)
        return EXIT_CONFIG
    except WeylkitError as exc:
        print(json.dumps({"error": exc.error_id, "message": str(exc)}), file=sys.stderr)
        return EXIT_NUMERIC
    print(json.dumps(summary, sort_keys=True))
    if job.task == "check" and not summary.get("all_pass", True):
        return EXIT_NUMERIC
    return EXIT_OK


if __name__ == "__main__":  # pragma: no cover
    raise SystemExit(main())
