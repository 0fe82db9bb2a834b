"""Command-line entry point: experiment manifests, coefficient caches, CSV/JSON output."""

from __future__ import annotations

import argparse
import csv
import json
import math
import platform
import sys
import time
from concurrent.futures import ThreadPoolExecutor
from pathlib import Path
from typing import Any, Callable

import numpy as np

from . import __version__

SCHEMA_VERSION = 1
EXPERIMENTS = (
    "coeffs",
    "expsum",
    "delta-check",
    "voronoi-check",
    "moment",
    "nonsplit-sum",
    "exponent-scan",
    "roots",
    "trace",
    "heights",
)
DEFAULT_ETA = {"eta2": 0.03, "eta3": 0.04, "eta4": 0.05}


class SchemaError(ValueError):
    pass


# ---------------------------------------------------------------- manifest


def _require(cond: bool, msg: str) -> None:
    if not cond:
        raise SchemaError(msg)


def _range(params: dict, lo: str, hi: str) -> tuple[int, int]:
    _require(lo in params and hi in params, f"missing {lo}/{hi}")
    a, b = int(params[lo]), int(params[hi])
    _require(a <= b, f"empty range {lo}={a} > {hi}={b}")
    return a, b


def validate(manifest: dict) -> dict:
    """Check the manifest shape and fill defaults; raises SchemaError."""
    _require(isinstance(manifest, dict), "manifest must be a JSON object")
    _require(manifest.get("schema") == SCHEMA_VERSION, f"schema must be {SCHEMA_VERSION}")
    kind = manifest.get("experiment")
    _require(kind in EXPERIMENTS, f"unknown experiment {kind!r}")
    _require(isinstance(manifest.get("out"), str) and manifest["out"], "out path required")
    params = manifest.setdefault("params", {})
    _require(isinstance(params, dict), "params must be an object")
    eta = {**DEFAULT_ETA, **manifest.get("eta", {})}
    _require(all(0 < float(v) < 0.25 for v in eta.values()), "eta proxies must lie in (0, 1/4)")
    manifest["eta"] = eta
    manifest.setdefault("seed", 0)
    manifest.setdefault("precision", 256)
    manifest.setdefault("threads", 1)
    manifest.setdefault("cache_dir", None)
    out_dir = Path(manifest["out"]).resolve().parent
    _require(out_dir.exists(), f"output directory {out_dir} does not exist")
    if kind in ("moment", "heights"):
        dmin, dmax = _range(params, "dmin", "dmax")
        _require(dmax < 0, "discriminant range must be negative")
    elif kind == "exponent-scan":
        dmin, dmax = _range(params, "dmin", "dmax")
        _require(dmin >= 1, "d must be positive")
    elif kind == "expsum":
        _range(params, "qmin", "qmax")
        _require(int(params["qmin"]) >= 1, "qmin must be positive")
    elif kind == "delta-check":
        _require(float(params.get("U", 0)) > 1 and float(params.get("Omega", 0)) > 1, "U and Omega must exceed 1")
    elif kind in ("nonsplit-sum", "trace"):
        _require(int(params.get("d", 0)) >= 1 and int(params.get("N", 0)) >= 1, "d and N must be positive")
    elif kind == "roots":
        _require(int(params.get("d", 0)) >= 1, "d must be positive")
    elif kind == "coeffs":
        _require(int(params.get("length", 0)) >= 1, "length must be positive")
    return manifest


# ---------------------------------------------------------------- helpers


def _table(manifest: dict, length: int, level: int | None = None):
    from .coeffs import cached_table

    level = int(level if level is not None else manifest["params"].get("level", 11))
    return cached_table(level, length, manifest.get("cache_dir"))


def _fmt(x: Any) -> str:
    if isinstance(x, (float, np.floating)):
        return repr(float(x))
    if isinstance(x, (complex, np.complexfloating)):
        return repr(complex(x))
    return str(x)


def write_csv(path: str | Path, header: list[str], rows) -> None:
    with open(path, "w", newline="", encoding="utf-8") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(header)
        for row in rows:
            w.writerow([_fmt(v) for v in row])


def _map(fn: Callable, items, threads: int) -> list:
    if threads <= 1:
        return [fn(x) for x in items]
    with ThreadPoolExecutor(max_workers=threads) as ex:
        return list(ex.map(fn, items))  # map preserves input order


# ---------------------------------------------------------------- experiments


def _exp_coeffs(m: dict) -> dict:
    from .coeffs import deligne_margin, verify_hecke

    p = m["params"]
    table = _table(m, int(p["length"]))
    rep = verify_hecke(table)
    summary = {
        "level": table.level,
        "length": table.length,
        "hecke_ok": rep.ok,
        "deligne_margin": deligne_margin(table),
    }
    Path(m["out"]).write_text(json.dumps(summary, indent=2, sort_keys=True) + "\n", encoding="utf-8")
    return summary


def _exp_expsum(m: dict) -> dict:
    from .expsums import JSumParams, jsum

    p = m["params"]
    base = JSumParams(int(p.get("n1", 1)), int(p.get("r1", 0)), int(p.get("n2", 1)), int(p.get("r2", 0)))
    qmin, qmax = int(p["qmin"]), int(p["qmax"])
    vals = _map(lambda q: jsum(base.with_modulus(q)), range(qmin, qmax + 1), m["threads"])
    write_csv(m["out"], ["q", "re", "im"], [(q, v.real, v.imag) for q, v in zip(range(qmin, qmax + 1), vals)])
    return {"count": len(vals)}


def _exp_delta(m: dict) -> dict:
    from .deltasym import build_kernel, delta_expansion

    p = m["params"]
    kernel = build_kernel(float(p["U"]), float(p["Omega"]))
    nmax = int(p.get("nmax", 50))
    ns = list(range(-nmax, nmax + 1))
    vals = _map(lambda n: delta_expansion(kernel, n), ns, m["threads"])
    rows = [(n, v, abs(v - (1.0 if n == 0 else 0.0))) for n, v in zip(ns, vals)]
    write_csv(m["out"], ["n", "expansion", "residual"], rows)
    return {"max_residual": max(r[2] for r in rows)}


def _exp_voronoi(m: dict) -> dict:
    from .voronoi import default_voronoi_cases, voronoi_sides

    length = int(m["params"].get("length", 400_000))
    tables = {lv: _table(m, length, lv) for lv in (11, 15)}
    cases = default_voronoi_cases()
    reps = _map(lambda c: voronoi_sides(tables[c.level], c.q, c.d, c.g), cases, m["threads"])
    rows = [
        (c.level, c.q, c.d, c.g.center, c.g.width, r.lhs.real, r.rhs.real, r.residual, r.dual_length)
        for c, r in zip(cases, reps)
    ]
    write_csv(m["out"], ["level", "q", "d", "center", "width", "lhs", "rhs", "residual", "dual_length"], rows)
    return {"max_residual": max(r[7] for r in rows)}


def _exp_moment(m: dict) -> dict:
    from .afe import moment_r_route, main_term, sym2_values, diagonal_term, truncation_length
    from .arith import fundamental_discriminants
    from .quadratic import class_number, heegner_admissible

    p = m["params"]
    level = int(p.get("level", 11))
    dmin, dmax = int(p["dmin"]), int(p["dmax"])
    Ds = [D for D in fundamental_discriminants(dmin, dmax) if heegner_admissible(D, level)]
    length = max(10**6, max((truncation_length(D, level) for D in Ds), default=1))
    table = _table(m, length, level)
    sym2 = sym2_values(table)

    def row(D):
        mom = moment_r_route(table, D)
        mt = main_term(table, D, sym2)
        return (D, class_number(D), mom, mt, mom - diagonal_term(table, D), mom / mt)

    rows = _map(row, Ds, m["threads"])
    write_csv(m["out"], ["D", "h", "moment", "main_term", "remainder", "ratio"], rows)
    return {"rows": len(rows), "sym2_L1": sym2.L1}


def _exp_nonsplit(m: dict) -> dict:
    from .nonsplit import NonSplitQuery, absolute_sum, sharp_sum, smooth_sum

    p = m["params"]
    q = NonSplitQuery(int(p["d"]), int(p["N"]), p.get("window", "sharp"), float(p.get("delta", 0.1)))
    table = _table(m, q.max_argument)
    s = sharp_sum(table, q) if q.window == "sharp" else smooth_sum(table, q)
    write_csv(m["out"], ["d", "N", "sum", "abs_sum"], [(q.d, q.N, s, absolute_sum(table, q))])
    return {"sum": s}


def _exp_scan(m: dict) -> dict:
    from .nonsplit import exponent_scan, prime_sampler

    p = m["params"]
    groups = prime_sampler(
        float(p["dmin"]), float(p["dmax"]), int(p.get("points", 12)), int(p.get("trials", 3)), int(m["seed"])
    )
    dmax = max(max(g) for g in groups)
    table = _table(m, 4 * dmax + 4 * math.isqrt(dmax) + 8)
    res = exponent_scan(table, groups, p.get("control", "signed"), seed=int(m["seed"]))
    write_csv(m["out"], ["d", "N", "sum", "abs_sum"], res.rows)
    return {"slope": res.fit.slope, "intercept": res.fit.intercept, "residual_norm": res.fit.residual_norm}


def _exp_roots(m: dict) -> dict:
    from .nonsplit import roots_equidistribution, roots_mod

    p = m["params"]
    d = int(p["d"])
    rep = roots_equidistribution(d, int(p["qmax"]) if "qmax" in p else None)
    rows = [(q, nu, nu / q) for q in range(1, rep.Qmax + 1) for nu in roots_mod(d, q)]
    write_csv(m["out"], ["q", "nu", "point"], rows)
    return {"points": len(rows), "star_discrepancy": rep.discrepancy}


def _exp_trace(m: dict) -> dict:
    from .nonsplit import NonSplitQuery, TraceConfig, pipeline_trace

    p = m["params"]
    q = NonSplitQuery(int(p["d"]), int(p["N"]), "smooth", float(p.get("delta", 0.1)))
    cfg = TraceConfig(
        eta4=float(m["eta"]["eta4"]),
        eta2=float(m["eta"]["eta2"]),
        dual_length=int(p.get("dual_length", TraceConfig.dual_length)),
    )
    table = _table(m, max(cfg.dual_length, q.max_argument + 2 * q.d))
    rep = pipeline_trace(table, q, cfg)
    out = {
        "d": rep.d,
        "N": rep.N,
        "U": rep.U,
        "Omega": rep.Omega,
        "smooth": rep.smooth,
        "delta_route": rep.delta_route,
        "voronoi_route": rep.voronoi_route,
        "restricted_route": rep.restricted_route,
        "restriction_cutoff": rep.restriction_cutoff,
        "delta_gap": rep.delta_gap,
        "reconstruction_gap": rep.reconstruction_gap,
        "restriction_tail": rep.restriction_tail,
        "poisson_gaps": rep.poisson_gaps,
        "E1": rep.E1,
        "E2": rep.E2,
        "E1_constant": rep.E1_constant,
        "stage_failures": rep.stage_failures(),
    }
    Path(m["out"]).write_text(json.dumps(out, indent=2, sort_keys=True) + "\n", encoding="utf-8")
    return {"stage_failures": out["stage_failures"]}


def _exp_heights(m: dict) -> dict:
    from .arith import fundamental_discriminants
    from .heights import chowla_selberg_check, naive_height

    p = m["params"]
    Ds = list(fundamental_discriminants(int(p["dmin"]), int(p["dmax"])))
    prec = int(m["precision"])
    with_mahler = bool(p.get("mahler", False))

    def row(D):
        nh = naive_height(D, with_mahler=with_mahler, prec=prec)
        return (D, nh.h, nh.height, nh.calL, nh.ratio, chowla_selberg_check(D))

    rows = _map(row, Ds, m["threads"])
    write_csv(m["out"], ["D", "h", "h_jD", "L_D", "ratio", "cs_gap"], rows)
    return {"rows": len(rows)}


RUNNERS: dict[str, Callable[[dict], dict]] = {
    "coeffs": _exp_coeffs,
    "expsum": _exp_expsum,
    "delta-check": _exp_delta,
    "voronoi-check": _exp_voronoi,
    "moment": _exp_moment,
    "nonsplit-sum": _exp_nonsplit,
    "exponent-scan": _exp_scan,
    "roots": _exp_roots,
    "trace": _exp_trace,
    "heights": _exp_heights,
}


def run(manifest: dict) -> int:
    """Execute one experiment; writes the output file and a .meta.json sidecar. Returns an exit status."""
    try:
        manifest = validate(dict(manifest))
    except SchemaError as exc:
        print(f"schema error: {exc}", file=sys.stderr)
        return 2
    np.random.seed(int(manifest["seed"]) % 2**32)
    start = time.perf_counter()
    try:
        summary = RUNNERS[manifest["experiment"]](manifest)
    except (ValueError, ArithmeticError) as exc:
        print(f"{manifest['experiment']} failed: {type(exc).__name__}: {exc}", file=sys.stderr)
        return 1
    meta = {
        "manifest": manifest,
        "summary": summary,
        "versions": {
            "nonsplitsum": __version__,
            "numpy": np.__version__,
            "python": platform.python_version(),
        },
        "wall_time": time.perf_counter() - start,
    }
    Path(str(manifest["out"]) + ".meta.json").write_text(
        json.dumps(meta, indent=2, sort_keys=True, default=_fmt) + "\n", encoding="utf-8"
    )
    return 0


# ---------------------------------------------------------------- argparse


def build_parser() -> argparse.ArgumentParser:
    ap = argparse.ArgumentParser(prog="nonsplitsum", description=__doc__)
    ap.add_argument("--manifest", help="JSON manifest; overrides the subcommand")
    ap.add_argument("--threads", type=int, default=1)
    ap.add_argument("--cache-dir", default=None)
    ap.add_argument("--seed", type=int, default=0)
    ap.add_argument("--prec", type=int, default=256)
    ap.add_argument("--out", default=None)
    sub = ap.add_subparsers(dest="experiment")

    def add(name: str, *args: tuple[str, type, Any]) -> None:
        sp = sub.add_parser(name)
        for flag, typ, default in args:
            sp.add_argument(flag, type=typ, default=default)

    add("coeffs", ("--level", int, 11), ("--length", int, 10**6))
    add("expsum", ("--n1", int, 1), ("--r1", int, 0), ("--n2", int, 1), ("--r2", int, 0), ("--qmin", int, 1), ("--qmax", int, 50))
    add("delta-check", ("--U", float, 400.0), ("--Omega", float, 20.0), ("--nmax", int, 50))
    add("voronoi-check", ("--length", int, 400_000))
    add("moment", ("--level", int, 11), ("--dmin", int, -2003), ("--dmax", int, -7))
    add("nonsplit-sum", ("--level", int, 11), ("--d", int, 7919), ("--N", int, 89), ("--window", str, "sharp"), ("--delta", float, 0.1))
    add("exponent-scan", ("--level", int, 11), ("--dmin", int, 1000), ("--dmax", int, 4_000_000), ("--points", int, 12), ("--trials", int, 3), ("--control", str, "signed"))
    add("roots", ("--d", int, 10_000), ("--qmax", int, None))
    add("trace", ("--level", int, 11), ("--d", int, 4003), ("--N", int, 63), ("--dual-length", int, None))
    add("heights", ("--dmin", int, -500), ("--dmax", int, -3))
    return ap


def manifest_from_args(args: argparse.Namespace) -> dict:
    params = {k: v for k, v in vars(args).items() if k not in ("manifest", "threads", "cache_dir", "seed", "prec", "out", "experiment") and v is not None}
    out = args.out or f"{args.experiment}.{'json' if args.experiment in ('coeffs', 'trace') else 'csv'}"
    return {
        "schema": SCHEMA_VERSION,
        "experiment": args.experiment,
        "params": params,
        "out": out,
        "seed": args.seed,
        "precision": args.prec,
        "threads": args.threads,
        "cache_dir": args.cache_dir,
    }


def main(argv: list[str] | None = None) -> int:
    args = build_parser().parse_args(argv)
    if args.manifest:
        try:
            manifest = json.loads(Path(args.manifest).read_text(encoding="utf-8"))
        except (OSError, json.JSONDecodeError) as exc:
            print(f"cannot read manifest: {exc}", file=sys.stderr)
            return 2
        if isinstance(manifest, dict):
            manifest.setdefault("threads", args.threads)
            if args.cache_dir:
                manifest.setdefault("cache_dir", args.cache_dir)
            if args.out:
                manifest["out"] = args.out
    elif args.experiment:
        manifest = manifest_from_args(args)
    else:
        build_parser().print_help()
        return 2
    return run(manifest)


if __name__ == "__main__":
    sys.exit(main())
