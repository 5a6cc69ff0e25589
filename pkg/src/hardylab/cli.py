"""Command-line entry point: ``hardylab verify | constants | list | describe``."""

from __future__ import annotations

import argparse
import csv
import json
import os
import sys
from concurrent.futures import ThreadPoolExecutor
from dataclasses import replace
from pathlib import Path

import jsonschema
import numpy as np

from . import cases as lib
from .cp import CONSTANTS, ParameterRangeError, check_range, compute_constant
from .fields import UnsupportedSystemError, system_from_dict
from .identities import CaseError, DEFAULT_SPEC, IdentityCase, annular_test_function, pde_check, verify
from .quadrature import QuadratureAbort, QuadratureSpec
from .scalar import Annulus, ScalarField, constant, grushin_gauge, power, radial_power

EXIT_OK, EXIT_FAIL, EXIT_CONFIG, EXIT_UNKNOWN, EXIT_ABORT, EXIT_RANGE = 0, 1, 2, 3, 4, 5

SUITES = {
    "corollaries-default": lib.COROLLARY_SUITE,
    "all": tuple(lib.REGISTRY),
}

CSV_FIELDS = ("case_id", "p", "N", "lhs", "residual", "rel_residual", "pass")

_FIELD = {
    "type": "object",
    "required": ["type"],
    "properties": {
        "type": {"enum": ["constant", "radial_power", "gauge_power", "gauge_weight"]},
        "value": {"type": "number"},
        "exponent": {"type": "number"},
        "coef": {"type": "number"},
        "x_exponent": {"type": "number"},
        "gauge_exponent": {"type": "number"},
    },
    "additionalProperties": False,
}

_U = {
    "type": "object",
    "required": ["type"],
    "properties": {
        "type": {"enum": ["annular", "bump_wave", "sine", "parabola"]},
        "seed": {"type": "integer"},
        "real": {"type": "boolean"},
        "axis": {"type": "integer", "minimum": 0},
        "n": {"type": "integer", "minimum": 1},
        "r_in": {"type": "number", "exclusiveMinimum": 0},
        "r_out": {"type": "number", "exclusiveMinimum": 0},
    },
    "additionalProperties": False,
}

_REF = {
    "type": "object",
    "required": ["id"],
    "properties": {
        "id": {"type": "string"},
        "lambda_scale": {"type": "number"},
        "u": _U,
    },
    "additionalProperties": False,
}

_INLINE = {
    "type": "object",
    "required": ["theorem", "system", "p", "N", "weights", "lambda"],
    "properties": {
        "id": {"type": "string"},
        "theorem": {"enum": ["hardy_directional", "hardy", "rellich"]},
        "system": {"type": "object", "required": ["kind"]},
        "p": {"type": "number", "exclusiveMinimum": 1},
        "N": {"type": "integer", "minimum": 1},
        "lambda": {"type": "number"},
        "weights": {
            "type": "object",
            "required": ["phi", "W"],
            "properties": {"phi": _FIELD, "V": _FIELD, "W": _FIELD},
            "additionalProperties": False,
        },
        "Z": {"enum": ["radial", None]},
        "u": _U,
        "resolution": {"type": "integer", "minimum": 2, "maximum": 32},
    },
    "additionalProperties": False,
}

CONFIG_SCHEMA = {
    "type": "object",
    "required": ["cases"],
    "properties": {
        "suite_name": {"type": "string"},
        "cases": {"type": "array", "items": {"oneOf": [{"type": "string"}, _REF, _INLINE]}},
        "quadrature": {
            "type": "object",
            "properties": {
                "base_rule": {"const": "gauss_legendre"},
                "points_per_axis": {"type": "integer", "minimum": 2, "maximum": 32},
                "max_refine_depth": {"type": "integer", "minimum": 0},
                "rel_tol": {"type": "number", "exclusiveMinimum": 0},
                "abs_tol": {"type": "number", "minimum": 0},
                "max_cells": {"type": "integer", "minimum": 1},
            },
            "additionalProperties": False,
        },
        "tolerance": {
            "type": "object",
            "properties": {
                "rel_tol": {"type": "number", "minimum": 0},
                "abs_tol": {"type": "number", "minimum": 0},
                "pde_tol": {"type": "number", "exclusiveMinimum": 0},
                "pde_points": {"type": "integer", "minimum": 1},
            },
            "additionalProperties": False,
        },
    },
    "additionalProperties": False,
}


class ConfigError(ValueError):
    pass


# ---------------------------------------------------------------- config -> cases


def _field(spec, system, dim):
    kind = spec["type"]
    if kind == "constant":
        return constant(float(spec.get("value", 1.0)), dim)
    if kind == "radial_power":
        a = float(spec["exponent"])
        c = float(spec.get("coef", 1.0))
        return replace(radial_power(dim, a, c), note=f"{c:g}*|x|^{a:g}")
    if system.kind != "grushin":
        raise ConfigError(f"{kind} weights need a grushin system")
    m, k, g = system.params["m"], system.params["k"], system.params["gamma"]
    rho = grushin_gauge(m, k, g)
    if kind == "gauge_power":
        a = float(spec["exponent"])
        return replace(power(rho, a), note=f"rho^{a:g}")
    a, b = float(spec["x_exponent"]), float(spec["gauge_exponent"])

    def value(X):
        return np.linalg.norm(X[:, :m], axis=-1) ** a * rho.value(X) ** b

    return ScalarField(value, dim, note=f"|x|^{a:g} rho^{b:g}")


def _u(spec, case):
    kind = spec["type"]
    sup = case.u.support
    if kind in ("sine", "parabola"):
        if case.theorem != "poincare_1d":
            raise ConfigError(f"u type {kind} is only available on the unit interval")
        return lib.sine_mode(spec.get("n", 1)) if kind == "sine" else lib.parabola()
    if not isinstance(sup, Annulus):
        raise ConfigError(f"u type {kind} needs an annular case")
    r_in = spec.get("r_in", sup.r_in)
    r_out = spec.get("r_out", sup.r_out)
    if not r_in < r_out:
        raise ConfigError("u needs r_in < r_out")
    if kind == "bump_wave":
        axis = spec.get("axis", 0)
        if axis >= case.N:
            raise ConfigError("bump_wave axis out of range")
        return lib.default_u(case.N, axis, r_in, r_out)
    rng = np.random.default_rng(spec.get("seed", 0))
    return annular_test_function(case.N, rng, r_in, r_out, real=spec.get("real", False))


def _inline_case(spec, index):
    try:
        system = system_from_dict(spec["system"])
    except (UnsupportedSystemError, TypeError, KeyError) as exc:
        raise ConfigError(f"inline case {index}: bad system: {exc}") from exc
    N = int(spec["N"])
    if system.dim_n != N:
        raise ConfigError(f"inline case {index}: system dimension {system.dim_n} != N = {N}")
    w = spec["weights"]
    V = _field(w.get("V", {"type": "constant", "value": 1.0}), system, N)
    theorem = spec["theorem"]
    Z = None
    if theorem == "hardy_directional":
        if spec.get("Z") != "radial":
            raise ConfigError(f"inline case {index}: hardy_directional needs Z = 'radial'")
        Z = lib._radial_dir
    case = IdentityCase(
        id=spec.get("id", f"inline-{index}"),
        theorem=theorem,
        system=system,
        p=float(spec["p"]),
        N=N,
        u=lib.default_u(N),
        phi=_field(w["phi"], system, N),
        V=V,
        W=_field(w["W"], system, N),
        lam=float(spec["lambda"]),
        Z=Z,
        symmetric=system.rotation_invariant,
        citation="inline case",
        description="user-supplied weights",
        rel_tol=1e-4 if theorem == "rellich" else 1e-5,
    )
    if "u" in spec:
        case = case.with_u(_u(spec["u"], case))
    return case


def _ref_case(entry):
    cid = entry if isinstance(entry, str) else entry["id"]
    if cid not in lib.REGISTRY:
        raise lib.UnknownCaseError(cid)
    case = lib.case_library(cid, validate=False)
    if isinstance(entry, dict):
        if "lambda_scale" in entry:
            case = replace(case, lam=case.lam * float(entry["lambda_scale"]))
        if "u" in entry:
            case = case.with_u(_u(entry["u"], case))
    return case


def load_config(source):
    """Parse a config path or a built-in suite name into a validated dict."""
    path = Path(source)
    if path.is_file():
        try:
            cfg = json.loads(path.read_text())
        except json.JSONDecodeError as exc:
            raise ConfigError(f"{source}: invalid JSON: {exc}") from exc
    elif source in SUITES:
        cfg = {"suite_name": source, "cases": list(SUITES[source])}
    else:
        raise ConfigError(f"{source}: no such config file or built-in suite")
    try:
        jsonschema.validate(cfg, CONFIG_SCHEMA)
    except jsonschema.ValidationError as exc:
        raise ConfigError(f"{source}: {exc.message}") from exc
    return cfg


def build_cases(cfg):
    out = []
    tol = cfg.get("tolerance", {})
    for i, entry in enumerate(cfg["cases"]):
        if isinstance(entry, dict) and "theorem" in entry:
            case = _inline_case(entry, i)
            res = entry.get("resolution")
        else:
            case = _ref_case(entry)
            res = None
        if "rel_tol" in tol or "abs_tol" in tol:
            case = replace(case, rel_tol=tol.get("rel_tol", case.rel_tol), abs_tol=tol.get("abs_tol", case.abs_tol))
        out.append((case, res))
    return out


def quadrature_spec(cfg, resolution=None):
    q = {**DEFAULT_SPEC.to_dict(), **cfg.get("quadrature", {})}
    if resolution is not None:
        q["points_per_axis"] = resolution
    return QuadratureSpec(**q)


# ---------------------------------------------------------------- running


def _threads():
    raw = os.environ.get("HARDYLAB_THREADS", "")
    try:
        n = int(raw)
    except ValueError:
        n = os.cpu_count() or 1
    return max(1, n)


def run_case(case, spec, tol):
    try:
        chk = pde_check(case, n_points=tol.get("pde_points", 20), tol=tol.get("pde_tol", 1e-4))
    except (ValueError, ZeroDivisionError, FloatingPointError) as exc:
        chk = {"ok": False, "error": str(exc)}
    return verify(case, spec, pde_check=chk)


def _fmt(x):
    return repr(float(x))


def write_reports(reports, out_dir):
    out_dir = Path(out_dir)
    out_dir.mkdir(parents=True, exist_ok=True)
    for i, rep in enumerate(reports):
        name = f"{i:03d}-{rep['case_id']}.json"
        (out_dir / name).write_text(json.dumps(rep, indent=2, sort_keys=True) + "\n")
    with open(out_dir / "summary.csv", "w", newline="") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(CSV_FIELDS)
        for rep in reports:
            if rep.get("kind") != "identity_report":
                continue
            w.writerow(
                [
                    rep["case_id"],
                    _fmt(rep["p"]),
                    rep["N"],
                    _fmt(rep["lhs"]["value"]),
                    _fmt(rep["residual"]),
                    _fmt(rep["rel_residual"]),
                    "true" if rep["pass"] else "false",
                ]
            )


def run_suite(config_path, out_dir, log=print):
    """Run every case of a suite and write its reports; returns the exit status."""
    try:
        cfg = load_config(config_path)
        cases = build_cases(cfg)
        specs = [quadrature_spec(cfg, res) for _, res in cases]
    except lib.UnknownCaseError as exc:
        log(f"error: unknown case id {exc.args[0]!r}", file=sys.stderr)
        return EXIT_UNKNOWN
    except (ConfigError, CaseError, ValueError) as exc:
        log(f"error: {exc}", file=sys.stderr)
        return EXIT_CONFIG
    tol = cfg.get("tolerance", {})

    def job(i):
        case = cases[i][0]
        try:
            return run_case(case, specs[i], tol).to_dict()
        except QuadratureAbort as exc:
            return {"schema": "1", "kind": "quadrature_abort", "case_id": case.id, "error": str(exc), "location": exc.location}
        except CaseError as exc:
            return {"schema": "1", "kind": "case_error", "case_id": case.id, "error": str(exc)}

    with ThreadPoolExecutor(max_workers=_threads()) as pool:
        reports = list(pool.map(job, range(len(cases))))
    write_reports(reports, out_dir)

    status = EXIT_OK
    for rep in reports:
        kind = rep["kind"]
        if kind == "identity_report":
            mark = "PASS" if rep["pass"] else "FAIL"
            log(f"{mark} {rep['case_id']}: rel_residual={rep['rel_residual']:.3e}")
            if not rep["pass"]:
                status = max(status, EXIT_FAIL)
        elif kind == "quadrature_abort":
            log(f"ABORT {rep['case_id']}: {rep['error']}")
            status = EXIT_ABORT
        else:
            log(f"ERROR {rep['case_id']}: {rep['error']}")
            status = EXIT_CONFIG if status != EXIT_ABORT else status
    return status


def compute_constants_cmd(p_list, which, out_dir, log=print):
    which = sorted(set(which))
    for w in which:
        if w not in CONSTANTS:
            log(f"error: unknown constant {w!r}", file=sys.stderr)
            return EXIT_CONFIG
    try:
        for w in which:
            for p in p_list:
                check_range(w, p)
    except ParameterRangeError as exc:
        log(f"error: {exc}", file=sys.stderr)
        return EXIT_RANGE
    records = []
    for w in which:
        for p in p_list:
            est = compute_constant(w, p)
            rec = {"schema": "1", "kind": "constant_estimate", **est.to_dict()}
            records.append(rec)
            log(f"{w}(p={p:g}) = {est.value:.10g}  bracket [{est.lo:.10g}, {est.hi:.10g}]")
    out = Path(out_dir)
    out.mkdir(parents=True, exist_ok=True)
    (out / "constants.json").write_text(json.dumps(records, indent=2, sort_keys=True) + "\n")
    return EXIT_OK


def _floats(text):
    try:
        return [float(v) for v in text.replace(",", " ").split()]
    except ValueError:
        raise argparse.ArgumentTypeError(f"not a list of numbers: {text!r}") from None


def _names(text):
    return [v for v in text.replace(",", " ").split() if v]


def build_parser():
    ap = argparse.ArgumentParser(prog="hardylab", description="Hardy and Rellich identity laboratory")
    sub = ap.add_subparsers(dest="cmd", required=True)
    v = sub.add_parser("verify", help="run a suite (config file or built-in suite name)")
    v.add_argument("config")
    v.add_argument("--out", required=True)
    c = sub.add_parser("constants", help="compute sharp C_p constants")
    c.add_argument("--p", type=_floats, required=True, help="comma-separated p values")
    c.add_argument("--which", type=_names, default=["c1"], help="subset of c1,c2,c3")
    c.add_argument("--out", required=True)
    sub.add_parser("list", help="list registered cases")
    d = sub.add_parser("describe", help="describe a registered case")
    d.add_argument("case_id")
    return ap


def main(argv=None):
    args = build_parser().parse_args(argv)
    if args.cmd == "verify":
        return run_suite(args.config, args.out)
    if args.cmd == "constants":
        return compute_constants_cmd(args.p, args.which, args.out)
    if args.cmd == "list":
        for cid in lib.list_cases():
            print(cid)
        return EXIT_OK
    try:
        print(lib.describe_case(args.case_id))
    except lib.UnknownCaseError:
        print(f"error: unknown case id {args.case_id!r}", file=sys.stderr)
        return EXIT_UNKNOWN
    return EXIT_OK


if __name__ == "__main__":
    sys.exit(main())
