"""Hardy, directional Hardy, Rellich and Poincare identities checked by quadrature.

Each identity is ``LHS = main term + remainder terms``.  The integrands of
all terms are evaluated on the same quadrature nodes from analytic
derivatives of ``u`` and ``phi``, integrated as one vector integrand, and the
report compares ``LHS`` with the sum of the right-hand terms.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field, replace
from typing import Callable, Optional

import numpy as np

from . import quadrature as quad
from .calculus import hardy_pde_residual, rellich_pde_residual, rellich_sign
from .cp import cp_eval
from .fields import VectorFieldSystem, _hgrad, l_apply_arrays, make_system
from .scalar import Annulus, Box, ScalarField, annular_bump, as_points, plane_wave, quadratic

THEOREMS = ("hardy_directional", "hardy", "rellich", "poincare_1d")

RHS_NAMES = {
    "hardy_directional": ("main_term", "cp_remainder"),
    "hardy": ("main_term", "cp_remainder"),
    "poincare_1d": ("main_term", "cp_remainder"),
    "rellich": ("main_term", "cp_remainder", "rellich_gradient_term", "rellich_modulus_gap_term"),
}

DEFAULT_SPEC = quad.QuadratureSpec(points_per_axis=8, rel_tol=1e-8, abs_tol=1e-14)


class CaseError(ValueError):
    """Raised when a case violates the hypotheses of its identity."""


@dataclass(frozen=True)
class IdentityCase:
    id: str
    theorem: str
    system: VectorFieldSystem
    p: float
    N: int
    u: ScalarField
    phi: ScalarField
    V: ScalarField
    W: ScalarField
    lam: float
    Z: Optional[Callable] = None
    symmetric: bool = False
    citation: str = ""
    description: str = ""
    rel_tol: float = 1e-5
    abs_tol: float = 1e-12
    spec: dict = field(default_factory=dict)

    @property
    def support(self):
        return self.u.support

    def with_u(self, u):
        return replace(self, u=u)

    def summary(self):
        return {
            "id": self.id,
            "theorem": self.theorem,
            "system": self.system.to_dict(),
            "p": self.p,
            "N": self.N,
            "lambda": self.lam,
            "phi": self.phi.note,
            "V": self.V.note,
            "W": self.W.note,
            "Z": "x/|x|" if self.Z is not None else None,
            "citation": self.citation,
            "description": self.description,
        }


@dataclass
class Term:
    value: float
    err: float

    def to_dict(self):
        return {"value": self.value, "err": self.err}


@dataclass
class IdentityReport:
    case_id: str
    theorem: str
    p: float
    N: int
    lhs: Term
    rhs_terms: dict
    residual: float
    rel_residual: float
    quad_err_total: float
    rel_tol: float
    abs_tol: float
    passed: bool
    converged: bool = True
    n_cells: int = 0
    n_evals: int = 0
    pde_check: Optional[dict] = None

    @property
    def rhs_total(self):
        return sum(t.value for t in self.rhs_terms.values())

    def to_dict(self):
        return {
            "schema": "1",
            "kind": "identity_report",
            "case_id": self.case_id,
            "theorem": self.theorem,
            "p": self.p,
            "N": self.N,
            "lhs": self.lhs.to_dict(),
            "rhs_terms": {k: v.to_dict() for k, v in self.rhs_terms.items()},
            "rhs_total": self.rhs_total,
            "residual": self.residual,
            "rel_residual": self.rel_residual,
            "quad_err_total": self.quad_err_total,
            "tolerance": {"rel_tol": self.rel_tol, "abs_tol": self.abs_tol},
            "pass": self.passed,
            "quadrature": {"converged": self.converged, "cells": self.n_cells, "evaluations": self.n_evals},
            "pde_check": self.pde_check,
        }


# ---------------------------------------------------------------- test functions


def annular_test_function(dim, rng, r_in=0.5, r_out=1.5, active=2, real=False):
    """``bump(|x|) * Q(x) * exp(i k.x)`` with ``Q >= 1/2`` on the annulus.

    ``Q`` and ``k`` only involve the first ``active`` coordinates, which keeps
    the integrands of radially weighted cases reducible to ``active + 1``
    quadrature dimensions.  ``k_1`` is bounded away from zero so that the
    gradient never vanishes inside the support.
    """
    active = min(active, dim)
    b = np.zeros(dim)
    A = np.zeros((dim, dim))
    bv = rng.standard_normal(active)
    b[:active] = 0.25 * bv / (np.linalg.norm(bv) * r_out)
    Av = rng.standard_normal((active, active))
    Av = 0.5 * (Av + Av.T)
    A[:active, :active] = 0.2 * Av / (np.linalg.norm(Av, 2) * r_out**2)
    u = annular_bump(dim, r_in, r_out) * quadratic(1.0, b, A, dim)
    if not real:
        k = np.zeros(dim)
        k[:active] = rng.uniform(-1.5, 1.5, size=active)
        k[0] = rng.choice([-1.0, 1.0]) * rng.uniform(0.5, 1.5)
        u = u * plane_wave(k, phase=float(rng.uniform(0, 2 * np.pi)))
    return replace(u, note="annular test function")


def random_test_functions(case, n, seed=0, real=False):
    rng = np.random.default_rng(seed)
    sup = case.u.support
    r_in = sup.r_in if isinstance(sup, Annulus) else 0.5
    r_out = sup.r_out if isinstance(sup, Annulus) else 1.5
    return [annular_test_function(case.N, rng, r_in, r_out, real=real) for _ in range(n)]


# ---------------------------------------------------------------- pointwise pieces


def _sp(v, p):
    return np.sign(v) * np.abs(v) ** (p - 1.0)


def gradient_modulus_gap(system, u, x):
    """``|grad_L u|^2 - |grad_L |u||^2``, nonnegative by Cauchy-Schwarz."""
    X, single = as_points(x, system.dim_n)
    uv = u.value(X)
    if np.any(uv == 0):
        raise ValueError("|u| is not differentiable where u vanishes")
    Gu = _hgrad(system, X, u.grad(X))
    ga = np.real(np.conj(uv)[:, None] * Gu) / np.abs(uv)[:, None]
    out = np.sum(np.abs(Gu) ** 2, axis=-1) - np.sum(ga * ga, axis=-1)
    return out[0] if single else out


def hardy_terms(case, X, u=None):
    """Integrands (lhs, main_term, cp_remainder) of the Hardy-type identities."""
    u = case.u if u is None else u
    p = case.p
    uv = u.value(X)
    Gu = _hgrad(case.system, X, u.grad(X))
    ph = np.real(case.phi.value(X))
    Gph = np.real(_hgrad(case.system, X, case.phi.grad(X)))
    v = np.real(case.V.value(X))
    vp = v ** (1.0 / p)
    ratio = uv / ph
    if case.theorem == "hardy_directional":
        z = np.asarray(case.Z(X), dtype=float)
        f = np.sum(Gu * z, axis=-1)
        g = ratio * np.sum(Gph * z, axis=-1)
        xi = (vp * f)[:, None]
        eta = (vp * (f - g))[:, None]
        lhs = v * np.abs(f) ** p
    else:
        xi = vp[:, None] * Gu
        eta = vp[:, None] * (Gu - ratio[:, None] * Gph)
        lhs = v * np.linalg.norm(Gu, axis=-1) ** p
    main = case.lam * np.real(case.W.value(X)) * np.abs(uv) ** p
    rem = cp_eval(p, xi, eta)
    return {"lhs": lhs, "main_term": main, "cp_remainder": rem}


def rellich_terms(case, X, u=None):
    """Integrands of the four right-hand terms of the Rellich identity."""
    u = case.u if u is None else u
    p = case.p
    sysm = case.system
    uv = u.value(X)
    gu = u.grad(X)
    Lu = l_apply_arrays(sysm, X, gu, u.hess(X))
    Gu = _hgrad(sysm, X, gu)
    ph = np.real(case.phi.value(X))
    gph = np.real(case.phi.grad(X))
    Gph = np.real(_hgrad(sysm, X, gph))
    Lph = np.real(l_apply_arrays(sysm, X, gph, case.phi.hess(X)))
    v = np.real(case.V.value(X))
    vp = v ** (1.0 / p)
    xi = (vp * Lu)[:, None]
    eta = (vp * (Lu - Lph / ph * uv))[:, None]
    G = v * _sp(Lph, p) / _sp(ph, p)
    au = np.abs(uv)
    nz = au > 0
    safe = np.where(nz, au, 1.0)
    ga = np.real(np.conj(uv)[:, None] * Gu) / safe[:, None]
    w = np.where(nz, safe ** (p - 2.0), 0.0)
    diff = ga - (au / ph)[:, None] * Gph
    grad_term = -p * (p - 1.0) * G * w * np.sum(diff * diff, axis=-1)
    gap = np.sum(np.abs(Gu) ** 2, axis=-1) - np.sum(ga * ga, axis=-1)
    gap_term = -p * G * w * gap
    return {
        "lhs": v * np.abs(Lu) ** p,
        "main_term": case.lam * np.real(case.W.value(X)) * au**p,
        "cp_remainder": cp_eval(p, xi, eta),
        "rellich_gradient_term": np.where(nz, grad_term, 0.0),
        "rellich_modulus_gap_term": np.where(nz, gap_term, 0.0),
    }


def terms(case, X, u=None):
    if case.theorem == "rellich":
        return rellich_terms(case, X, u)
    return hardy_terms(case, X, u)


# ---------------------------------------------------------------- verification


def domain_for(case, u=None):
    u = case.u if u is None else u
    sup = u.support
    if isinstance(sup, Box):
        return quad.box(sup.lo, sup.hi)
    if not isinstance(sup, Annulus):
        raise CaseError("test function needs an annulus or box support")
    reduce_to = None
    if case.symmetric and u.sym_dims is not None and u.sym_dims < case.N:
        reduce_to = u.sym_dims
    return quad.annulus(case.N, sup.r_in, sup.r_out, sup.center, reduce_to)


def _check_hypotheses(case, u):
    sup = u.support
    if isinstance(sup, Annulus):
        r = np.linspace(sup.r_in, sup.r_out, 9)[1:-1]
        X = np.zeros((r.size, case.N))
        X[:, 0] = r
        if case.N > 1:
            X = np.concatenate([X, np.roll(X, 1, axis=1)])
    else:
        X = np.linspace(sup.lo, sup.hi, 9)[1:-1]
    if np.any(np.real(case.V.value(X)) < 0):
        raise CaseError("V must be nonnegative on the support")
    if np.any(np.real(case.phi.value(X)) == 0):
        raise CaseError("phi vanishes on the support")
    if case.theorem == "rellich" and np.any(rellich_sign(case.system, case.phi, X) < 0):
        raise CaseError("the Rellich identity needs -L phi / phi >= 0")


def _report(case, names, result, pde_check=None):
    comps = ("lhs",) + names
    vals = np.atleast_1d(result.value)
    errs = np.atleast_1d(result.err_est)
    lhs = Term(float(vals[0]), float(errs[0]))
    rhs = {n: Term(float(vals[i + 1]), float(errs[i + 1])) for i, n in enumerate(names)}
    total = sum(t.value for t in rhs.values())
    residual = abs(lhs.value - total)
    rel = residual / abs(lhs.value) if lhs.value != 0 else residual
    qerr = float(np.sum(errs[: len(comps)]))
    passed = residual <= max(case.abs_tol, case.rel_tol * abs(lhs.value)) + qerr
    if pde_check is not None and not pde_check.get("ok", True):
        passed = False
    return IdentityReport(
        case.id,
        case.theorem,
        case.p,
        case.N,
        lhs,
        rhs,
        residual,
        rel,
        qerr,
        case.rel_tol,
        case.abs_tol,
        bool(passed),
        result.converged,
        result.n_cells,
        result.n_evals,
        pde_check,
    )


def _verify(case, theorem, spec, u, pde_check):
    if case.theorem != theorem:
        raise CaseError(f"case {case.id} is a {case.theorem} case, not {theorem}")
    u = case.u if u is None else u
    _check_hypotheses(case, u)
    names = RHS_NAMES[theorem]
    comps = ("lhs",) + names

    def f(X):
        t = terms(case, X, u)
        return np.stack([t[c] for c in comps], axis=-1)

    result = quad.integrate(f, domain_for(case, u), spec or DEFAULT_SPEC)
    return _report(case, names, result, pde_check)


def verify_hardy_directional(case, spec=None, u=None, pde_check=None):
    if case.Z is None:
        raise CaseError("directional Hardy needs a direction field Z")
    return _verify(case, "hardy_directional", spec, u, pde_check)


def verify_hardy(case, spec=None, u=None, pde_check=None):
    return _verify(case, "hardy", spec, u, pde_check)


def verify_rellich(case, spec=None, u=None, pde_check=None):
    return _verify(case, "rellich", spec, u, pde_check)


def verify_poincare_interval(u, spec=None, p=2):
    """Poincare identity on (0, 1) with the first Dirichlet eigenfunction sin(pi x)."""
    if p != 2:
        raise NotImplementedError("only p = 2 has a closed-form first eigenfunction")
    from .cases import poincare_case

    case = poincare_case(u)
    return _verify(case, "poincare_1d", spec, None, None)


def verify(case, spec=None, u=None, pde_check=None):
    if case.theorem == "hardy_directional":
        return verify_hardy_directional(case, spec, u, pde_check)
    if case.theorem == "hardy":
        return verify_hardy(case, spec, u, pde_check)
    if case.theorem == "rellich":
        return verify_rellich(case, spec, u, pde_check)
    if case.theorem == "poincare_1d":
        return _verify(case, "poincare_1d", spec, u, pde_check)
    raise CaseError(f"unknown theorem {case.theorem!r}")


def sample_points(case, n, seed=0, margin=0.1):
    """Random points in the middle of the support, away from degenerate sets."""
    rng = np.random.default_rng(seed)
    sup = case.u.support
    if isinstance(sup, Box):
        lo, hi = np.asarray(sup.lo), np.asarray(sup.hi)
        pad = margin * (hi - lo)
        return rng.uniform(lo + pad, hi - pad, size=(n, len(lo)))
    pts = []
    width = sup.r_out - sup.r_in
    while len(pts) < n:
        d = rng.standard_normal(case.N)
        d /= np.linalg.norm(d)
        r = rng.uniform(sup.r_in + margin * width, sup.r_out - margin * width)
        x = r * d
        if np.isfinite(case.system.singular_distance(x)) and case.system.singular_distance(x) < margin * r:
            continue
        pts.append(x)
    return np.array(pts)


def pde_check(case, n_points=100, seed=0, h_scale=1e-4, tol=1e-4):
    """Strong-form residual of the case's defining equation at random support points."""
    X = sample_points(case, n_points, seed)
    r = np.linalg.norm(X, axis=-1)
    dist = np.minimum(r, case.system.singular_distance(X))
    h = h_scale * np.where(np.isfinite(dist), dist, r)
    phi_p = _sp(np.real(case.phi.value(X)), case.p)
    rhs = case.lam * np.real(case.W.value(X)) * phi_p
    if case.theorem == "rellich":
        res = rellich_pde_residual(case.system, case.V, case.phi, case.p, case.lam, case.W, X, h=h)
        sign_ok = bool(np.all(rellich_sign(case.system, case.phi, X) >= 0))
    else:
        Z = case.Z if case.theorem == "hardy_directional" else None
        res = hardy_pde_residual(case.system, case.V, case.phi, case.p, case.lam, case.W, X, Z=Z, h=h)
        sign_ok = True
    scale = np.maximum(np.abs(rhs), np.abs(res + rhs))
    rel = np.abs(res) / np.where(scale > 0, scale, 1.0)
    worst = float(np.max(rel))
    return {"max_rel_residual": worst, "n_points": int(n_points), "sign_ok": sign_ok, "ok": bool(worst <= tol and sign_ok)}
