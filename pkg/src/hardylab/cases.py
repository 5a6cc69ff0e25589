"""Registry of built-in identity cases.

Ids follow ``<family>-N<dim>-p<p>``.  Every case is rebuilt on request, so
callers may freely override ``u`` or ``lam`` with :func:`dataclasses.replace`.
"""

from __future__ import annotations

import math
from dataclasses import replace

import numpy as np

from .fields import make_system
from .identities import CaseError, IdentityCase, pde_check
from .scalar import Box, ScalarField, annular_bump, constant, grushin_gauge, plane_wave, power, radial_power

R_IN, R_OUT = 0.5, 1.5
# N = p is kept: the constant vanishes, phi = 1 and the identity degenerates to C_p(grad u, grad u)
HARDY_GRID = [(N, p) for N in (3, 4, 5) for p in (1.5, 2.0, 3.0) if N >= p]
RELLICH_GRID = [(4, 1.5), (5, 1.5), (5, 2.0), (6, 2.0), (7, 2.0), (6, 2.5), (7, 2.5), (7, 3.0)]
L2_RELLICH_DIMS = (5, 6)


class UnknownCaseError(KeyError):
    pass


def _radial_dir(X):
    return X / np.linalg.norm(X, axis=-1, keepdims=True)


def default_u(dim, axis=0, r_in=R_IN, r_out=R_OUT):
    k = np.zeros(dim)
    k[axis] = 1.0
    u = annular_bump(dim, r_in, r_out) * plane_wave(k)
    return replace(u, note=f"annular bump x exp(i x_{axis + 1})")


def _hardy(N, p, directional):
    alpha = (N - p) / p
    theorem = "hardy_directional" if directional else "hardy"
    fam = "cor41" if directional else "cor42"
    label = "Corollary 4.1: directional L^p Hardy identity" if directional else "Corollary 4.2: L^p Hardy identity"
    return IdentityCase(
        id=f"{fam}-N{N}-p{p:g}",
        theorem=theorem,
        system=make_system("euclidean", N=N),
        p=p,
        N=N,
        u=default_u(N),
        phi=replace(radial_power(N, -alpha), note=f"|x|^-{alpha:g}"),
        V=constant(1.0, N),
        W=replace(radial_power(N, -p), note=f"|x|^-{p:g}"),
        lam=alpha**p,
        Z=_radial_dir if directional else None,
        symmetric=True,
        citation=f"{label}, constant ((N-p)/p)^p = {alpha**p:.12g}",
        description=f"euclidean R^{N}, V = 1, phi = |x|^-(N-p)/p, W = |x|^-p",
        rel_tol=1e-5,
    )


def rellich_constant(N, p):
    """``N (p-1) (N-2p) / p^2``."""
    return N * (p - 1.0) * (N - 2.0 * p) / p**2


def _rellich(N, p, fam="cor43"):
    if not N > 2 * p:
        raise CaseError("Rellich cases need N > 2p")
    a = (N - 2 * p) / p
    A = rellich_constant(N, p)
    if fam == "cor44":
        cid = f"cor44-N{N}"
        cite = f"Corollary 4.4: L^2 Rellich identity, C_N = N(N-4)/4, C_{N} = {A:g}"
    else:
        cid = f"cor43-N{N}-p{p:g}"
        cite = f"Corollary 4.3: L^p Rellich identity, C_(N,p) = N(p-1)(N-2p)/p^2 = {A:.12g}"
    return IdentityCase(
        id=cid,
        theorem="rellich",
        system=make_system("euclidean", N=N),
        p=p,
        N=N,
        u=default_u(N, axis=1),
        phi=replace(radial_power(N, -a), note=f"|x|^-{a:g}"),
        V=constant(1.0, N),
        W=replace(radial_power(N, -2 * p), note=f"|x|^-{2 * p:g}"),
        lam=A**p,
        symmetric=True,
        citation=cite,
        description=f"euclidean R^{N}, V = 1, phi = |x|^-(N-2p)/p, W = |x|^-2p",
        rel_tol=1e-4,
    )


def grushin_hardy_case():
    """Hardy case for the Grushin operator on R^2 (m = k = 1, gamma = 1), p = 2.

    With the gauge rho = (x^4 + 4 y^2)^(1/4) and homogeneous dimension Q = 3,
    phi = rho^(-(Q-p)/p) solves the Hardy equation with V = 1,
    W = |x|^p / rho^(2p) and lam = ((Q-p)/p)^p.
    """
    p, Q = 2.0, 3.0
    rho = grushin_gauge(1, 1, 1.0)
    a = (Q - p) / p

    def W(X):
        r = rho.value(X)
        return np.abs(X[:, 0]) ** p / r ** (2 * p)

    return IdentityCase(
        id="grushin-hardy",
        theorem="hardy",
        system=make_system("grushin", m=1, k=1, gamma=1.0),
        p=p,
        N=2,
        u=default_u(2),
        phi=replace(power(rho, -a), note=f"rho^-{a:g}, rho = (x^4 + 4y^2)^(1/4)"),
        V=constant(1.0, 2),
        W=ScalarField(W, 2, note="|x|^2 / rho^4"),
        lam=a**p,
        symmetric=False,
        citation="Hardy identity for the Grushin operator (gamma = 1), gauge weight, constant ((Q-p)/p)^p with Q = 3",
        description="grushin m = k = 1, gamma = 1, V = 1",
        rel_tol=1e-5,
    )


def sine_mode(n):
    w = n * math.pi

    def value(X):
        return np.sin(w * X[:, 0])

    def grad(X):
        return (w * np.cos(w * X[:, 0]))[:, None]

    def hess(X):
        return (-w * w * np.sin(w * X[:, 0]))[:, None, None]

    return ScalarField(value, 1, grad, hess, support=Box([0.0], [1.0]), note=f"sin({n} pi x)")


def parabola():
    """``x (1 - x)`` on the unit interval."""
    return ScalarField(
        lambda X: X[:, 0] * (1.0 - X[:, 0]),
        1,
        lambda X: (1.0 - 2.0 * X[:, 0])[:, None],
        lambda X: np.full((X.shape[0], 1, 1), -2.0),
        support=Box([0.0], [1.0]),
        note="x(1-x)",
    )


def poincare_case(u=None):
    u = sine_mode(2) if u is None else u
    if u.support is None:
        u = replace(u, support=Box([0.0], [1.0]))
    return IdentityCase(
        id="poincare-1d",
        theorem="poincare_1d",
        system=make_system("euclidean", N=1),
        p=2.0,
        N=1,
        u=u,
        phi=sine_mode(1),
        V=constant(1.0, 1),
        W=constant(1.0, 1),
        lam=math.pi**2,
        citation="Poincare identity on (0, 1), first Dirichlet eigenfunction sin(pi x), lambda_1 = pi^2",
        description="euclidean (0, 1), p = 2",
        rel_tol=1e-8,
        abs_tol=1e-12,
    )


def _registry():
    reg = {}
    for N, p in HARDY_GRID:
        reg[f"cor41-N{N}-p{p:g}"] = (lambda N=N, p=p: _hardy(N, p, True))
        reg[f"cor42-N{N}-p{p:g}"] = (lambda N=N, p=p: _hardy(N, p, False))
    for N, p in RELLICH_GRID:
        reg[f"cor43-N{N}-p{p:g}"] = (lambda N=N, p=p: _rellich(N, p))
    for N in L2_RELLICH_DIMS:
        reg[f"cor44-N{N}"] = (lambda N=N: _rellich(N, 2.0, "cor44"))
    reg["grushin-hardy"] = grushin_hardy_case
    reg["poincare-1d"] = poincare_case
    return reg


REGISTRY = _registry()
COROLLARY_SUITE = tuple(k for k in REGISTRY if k.startswith("cor"))


def list_cases():
    return list(REGISTRY)


def case_library(case_id, validate=True):
    """Build a registered case; ``validate`` runs its strong-form PDE check."""
    try:
        build = REGISTRY[case_id]
    except KeyError:
        raise UnknownCaseError(case_id) from None
    case = build()
    if validate:
        chk = pde_check(case, n_points=20)
        if not chk["ok"]:
            raise CaseError(f"case {case_id} fails its PDE check: {chk}")
    return case


def describe_case(case_id):
    case = case_library(case_id, validate=False)
    s = case.summary()
    lines = [
        f"id: {s['id']}",
        f"theorem: {s['theorem']}",
        f"system: {s['system']['kind']} {s['system']['params']}",
        f"p: {s['p']:g}",
        f"N: {s['N']}",
        f"lambda: {s['lambda']:.12g}",
        f"phi: {s['phi']}",
        f"V: {s['V']}",
        f"W: {s['W']}",
    ]
    if s["Z"]:
        lines.append(f"Z: {s['Z']}")
    lines.append(f"citation: {s['citation']}")
    return "\n".join(lines)
