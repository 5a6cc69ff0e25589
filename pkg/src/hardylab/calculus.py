"""Finite-difference derivatives and pointwise residuals of the identities' ingredients.

The residuals here are strong-form checks: each compares two independent
routes to the same quantity, so a correct construction leaves only the O(h^2)
truncation error of the central stencils.
"""

from __future__ import annotations

import numpy as np

from . import finite_diff as fd
from .fields import (
    _euclidean_grad,
    _hgrad,
    default_step,
    horizontal_divergence,
    l_apply,
    l_apply_arrays,
)
from .scalar import ScalarField, as_points


def fd_derivative(field, x, direction, order=1, h=1e-4):
    """Central difference of ``field`` along ``direction`` (O(h^2))."""
    value = field.value if isinstance(field, ScalarField) else field
    X, single = as_points(x)
    out = fd.directional(value, X, direction, h, order)
    return out[0] if single else out


def _signed_power(v, p):
    """``|v|^{p-2} v`` for real ``v``."""
    return np.sign(v) * np.abs(v) ** (p - 1.0)


def composite_quotient(u, phi, p):
    """The field ``|u|^p / (|phi|^{p-2} phi)`` without analytic derivatives."""

    def value(X):
        return np.abs(u.value(X)) ** p / _signed_power(phi.value(X), p)

    return ScalarField(value, u.dim, note="|u|^p/(|phi|^(p-2) phi)")


def prop21_residual(system, u, phi, p, x, h=None):
    """|LHS - RHS| of the expansion of ``L(|u|^p / (|phi|^{p-2} phi))``.

    LHS differentiates the composite directly; RHS assembles
    ``L|u|^p``, ``grad_L |u|^p``, ``L phi`` and ``grad_L phi`` separately.
    Both sides use central differences with step ``h``.
    """
    X, single = as_points(x, system.dim_n)
    if h is None:
        h = default_step(X, system)
    ph = phi.value(X)
    if np.any(ph == 0):
        raise ZeroDivisionError("phi vanishes at an evaluation point")
    lhs = l_apply(system, composite_quotient(u, phi, p), X, h)

    def mod_p(Y):
        return np.abs(u.value(Y)) ** p

    mp = mod_p(X)
    l_mod = l_apply_arrays(system, X, fd.gradient(mod_p, X, h), fd.hessian(mod_p, X, h))
    g_mod = _hgrad(system, X, fd.gradient(mod_p, X, h))
    g_phi = np.real(_hgrad(system, X, _euclidean_grad(phi, X, h)))
    l_phi = np.real(l_apply(system, phi, X, h))
    bracket = (
        l_mod
        - (p - 1.0) * l_phi / ph * mp
        - 2.0 * (p - 1.0) * np.sum(g_mod * g_phi, axis=-1) / ph
        + p * (p - 1.0) * np.sum(g_phi * g_phi, axis=-1) / ph**2 * mp
    )
    rhs = bracket / _signed_power(ph, p)
    out = np.abs(lhs - rhs)
    return out[0] if single else out


def hardy_flux(system, V, phi, p, Z=None, h=None):
    """The vector field ``V |grad_L phi . Z|^{p-2} (grad_L phi . Z) Z`` (or the Z-free flux)."""

    def F(Y):
        hy = h if h is not None else default_step(Y, system)
        g = np.real(_hgrad(system, Y, _euclidean_grad(phi, Y, hy)))
        v = np.real(V.value(Y))
        if Z is None:
            nrm = np.linalg.norm(g, axis=-1)
            with np.errstate(divide="ignore", invalid="ignore"):
                w = np.where(nrm > 0, nrm ** (p - 2.0), 0.0)
            return (v * w)[:, None] * g
        z = np.asarray(Z(Y), dtype=float)
        gz = np.sum(g * z, axis=-1)
        return (v * _signed_power(gz, p))[:, None] * z

    return F


def hardy_pde_residual(system, V, phi, p, lam, W, x, Z=None, h=None):
    """``-div_L(flux) - lam W |phi|^{p-2} phi`` at ``x``.

    The flux uses the analytic gradient of ``phi`` when available; its
    divergence is always taken by central differences, so a correct case
    leaves an O(h^2) residual.
    """
    X, single = as_points(x, system.dim_n)
    if h is None:
        h = default_step(X, system)
    F = hardy_flux(system, V, phi, p, Z, h if phi.grad is None else None)
    lhs = -horizontal_divergence(system, F, X, h=h)
    rhs = lam * np.real(W.value(X)) * _signed_power(np.real(phi.value(X)), p)
    out = lhs - rhs
    return out[0] if single else out


def rellich_flux(system, V, phi, p, h=None):
    """The scalar field ``V |L phi|^{p-2} L phi``."""

    def G(Y):
        hy = h if h is not None else default_step(Y, system)
        lp = np.real(l_apply(system, phi, Y, hy))
        return np.real(V.value(Y)) * _signed_power(lp, p)

    return ScalarField(G, system.dim_n, note="V|L phi|^(p-2) L phi")


def rellich_pde_residual(system, V, phi, p, lam, W, x, h=None):
    """``L(V |L phi|^{p-2} L phi) - lam W |phi|^{p-2} phi`` at ``x``.

    The inner ``L phi`` is analytic for fields with a Hessian; the outer ``L``
    is always a central-difference stencil.
    """
    X, single = as_points(x, system.dim_n)
    if h is None:
        h = default_step(X, system)
    G = rellich_flux(system, V, phi, p, None if phi.hess is not None else h)
    lhs = l_apply(system, G, X, h)
    rhs = lam * np.real(W.value(X)) * _signed_power(np.real(phi.value(X)), p)
    out = np.real(lhs) - rhs
    return out[0] if single else out


def rellich_sign(system, phi, x, h=None):
    """``-L phi / phi``; the Rellich identity needs this to be nonnegative."""
    X, single = as_points(x, system.dim_n)
    out = -np.real(l_apply(system, phi, X, h)) / np.real(phi.value(X))
    return out[0] if single else out


def convergence_order(residual, steps):
    """Observed order from residuals evaluated at the given steps.

    ``residual(h)`` returns an array over points; the result is the per-point
    least-squares slope of ``log|residual|`` against ``log h``.
    """
    steps = np.asarray(steps, dtype=float)
    R = np.array([np.abs(np.asarray(residual(h))) for h in steps])
    logs = np.log(steps)
    logs = logs - logs.mean()
    with np.errstate(divide="ignore"):
        logR = np.log(R)
    logR = logR - logR.mean(axis=0)
    return np.sum(logs[:, None] * logR, axis=0) / np.sum(logs**2)
