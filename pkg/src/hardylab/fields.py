"""Vector-field systems and the induced horizontal calculus.

A system is an ``l x N`` matrix field ``sigma``; its rows are the vector fields
``X_i = sum_j sigma_ij d_j``.  From it we build

* the horizontal gradient ``grad_L u = sigma grad u``,
* the horizontal divergence ``div_L F = div(sigma^T F)``,
* the second-order operator ``L u = div_L grad_L u``,
* the quasilinear operator ``-div_L(|grad_L u|^{p-2} grad_L u)``.

All operators take points as ``(N,)`` or ``(M, N)`` arrays.  Complex fields
are handled by numpy's complex dtype; linear operators act on real and
imaginary parts separately by construction.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import Callable, Optional

import numpy as np

from . import finite_diff as fd
from .scalar import ScalarField, as_points

KINDS = ("euclidean", "grushin", "greiner", "custom")

# default relative step for finite differences when no analytic derivative is available
FD_REL_STEP = 1e-4


class UnsupportedSystemError(ValueError):
    """Raised for parameter combinations a built-in system does not support."""


@dataclass(frozen=True)
class VectorFieldSystem:
    kind: str
    dim_n: int
    dim_l: int
    params: dict
    sigma_fn: Callable = field(repr=False)
    sigma_jac_fn: Callable = field(repr=False)
    sigma_div_fn: Callable = field(repr=False)
    singular_distance_fn: Callable = field(repr=False)

    def sigma(self, x):
        X, single = as_points(x, self.dim_n)
        out = self.sigma_fn(X)
        return out[0] if single else out

    def sigma_jac(self, x):
        """``J[m, i, k, j] = d_j sigma_ik`` at each point."""
        X, single = as_points(x, self.dim_n)
        out = self.sigma_jac_fn(X)
        return out[0] if single else out

    def sigma_div(self, x):
        X, single = as_points(x, self.dim_n)
        out = self.sigma_div_fn(X)
        return out[0] if single else out

    def singular_distance(self, x):
        """Distance to the set where ``sigma`` fails to be smooth (``inf`` if none)."""
        X, single = as_points(x, self.dim_n)
        out = self.singular_distance_fn(X)
        return out[0] if single else out

    @property
    def is_identity(self):
        return self.kind == "euclidean" or (self.kind == "grushin" and self.params["gamma"] == 0.0)

    @property
    def rotation_invariant(self):
        return self.kind == "euclidean"

    def to_dict(self):
        return {"kind": self.kind, "dim_n": self.dim_n, "dim_l": self.dim_l, "params": dict(self.params)}


def _no_singularity(X):
    return np.full(X.shape[0], np.inf)


def _euclidean(n):
    eye = np.eye(n)
    return VectorFieldSystem(
        "euclidean",
        n,
        n,
        {},
        lambda X: np.broadcast_to(eye, (X.shape[0], n, n)).copy(),
        lambda X: np.zeros((X.shape[0], n, n, n)),
        lambda X: np.zeros((X.shape[0], n)),
        _no_singularity,
    )


def _grushin(m, k, gamma):
    if m < 1 or k < 1:
        raise UnsupportedSystemError("grushin needs m >= 1 and k >= 1")
    if gamma < 0:
        raise UnsupportedSystemError("grushin needs gamma >= 0")
    n = m + k

    def sigma(X):
        nx = np.linalg.norm(X[:, :m], axis=-1)
        S = np.zeros((X.shape[0], n, n))
        S[:, :m, :m] = np.eye(m)
        S[:, m:, m:] = (nx**gamma)[:, None, None] * np.eye(k)
        return S

    def jac(X):
        x = X[:, :m]
        nx = np.linalg.norm(x, axis=-1)
        J = np.zeros((X.shape[0], n, n, n))
        if gamma != 0.0:
            with np.errstate(divide="ignore", invalid="ignore"):
                c = np.where(nx > 0, gamma * nx ** (gamma - 2.0), 0.0)
            dg = c[:, None] * x  # d_{x_j} |x|^gamma
            for a in range(k):
                J[:, m + a, m + a, :m] = dg
        return J

    def div(X):
        # the y-rows differentiate |x|^gamma in y only
        return np.zeros((X.shape[0], n))

    smooth = gamma == 0.0 or (float(gamma) / 2.0).is_integer()

    def sing(X):
        if smooth:
            return _no_singularity(X)
        return np.linalg.norm(X[:, :m], axis=-1)

    return VectorFieldSystem("grushin", n, n, {"m": m, "k": k, "gamma": float(gamma)}, sigma, jac, div, sing)


def _greiner(nh, gamma):
    if nh < 1:
        raise UnsupportedSystemError("greiner needs n >= 1")
    if gamma < 1:
        raise UnsupportedSystemError(f"greiner needs gamma >= 1, got {gamma}")
    n = 2 * nh + 1
    ell = 2 * nh
    t = n - 1

    def coeff(X):
        z2 = np.sum(X[:, :ell] ** 2, axis=-1)
        if gamma == 1.0:
            return np.ones_like(z2), np.zeros_like(z2)
        with np.errstate(divide="ignore", invalid="ignore"):
            w = z2 ** (gamma - 1.0)
            dw = np.where(z2 > 0, (2.0 * gamma - 2.0) * z2 ** (gamma - 2.0), 0.0)
        return w, dw  # |z|^{2g-2} and its derivative factor: d_j w = dw * z_j

    def sigma(X):
        x, y = X[:, :nh], X[:, nh:ell]
        w, _ = coeff(X)
        S = np.zeros((X.shape[0], ell, n))
        S[:, :, :ell] = np.eye(ell)
        S[:, :nh, t] = 2.0 * gamma * y * w[:, None]
        S[:, nh:, t] = -2.0 * gamma * x * w[:, None]
        return S

    def jac(X):
        z = X[:, :ell]
        x, y = X[:, :nh], X[:, nh:ell]
        w, dw = coeff(X)
        J = np.zeros((X.shape[0], ell, n, n))
        for i in range(nh):
            # row X_i: t-entry 2g y_i w
            J[:, i, t, :ell] = 2.0 * gamma * y[:, i, None] * dw[:, None] * z
            J[:, i, t, nh + i] += 2.0 * gamma * w
            # row Y_i: t-entry -2g x_i w
            J[:, nh + i, t, :ell] = -2.0 * gamma * x[:, i, None] * dw[:, None] * z
            J[:, nh + i, t, i] += -2.0 * gamma * w
        return J

    def div(X):
        # sum_j d_j sigma_ij only sees d_t of the t-entry, which is t-independent
        return np.zeros((X.shape[0], ell))

    smooth = float(gamma).is_integer()

    def sing(X):
        if smooth:
            return _no_singularity(X)
        return np.linalg.norm(X[:, :ell], axis=-1)

    return VectorFieldSystem("greiner", n, ell, {"n": nh, "gamma": float(gamma)}, sigma, jac, div, sing)


def _custom(sigma, dim_n, dim_l, sigma_jac=None, h=1e-5):
    def sig(X):
        return np.asarray(sigma(X), dtype=float)

    if sigma_jac is None:

        def jac(X):
            return fd.gradient(sig, X, h)

    else:
        jac = sigma_jac

    def div(X):
        J = jac(X)
        return np.einsum("mijj->mi", J)

    return VectorFieldSystem("custom", dim_n, dim_l, {}, sig, jac, div, _no_singularity)


def make_system(kind, *, N=None, m=None, k=None, n=None, gamma=None, sigma=None, dim_l=None, sigma_jac=None):
    """Build a vector-field system.

    ``euclidean`` needs ``N``; ``grushin`` needs ``m``, ``k`` and ``gamma``;
    ``greiner`` needs ``n`` and ``gamma`` (ambient dimension ``2n+1``);
    ``custom`` needs a vectorised ``sigma`` callable plus ``N`` and ``dim_l``.
    """
    if kind == "euclidean":
        if N is None or N < 1:
            raise UnsupportedSystemError("euclidean needs N >= 1")
        return _euclidean(int(N))
    if kind == "grushin":
        if m is None or k is None:
            raise UnsupportedSystemError("grushin needs m and k")
        return _grushin(int(m), int(k), 0.0 if gamma is None else float(gamma))
    if kind == "greiner":
        if gamma is None:
            raise UnsupportedSystemError("greiner needs gamma")
        return _greiner(1 if n is None else int(n), float(gamma))
    if kind == "custom":
        if sigma is None or N is None or dim_l is None:
            raise UnsupportedSystemError("custom systems need sigma, N and dim_l")
        return _custom(sigma, int(N), int(dim_l), sigma_jac)
    raise UnsupportedSystemError(f"unknown system kind {kind!r}")


def system_from_dict(d):
    d = dict(d)
    kind = d.pop("kind")
    params = d.pop("params", {})
    d.update(params)
    if "dim_n" in d:
        d.setdefault("N", d.pop("dim_n"))
    d.pop("dim_l", None)
    return make_system(kind, **d)


def default_step(X, system=None, scale=FD_REL_STEP):
    """``scale * dist(x, singular set)`` with the origin treated as singular."""
    dist = np.linalg.norm(X, axis=-1)
    if system is not None:
        dist = np.minimum(dist, system.singular_distance_fn(X))
    dist = np.where(np.isfinite(dist) & (dist > 0), dist, 1.0)
    return scale * dist


def _euclidean_grad(field, X, h):
    if field.grad is not None:
        return field.grad(X)
    return fd.gradient(field.value, X, h)


def _hgrad(system, X, G):
    if system.is_identity:
        return G
    return np.einsum("mij,mj->mi", system.sigma_fn(X), G)


def horizontal_gradient(system, field, x, h=None):
    """``sigma(x) grad u(x)``; analytic gradient when the field has one."""
    X, single = as_points(x, system.dim_n)
    if h is None:
        h = default_step(X, system)
    out = _hgrad(system, X, _euclidean_grad(field, X, h))
    return out[0] if single else out


def horizontal_divergence(system, F, x, jac=None, h=None, fd_enabled=True):
    """``div(sigma^T F)`` for a vectorised ``F: (M, N) -> (M, l)``.

    Uses ``sum_ij sigma_ij d_j F_i + (sum_j d_j sigma_ij) F_i``.  The Jacobian
    ``jac[m, i, j] = d_j F_i`` is taken from ``jac`` when given, otherwise from
    central differences.
    """
    X, single = as_points(x, system.dim_n)
    if jac is None:
        if not fd_enabled:
            raise ValueError("no Jacobian supplied and finite differences disabled")
        if h is None:
            h = default_step(X, system)
        J = fd.gradient(F, X, h)
    else:
        J = jac(X)
    S = system.sigma_fn(X)
    out = np.einsum("mij,mij->m", S, J) + np.einsum("mi,mi->m", system.sigma_div_fn(X), F(X))
    return out[0] if single else out


def l_apply_arrays(system, X, G, H):
    """``L u`` from Euclidean gradient ``G`` and Hessian ``H`` at points ``X``."""
    if system.is_identity:
        return np.trace(H, axis1=1, axis2=2)
    S = system.sigma_fn(X)
    A = np.einsum("mij,mik->mjk", S, S)
    second = np.einsum("mjk,mjk->m", A, H)
    # sum_ijk sigma_ij d_j sigma_ik d_k u
    dS = np.einsum("mij,mikj->mk", S, system.sigma_jac_fn(X))
    first = np.einsum("mk,mk->m", dS, G)
    div = np.einsum("mi,mi->m", system.sigma_div_fn(X), np.einsum("mij,mj->mi", S, G))
    return second + first + div


def l_apply(system, field, x, h=None):
    """``L u = div_L grad_L u``; the Laplacian for the Euclidean system."""
    X, single = as_points(x, system.dim_n)
    value = field.value if isinstance(field, ScalarField) else field
    if isinstance(field, ScalarField) and field.grad is not None and field.hess is not None:
        G, H = field.grad(X), field.hess(X)
    else:
        if h is None:
            h = default_step(X, system)
        G = fd.gradient(value, X, h)
        H = fd.hessian(value, X, h)
    out = l_apply_arrays(system, X, G, H)
    return out[0] if single else out


class SingularPointError(ValueError):
    """Raised when an operator is evaluated where its formula is singular."""


def lp_apply(system, field, p, x, h=None):
    """``-div_L(|grad_L u|^{p-2} grad_L u)`` for a real field.

    The sign makes this positive on the radial profiles used in Hardy
    inequalities; for ``p = 2`` it is exactly ``-l_apply``.
    """
    if not p > 1:
        raise ValueError("p must exceed 1")
    if p == 2:
        out = l_apply(system, field, x, h)
        return -np.real(out)
    X, single = as_points(x, system.dim_n)
    if h is None:
        h = default_step(X, system)
    inner_h = h

    def flux(Y):
        hy = default_step(Y, system) if field.grad is None else inner_h
        g = np.real(_hgrad(system, Y, _euclidean_grad(field, Y, hy)))
        nrm = np.linalg.norm(g, axis=-1)
        with np.errstate(divide="ignore", invalid="ignore"):
            w = nrm ** (p - 2.0)
        return w[:, None] * g

    g0 = np.real(_hgrad(system, X, _euclidean_grad(field, X, h)))
    if p < 2 and np.any(np.linalg.norm(g0, axis=-1) == 0.0):
        raise SingularPointError("vanishing horizontal gradient with p < 2")
    out = -horizontal_divergence(system, flux, X, h=h)
    return out[0] if single else out


def sphere_area(n):
    """Surface measure of the unit sphere in ``R^n``."""
    return 2.0 * math.pi ** (n / 2.0) / math.gamma(n / 2.0)
