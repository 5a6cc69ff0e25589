"""Scalar fields with optional analytic derivatives.

A :class:`ScalarField` evaluates on batches of points of shape ``(M, N)`` (a
single point of shape ``(N,)`` is also accepted) and may carry analytic
gradient and Hessian callables.  Products and sums propagate derivatives, so
test functions such as ``bump(|x|) * Q(x) * exp(i k.x)`` come with exact
derivatives for free.

``sym_dims`` records rotational structure: a field with ``sym_dims = d``
depends on ``x`` only through ``x_1..x_d`` and ``|x_{d+1..N}|``.  ``None``
means no such structure is known.
"""

from __future__ import annotations

from dataclasses import dataclass, replace
from typing import Callable, Optional

import numpy as np


@dataclass(frozen=True)
class Annulus:
    r_in: float
    r_out: float
    center: Optional[tuple] = None

    def __post_init__(self):
        if not 0.0 <= self.r_in < self.r_out:
            raise ValueError(f"annulus needs 0 <= r_in < r_out, got {self.r_in}, {self.r_out}")

    def radius(self, X):
        X = np.atleast_2d(X)
        c = 0.0 if self.center is None else np.asarray(self.center, dtype=float)
        return np.linalg.norm(X - c, axis=-1)

    def contains(self, X):
        r = self.radius(X)
        return (r >= self.r_in) & (r <= self.r_out)


@dataclass(frozen=True)
class Box:
    lo: tuple
    hi: tuple

    def __post_init__(self):
        if len(self.lo) != len(self.hi) or any(a >= b for a, b in zip(self.lo, self.hi)):
            raise ValueError(f"invalid box {self.lo} .. {self.hi}")

    def contains(self, X):
        X = np.atleast_2d(X)
        return np.all((X >= np.asarray(self.lo)) & (X <= np.asarray(self.hi)), axis=-1)


def as_points(x, dim=None):
    """Return ``(X, single)`` with ``X`` two-dimensional."""
    X = np.asarray(x, dtype=float)
    single = X.ndim == 1
    X = np.atleast_2d(X)
    if dim is not None and X.shape[-1] != dim:
        raise ValueError(f"expected points of dimension {dim}, got {X.shape[-1]}")
    return X, single


def _merge_sym(a, b):
    if a is None or b is None:
        return None
    return max(a, b)


def _merge_support(a, b):
    # compact support wins; a product vanishes where either factor does
    return a if a is not None else b


@dataclass(frozen=True)
class ScalarField:
    value: Callable
    dim: int
    grad: Optional[Callable] = None
    hess: Optional[Callable] = None
    support: object = None
    sym_dims: Optional[int] = None
    note: str = ""

    def __call__(self, x):
        X, single = as_points(x, self.dim)
        out = self.value(X)
        return out[0] if single else out

    def gradient(self, x):
        if self.grad is None:
            raise AttributeError("field has no analytic gradient")
        X, single = as_points(x, self.dim)
        out = self.grad(X)
        return out[0] if single else out

    def hessian(self, x):
        if self.hess is None:
            raise AttributeError("field has no analytic Hessian")
        X, single = as_points(x, self.dim)
        out = self.hess(X)
        return out[0] if single else out

    def with_note(self, note):
        return replace(self, note=note)

    def __mul__(self, other):
        if np.isscalar(other):
            c = other
            return ScalarField(
                lambda X: c * self.value(X),
                self.dim,
                None if self.grad is None else (lambda X: c * self.grad(X)),
                None if self.hess is None else (lambda X: c * self.hess(X)),
                self.support,
                self.sym_dims,
                self.note,
            )
        if not isinstance(other, ScalarField):
            return NotImplemented
        if other.dim != self.dim:
            raise ValueError("dimension mismatch in field product")
        f, g = self, other
        grad = hess = None
        if f.grad is not None and g.grad is not None:

            def grad(X):
                return f.grad(X) * g.value(X)[:, None] + f.value(X)[:, None] * g.grad(X)

            if f.hess is not None and g.hess is not None:

                def hess(X):
                    fv, gv = f.value(X), g.value(X)
                    fg, gg = f.grad(X), g.grad(X)
                    cross = fg[:, :, None] * gg[:, None, :]
                    return (
                        f.hess(X) * gv[:, None, None]
                        + fv[:, None, None] * g.hess(X)
                        + cross
                        + np.swapaxes(cross, 1, 2)
                    )

        return ScalarField(
            lambda X: f.value(X) * g.value(X),
            self.dim,
            grad,
            hess,
            _merge_support(f.support, g.support),
            _merge_sym(f.sym_dims, g.sym_dims),
        )

    __rmul__ = __mul__

    def __add__(self, other):
        if not isinstance(other, ScalarField):
            return NotImplemented
        f, g = self, other
        grad = None if f.grad is None or g.grad is None else (lambda X: f.grad(X) + g.grad(X))
        hess = None if f.hess is None or g.hess is None else (lambda X: f.hess(X) + g.hess(X))
        support = f.support if f.support == g.support else None
        return ScalarField(
            lambda X: f.value(X) + g.value(X), self.dim, grad, hess, support, _merge_sym(f.sym_dims, g.sym_dims)
        )

    def __neg__(self):
        return self * -1.0


def from_callables(value, dim, grad=None, hess=None, support=None, sym_dims=None, note=""):
    return ScalarField(value, dim, grad, hess, support, sym_dims, note)


def constant(c, dim):
    return ScalarField(
        lambda X: np.full(X.shape[0], c),
        dim,
        lambda X: np.zeros(X.shape),
        lambda X: np.zeros((X.shape[0], dim, dim)),
        sym_dims=0,
        note=f"constant {c}",
    )


def _last_active(*arrays):
    idx = 0
    for a in arrays:
        a = np.asarray(a)
        nz = np.nonzero(a.reshape(a.shape[0], -1).any(axis=1) if a.ndim > 1 else a)[0]
        if nz.size:
            idx = max(idx, int(nz[-1]) + 1)
    return idx


def quadratic(c0, b, A, dim):
    """``c0 + b.x + x^T A x`` with ``A`` symmetrised."""
    b = np.asarray(b, dtype=float)
    A = np.asarray(A, dtype=float)
    A = 0.5 * (A + A.T)

    def value(X):
        return c0 + X @ b + np.einsum("mi,ij,mj->m", X, A, X)

    return ScalarField(
        value,
        dim,
        lambda X: b + 2.0 * X @ A,
        lambda X: np.broadcast_to(2.0 * A, (X.shape[0], dim, dim)).copy(),
        sym_dims=_last_active(b, A),
        note="quadratic polynomial",
    )


def coordinate(j, dim):
    b = np.zeros(dim)
    b[j] = 1.0
    return quadratic(0.0, b, np.zeros((dim, dim)), dim).with_note(f"x_{j + 1}")


def plane_wave(k, phase=0.0):
    """``exp(i (k.x + phase))``."""
    k = np.asarray(k, dtype=float)
    dim = k.size

    def value(X):
        return np.exp(1j * (X @ k + phase))

    return ScalarField(
        value,
        dim,
        lambda X: 1j * value(X)[:, None] * k,
        lambda X: -value(X)[:, None, None] * np.outer(k, k),
        sym_dims=_last_active(k),
        note="plane wave",
    )


def radial(dim, f, df, d2f, center=None, note="radial"):
    """``f(|x - center|)`` from a profile and its first two derivatives."""
    c = np.zeros(dim) if center is None else np.asarray(center, dtype=float)

    def value(X):
        return f(np.linalg.norm(X - c, axis=-1))

    def grad(X):
        Y = X - c
        r = np.linalg.norm(Y, axis=-1)
        return (df(r) / r)[:, None] * Y

    def hess(X):
        Y = X - c
        r = np.linalg.norm(Y, axis=-1)
        d1, d2 = df(r), d2f(r)
        outer = Y[:, :, None] * Y[:, None, :] / (r**2)[:, None, None]
        eye = np.eye(dim)[None]
        return d2[:, None, None] * outer + (d1 / r)[:, None, None] * (eye - outer)

    return ScalarField(value, dim, grad, hess, sym_dims=0 if center is None else None, note=note)


def radial_power(dim, a, coef=1.0):
    """``coef * |x|^a`` away from the origin."""
    return radial(
        dim,
        lambda r: coef * r**a,
        lambda r: coef * a * r ** (a - 1),
        lambda r: coef * a * (a - 1) * r ** (a - 2),
        note=f"{coef:g}*|x|^{a:g}",
    )


def bump_profile(r_in, r_out):
    """Profile ``exp(-1/(1-s^2))`` with ``s`` mapping ``[r_in, r_out]`` onto ``[-1, 1]``."""
    mid = 0.5 * (r_in + r_out)
    half = 0.5 * (r_out - r_in)

    def parts(r):
        r = np.asarray(r, dtype=float)
        s = (r - mid) / half
        inside = np.abs(s) < 1.0
        q = np.where(inside, 1.0 - s * s, 1.0)
        e = np.where(inside, np.exp(-1.0 / q), 0.0)
        g1 = -2.0 * s / q**2
        g2 = -(2.0 + 6.0 * s * s) / q**3
        return e, g1, g2, inside

    def f(r):
        return parts(r)[0]

    def df(r):
        e, g1, _, inside = parts(r)
        return np.where(inside, e * g1 / half, 0.0)

    def d2f(r):
        e, g1, g2, inside = parts(r)
        return np.where(inside, e * (g2 + g1 * g1) / half**2, 0.0)

    return f, df, d2f


def annular_bump(dim, r_in, r_out):
    f, df, d2f = bump_profile(r_in, r_out)
    field = radial(dim, f, df, d2f, note=f"bump on {r_in:g}<=|x|<={r_out:g}")
    return replace(field, support=Annulus(r_in, r_out))


def power(field, c):
    """``field**c`` for a real field that stays positive where it is used."""
    f = field

    def value(X):
        return f.value(X) ** c

    grad = hess = None
    if f.grad is not None:

        def grad(X):
            v = f.value(X)
            return (c * v ** (c - 1))[:, None] * f.grad(X)

        if f.hess is not None:

            def hess(X):
                v = f.value(X)
                g = f.grad(X)
                return (c * (c - 1) * v ** (c - 2))[:, None, None] * (
                    g[:, :, None] * g[:, None, :]
                ) + (c * v ** (c - 1))[:, None, None] * f.hess(X)

    return ScalarField(value, f.dim, grad, hess, f.support, f.sym_dims, f"({f.note})^{c:g}")


def grushin_gauge(m, k, gamma):
    """Gauge ``(|x|^{2(1+g)} + (1+g)^2 |y|^2)^{1/(2(1+g))}`` on ``R^m x R^k``."""
    dim = m + k
    a = 1.0 + gamma

    def P(X):
        x, y = X[:, :m], X[:, m:]
        return np.sum(x * x, axis=-1) ** a + a * a * np.sum(y * y, axis=-1)

    def gradP(X):
        x, y = X[:, :m], X[:, m:]
        nx2 = np.sum(x * x, axis=-1)
        return np.concatenate([(2.0 * a * nx2**gamma)[:, None] * x, 2.0 * a * a * y], axis=-1)

    def hessP(X):
        x = X[:, :m]
        nx2 = np.sum(x * x, axis=-1)
        H = np.zeros((X.shape[0], dim, dim))
        H[:, :m, :m] = (2.0 * a * nx2**gamma)[:, None, None] * np.eye(m)
        if gamma != 0.0:
            with np.errstate(divide="ignore", invalid="ignore"):
                w = np.where(nx2 > 0, 4.0 * a * gamma * nx2 ** (gamma - 1.0), 0.0)
            H[:, :m, :m] += w[:, None, None] * x[:, :, None] * x[:, None, :]
        H[:, m:, m:] = 2.0 * a * a * np.eye(k)
        return H

    base = ScalarField(P, dim, gradP, hessP, note="grushin gauge^(2(1+g))")
    return replace(power(base, 1.0 / (2.0 * a)), note=f"grushin gauge (m={m}, k={k}, gamma={gamma:g})")
