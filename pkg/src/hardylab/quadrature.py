"""Adaptive tensor Gauss-Legendre quadrature on boxes and annuli.

Annuli are integrated in spherical coordinates ``(r, theta_1, ...)``.  When
the integrand depends on ``x`` only through ``x_1..x_d`` and ``|x_{d+1..N}|``
(``reduce_to=d``), the trailing sphere is integrated in closed form and the
work is done in ``d + 1`` coordinates whatever ``N`` is.

Error estimates compare the full rule against rules with one axis dropped by
one order; cells are bisected along the axis whose drop moves the result
most.  Estimates are heuristic, not bounds.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from functools import lru_cache
from typing import Optional

import numpy as np

from .fields import sphere_area

MAX_DIM = 5
CHUNK_POINTS = 60000


class QuadratureAbort(RuntimeError):
    """Raised when the integrand returns a non-finite value."""

    def __init__(self, message, location=None):
        super().__init__(message)
        self.location = location


@dataclass(frozen=True)
class IntegrationDomain:
    kind: str
    dim: int
    lo: Optional[tuple] = None
    hi: Optional[tuple] = None
    r_in: float = 0.0
    r_out: float = 1.0
    center: Optional[tuple] = None
    reduce_to: Optional[int] = None

    def __post_init__(self):
        if self.kind == "box":
            if self.lo is None or self.hi is None or len(self.lo) != self.dim or len(self.hi) != self.dim:
                raise ValueError("box needs lo and hi of length dim")
            if any(a >= b for a, b in zip(self.lo, self.hi)):
                raise ValueError("box needs lo < hi on every axis")
        elif self.kind == "annulus":
            if not 0.0 <= self.r_in < self.r_out:
                raise ValueError("annulus needs 0 <= r_in < r_out")
            if self.reduce_to is not None and not 0 <= self.reduce_to <= self.dim:
                raise ValueError("reduce_to must lie in [0, dim]")
        else:
            raise ValueError(f"unknown domain kind {self.kind!r}")

    @property
    def param_dim(self):
        if self.kind == "box":
            return self.dim
        d = self.dim if self.reduce_to is None else self.reduce_to
        return self.dim if d >= self.dim else d + 1


def box(lo, hi):
    lo = tuple(float(v) for v in np.atleast_1d(lo))
    hi = tuple(float(v) for v in np.atleast_1d(hi))
    return IntegrationDomain("box", len(lo), lo=lo, hi=hi)


def annulus(dim, r_in, r_out, center=None, reduce_to=None):
    c = None if center is None else tuple(float(v) for v in center)
    return IntegrationDomain("annulus", int(dim), r_in=float(r_in), r_out=float(r_out), center=c, reduce_to=reduce_to)


@dataclass(frozen=True)
class QuadratureSpec:
    base_rule: str = "gauss_legendre"
    points_per_axis: int = 8
    max_refine_depth: int = 40
    rel_tol: float = 1e-9
    abs_tol: float = 1e-14
    max_cells: int = 20000

    def __post_init__(self):
        if self.base_rule != "gauss_legendre":
            raise ValueError(f"unsupported base rule {self.base_rule!r}")
        if self.points_per_axis < 2:
            raise ValueError("points_per_axis must be at least 2")
        if self.rel_tol <= 0 or self.abs_tol <= 0:
            raise ValueError("tolerances must be positive")

    def to_dict(self):
        return {
            "base_rule": self.base_rule,
            "points_per_axis": self.points_per_axis,
            "max_refine_depth": self.max_refine_depth,
            "rel_tol": self.rel_tol,
            "abs_tol": self.abs_tol,
            "max_cells": self.max_cells,
        }


@dataclass
class QuadResult:
    value: object
    err_est: object
    converged: bool
    n_cells: int
    n_evals: int
    max_depth: int

    def __iter__(self):
        yield self.value
        yield self.err_est


@lru_cache(maxsize=None)
def _gl01(k):
    x, w = np.polynomial.legendre.leggauss(k)
    return 0.5 * (x + 1.0), 0.5 * w


@lru_cache(maxsize=None)
def _tensor_rules(D, k):
    """Reference rules on [0,1]^D: the full order-k rule then one per axis with order k-1 there."""
    rules = []
    for drop in [None] + list(range(D)):
        axes_nodes, axes_w = [], []
        for a in range(D):
            x, w = _gl01(k - 1 if a == drop else k)
            axes_nodes.append(x)
            axes_w.append(w)
        grids = np.meshgrid(*axes_nodes, indexing="ij")
        nodes = np.stack([g.ravel() for g in grids], axis=-1)
        wg = np.meshgrid(*axes_w, indexing="ij")
        weights = np.prod(np.stack([g.ravel() for g in wg], axis=-1), axis=-1)
        rules.append((nodes, weights))
    return rules


def _spherical(u, D):
    """Map ``(r, theta_1..theta_{D-1})`` rows to Cartesian points and the Jacobian."""
    r = u[:, 0]
    Z = np.empty_like(u)
    jac = r ** (D - 1)
    sprod = np.ones_like(r)
    for k in range(1, D):
        th = u[:, k]
        Z[:, k - 1] = r * sprod * np.cos(th)
        if k < D - 1:
            jac = jac * np.sin(th) ** (D - 1 - k)
        sprod = sprod * np.sin(th)
    Z[:, D - 1] = r * sprod
    return Z, jac


class _Map:
    """Parameter box(es) and the map to points in the domain."""

    def __init__(self, domain):
        self.domain = domain
        N = domain.dim
        if domain.kind == "box":
            self.D = N
            self.boxes = [(np.array(domain.lo), np.array(domain.hi))]
            self.factor = 1.0
            self.mirror = False
            return
        d = N if domain.reduce_to is None else domain.reduce_to
        self.full = d >= N
        self.D = N if self.full else d + 1
        if self.D > MAX_DIM:
            raise ValueError(f"annulus quadrature needs at most {MAX_DIM} parameter dimensions, got {self.D}")
        self.d = d
        self.mirror = self.full and N == 1
        self.factor = 1.0 if self.full else sphere_area(N - d)
        splits = [[(domain.r_in, domain.r_out)]]
        for k in range(1, self.D):
            last = k == self.D - 1
            top = 2.0 * math.pi if (last and self.full) else math.pi
            # cut at coordinate hyperplanes so kinks there sit on cell faces
            edges = np.arange(0.0, top + 1e-12, 0.5 * math.pi)
            splits.append(list(zip(edges[:-1], edges[1:])))
        self.boxes = []
        for combo in np.array(np.meshgrid(*[np.arange(len(s)) for s in splits], indexing="ij")).reshape(self.D, -1).T:
            lo = np.array([splits[a][i][0] for a, i in enumerate(combo)])
            hi = np.array([splits[a][i][1] for a, i in enumerate(combo)])
            self.boxes.append((lo, hi))

    def points(self, U):
        """Return points ``(M, N)`` and weights ``(M,)`` (``mirror`` doubles the rows)."""
        dom = self.domain
        if dom.kind == "box":
            return U, np.ones(U.shape[0])
        N = dom.dim
        if self.mirror:
            r = U[:, 0]
            X = np.concatenate([r[:, None], -r[:, None]], axis=0)
            jac = np.ones(U.shape[0])
        else:
            Z, jac = _spherical(U, self.D)
            if self.full:
                X = Z
            else:
                X = np.zeros((U.shape[0], N))
                X[:, : self.d] = Z[:, : self.d]
                rho = Z[:, self.d]
                X[:, self.d] = rho
                jac = jac * rho ** (N - self.d - 1)
        if dom.center is not None:
            X = X + np.asarray(dom.center)
        return X, jac * self.factor


def _evaluate(f, mp, cells, rules):
    """Rule values for every cell: array (n_cells, n_rules, n_comp)."""
    D = mp.D
    n_rules = len(rules)
    sizes = [r[0].shape[0] for r in rules]
    per_cell = sum(sizes)
    ref = np.concatenate([r[0] for r in rules], axis=0)
    wts = np.concatenate([r[1] for r in rules])
    out = []
    cells_per_chunk = max(1, CHUNK_POINTS // per_cell)
    for start in range(0, len(cells), cells_per_chunk):
        chunk = cells[start : start + cells_per_chunk]
        lo = np.array([c[0] for c in chunk])
        hi = np.array([c[1] for c in chunk])
        U = (lo[:, None, :] + (hi - lo)[:, None, :] * ref[None]).reshape(-1, D)
        X, jac = mp.points(U)
        vals = np.asarray(f(X))
        if vals.ndim == 1:
            vals = vals[:, None]
        if mp.mirror:
            half = U.shape[0]
            vals = vals[:half] + vals[half:]
        if not np.all(np.isfinite(vals)):
            bad = np.argwhere(~np.all(np.isfinite(vals), axis=1))[0, 0]
            loc = X[bad]
            raise QuadratureAbort(f"non-finite integrand value at {loc.tolist()}", location=loc.tolist())
        vals = vals * jac[:, None]
        vals = vals.reshape(len(chunk), per_cell, -1)
        weighted = vals * wts[None, :, None]
        sums = []
        offset = 0
        for sz in sizes:
            sums.append(weighted[:, offset : offset + sz].sum(axis=1))
            offset += sz
        vol = np.prod(hi - lo, axis=1)
        out.append(np.stack(sums, axis=1) * vol[:, None, None])
    return np.concatenate(out, axis=0), len(cells) * per_cell


def refine_until(f, domain, rel_tol=1e-9, max_depth=40, points_per_axis=8, abs_tol=1e-14, max_cells=20000):
    """Globally adaptive cubature with single-axis bisection.

    ``f`` maps ``(M, N)`` points to ``(M,)`` or ``(M, K)`` values.  The
    tolerance is measured against the largest component magnitude, so every
    component of a vector integrand is resolved to the same absolute level.
    Cells are identified by their bisection path; the final sums run over
    cells in sorted path order, which makes results reproducible.
    """
    mp = _Map(domain)
    k = int(points_per_axis)
    rules = _tensor_rules(mp.D, k)
    cells = {}
    pending = [((i,), lo, hi, 0) for i, (lo, hi) in enumerate(mp.boxes)]
    n_evals = 0
    converged = False
    while True:
        if pending:
            vals, ne = _evaluate(f, mp, [(c[1], c[2]) for c in pending], rules)
            n_evals += ne
            for c, v in zip(pending, vals):
                full = v[0]
                dev = np.abs(v[1:] - full[None, :])  # (D, K)
                cells[c[0]] = {
                    "lo": c[1],
                    "hi": c[2],
                    "depth": c[3],
                    "value": full,
                    "err": dev.sum(axis=0),
                    "axis": int(np.argmax(dev.max(axis=1))),
                }
            pending = []
        keys = sorted(cells)
        total = np.sum([cells[key]["value"] for key in keys], axis=0)
        err = np.sum([cells[key]["err"] for key in keys], axis=0)
        target = max(abs_tol, rel_tol * float(np.max(np.abs(total))))
        worst = float(np.max(err))
        if worst <= target:
            converged = True
            break
        if len(cells) >= max_cells:
            break
        # bisect the largest contributors until the untouched remainder is small
        order = sorted(keys, key=lambda key: (-float(np.max(cells[key]["err"])), key))
        remaining = worst
        for key in order:
            if remaining <= 0.25 * target:
                break
            c = cells[key]
            if c["depth"] >= max_depth:
                continue
            remaining -= float(np.max(c["err"]))
            a = c["axis"]
            mid = 0.5 * (c["lo"][a] + c["hi"][a])
            hi_left = c["hi"].copy()
            hi_left[a] = mid
            lo_right = c["lo"].copy()
            lo_right[a] = mid
            pending.append((key + (0,), c["lo"], hi_left, c["depth"] + 1))
            pending.append((key + (1,), lo_right, c["hi"], c["depth"] + 1))
            del cells[key]
        if not pending:
            break
    value = total if total.size > 1 else float(total[0])
    err_out = err if err.size > 1 else float(err[0])
    return QuadResult(
        value,
        err_out,
        converged,
        len(cells),
        n_evals,
        max(c["depth"] for c in cells.values()),
    )


def integrate(f, domain, spec=None):
    """Integrate ``f`` over ``domain`` using the rule and tolerances in ``spec``.

    Returns a :class:`QuadResult`; unpacking it yields ``(value, err_est)``.
    ``converged`` is False when the depth or cell budget ran out first.
    """
    spec = spec or QuadratureSpec()
    return refine_until(
        f,
        domain,
        rel_tol=spec.rel_tol,
        max_depth=spec.max_refine_depth,
        points_per_axis=spec.points_per_axis,
        abs_tol=spec.abs_tol,
        max_cells=spec.max_cells,
    )
