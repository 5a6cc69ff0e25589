"""The C_p functional and the sharp constants c1, c2, c3.

``C_p(xi, eta) = |xi|^p - |xi - eta|^p - p |xi - eta|^{p-2} Re((xi - eta) . conj(eta))``
for complex vectors (last array axis).  The direct formula loses all relative
accuracy when ``|eta| << |xi|``; :func:`cp_eval` instead expands around
``a = xi - eta`` so that ``C_2 = |eta|^2`` holds to rounding.
"""

from __future__ import annotations

import warnings
from dataclasses import asdict, dataclass, field

import numpy as np
from scipy.optimize import minimize

CONSTANTS = ("c1", "c2", "c3")

# |w| below which the binomial series is used
_SERIES_CUTOFF = 0.1
_SERIES_TERMS = 24


class ParameterRangeError(ValueError):
    """Raised when p lies outside the range a constant is defined for."""


class OutOfRangeWarning(UserWarning):
    pass


def binomial_tail(w, a):
    """``(1 + w)^a - 1 - a w`` evaluated without cancellation for small ``w``."""
    w = np.asarray(w, dtype=float)
    small = np.abs(w) < _SERIES_CUTOFF
    ws = np.where(small, w, 0.0)
    # Horner on sum_{k>=2} binom(a, k) w^k
    coeffs = [1.0, a]
    for k in range(2, _SERIES_TERMS + 1):
        coeffs.append(coeffs[-1] * (a - k + 1) / k)
    acc = np.zeros_like(ws)
    for c in reversed(coeffs[2:]):
        acc = acc * ws + c
    series = acc * ws * ws
    with np.errstate(invalid="ignore", over="ignore"):
        direct = np.maximum(1.0 + w, 0.0) ** a - 1.0 - a * w
    return np.where(small, series, direct)


def _cp_parts(p, nxi, na, re_ae, neta):
    """C_p from ``|xi|``, ``|a|``, ``Re(a . conj(eta))`` and ``|eta|`` with ``a = xi - eta``."""
    nxi, na, re_ae, neta = np.broadcast_arrays(
        *(np.asarray(v, dtype=float) for v in (nxi, na, re_ae, neta))
    )
    with np.errstate(divide="ignore", invalid="ignore", over="ignore"):
        direct = nxi**p - na**p - p * np.where(na > 0, na ** (p - 2.0) * re_ae, 0.0)
        na2 = na * na
        w = (2.0 * re_ae + neta * neta) / na2
        stable = na**p * binomial_tail(w, 0.5 * p) + 0.5 * p * na ** (p - 2.0) * neta * neta
    use_series = (na > 0) & np.isfinite(w) & (np.abs(w) < _SERIES_CUTOFF)
    out = np.where(use_series, stable, direct)
    return np.where(na > 0, out, nxi**p)


def cp_eval(p, xi, eta):
    """C_p on complex vectors; the last axis is the vector index.

    Scalars are treated as vectors of length one.  When ``xi == eta`` the
    third term is taken as zero, its limit for every ``p > 1``.
    """
    if not p > 1:
        raise ValueError(f"C_p needs p > 1, got {p}")
    xi = np.asarray(xi)
    eta = np.asarray(eta)
    if xi.ndim == 0:
        xi = xi[None]
    if eta.ndim == 0:
        eta = eta[None]
    if xi.shape[-1] != eta.shape[-1]:
        raise ValueError(f"dimension mismatch: {xi.shape[-1]} vs {eta.shape[-1]}")
    a = xi - eta
    nxi = np.linalg.norm(xi, axis=-1)
    na = np.linalg.norm(a, axis=-1)
    neta = np.linalg.norm(eta, axis=-1)
    re_ae = np.real(np.sum(a * np.conj(eta), axis=-1))
    out = _cp_parts(p, nxi, na, re_ae, neta)
    return out[()] if out.ndim == 0 else out


def cp_scale(p, xi, eta):
    """Magnitude of the individual terms of C_p, used for rounding tolerances."""
    xi = np.atleast_1d(np.asarray(xi))
    eta = np.atleast_1d(np.asarray(eta))
    na = np.linalg.norm(xi - eta, axis=-1)
    return np.linalg.norm(xi, axis=-1) ** p + na**p + p * na ** (p - 1) * np.linalg.norm(eta, axis=-1)


def _admissible(which, p):
    if which == "c1":
        return p >= 2
    if which in ("c2", "c3"):
        return 1 < p <= 2
    raise ValueError(f"unknown constant {which!r}")


def check_range(which, p):
    if not _admissible(which, p):
        rng = "p >= 2" if which == "c1" else "1 < p <= 2"
        raise ParameterRangeError(f"{which} is defined for {rng}; got p = {p}")


def ratio_objective(which, p, s, t):
    """The two-parameter ratio whose inf (c1, c2) or sup (c3) is the constant.

    The numerator ``(t^2+s^2+2s+1)^{p/2} - 1 - ps`` is evaluated as a
    binomial tail, which keeps the ratio accurate next to the origin.
    """
    if which not in CONSTANTS:
        raise ValueError(f"unknown constant {which!r}")
    if not _admissible(which, p):
        warnings.warn(f"p = {p} is outside the range of {which}", OutOfRangeWarning, stacklevel=2)
    s = np.asarray(s, dtype=float)
    t = np.asarray(t, dtype=float)
    q = s * s + t * t
    if np.any(q == 0):
        raise ValueError("ratio is undefined at (s, t) = (0, 0)")
    num = binomial_tail(2.0 * s + q, 0.5 * p) + 0.5 * p * q
    if which == "c1":
        out = num / q ** (0.5 * p)
    else:
        out = num / ((np.sqrt(q + 2.0 * s + 1.0) + 1.0) ** (p - 2.0) * q)
    return out[()] if out.ndim == 0 else out


@dataclass
class ConstantEstimate:
    which: str
    p: float
    value: float
    bracket: tuple
    argmin: tuple
    evaluations: int
    boundary_limit: float
    limits: dict = field(default_factory=dict)
    attained: bool = True
    warning: str = ""

    @property
    def lo(self):
        return self.bracket[0]

    @property
    def hi(self):
        return self.bracket[1]

    def to_dict(self):
        d = asdict(self)
        d["bracket"] = list(self.bracket)
        d["argmin"] = list(self.argmin)
        return d


def _ray_limits(which, p, radius, n_rays=181):
    theta = np.linspace(0.0, np.pi, n_rays)  # the ratio is even in t
    vals = ratio_objective(which, p, radius * np.cos(theta), radius * np.sin(theta))
    return float(np.min(vals)), float(np.max(vals))


def compute_constant(
    which,
    p,
    grid_resolution=400,
    refine_tol=1e-7,
    exclusion_radius=1e-6,
    n_starts=4,
    max_evals=4000,
):
    """Optimise the ratio over the plane via ``s = tan a``, ``t = tan b``.

    A coarse grid over ``(-pi/2, pi/2)^2`` seeds Nelder-Mead restarts from the
    best discrete local optima.  Ray limits at the excluded origin and at
    infinity are folded in, so a non-attained optimum is reported with
    ``attained = False``.  The bracket is heuristic: it spans the spread of the
    restarts plus rounding, and assumes the grid resolves the optimal basin.
    """
    check_range(which, p)
    sign = -1.0 if which == "c3" else 1.0
    n = int(grid_resolution)
    a = -0.5 * np.pi + (np.arange(n) + 0.5) * np.pi / n
    A, B = np.meshgrid(a, a, indexing="ij")
    S, T = np.tan(A), np.tan(B)
    mask = S * S + T * T > exclusion_radius**2
    F = np.full(S.shape, np.inf)
    F[mask] = sign * ratio_objective(which, p, S[mask], T[mask])
    evals = int(mask.sum())

    # discrete local minima of the signed objective, best first
    padded = np.pad(F, 1, constant_values=np.inf)
    neigh = np.min(
        [padded[1 + di : n + 1 + di, 1 + dj : n + 1 + dj] for di in (-1, 0, 1) for dj in (-1, 0, 1) if di or dj],
        axis=0,
    )
    cand = np.argwhere((F <= neigh) & np.isfinite(F))
    cand = cand[np.argsort(F[cand[:, 0], cand[:, 1]], kind="stable")][:n_starts]
    if cand.size == 0:
        cand = np.array([np.unravel_index(np.argmin(F), F.shape)])

    lim = 0.5 * np.pi - 1e-12

    def obj(v):
        aa, bb = np.clip(v, -lim, lim)
        s, t = np.tan(aa), np.tan(bb)
        if s * s + t * t <= exclusion_radius**2:
            return np.inf
        return float(sign * ratio_objective(which, p, s, t))

    results = []
    step = np.pi / n
    for i, j in cand:
        x0 = np.array([a[i], a[j]])
        simplex = np.array([x0, x0 + [step, 0.0], x0 + [0.0, step]])
        res = minimize(
            obj,
            x0,
            method="Nelder-Mead",
            options={
                "xatol": refine_tol,
                "fatol": 1e-15,
                "maxfev": max_evals,
                "initial_simplex": simplex,
            },
        )
        evals += int(res.nfev)
        results.append((float(res.fun), res.x, bool(res.success)))
    results.sort(key=lambda r: r[0])
    best_f, best_x, ok = results[0]
    grid_best = float(np.min(F))

    inf_lo, inf_hi = _ray_limits(which, p, 1e8)
    org_lo, org_hi = _ray_limits(which, p, 1e-7)
    evals += 2 * 181
    limits = {"infinity": [inf_lo, inf_hi], "origin": [org_lo, org_hi]}
    if sign > 0:
        boundary = min(inf_lo, org_lo)
    else:
        boundary = max(inf_hi, org_hi)

    interior = sign * best_f
    # restarts that land in the same basin should agree to rounding
    agree = [sign * r[0] for r in results if abs(r[0] - best_f) <= 1e-6 * max(1.0, abs(best_f))]
    spread = max(agree) - min(agree) if agree else 0.0
    slack = max(spread, 1e-10 * max(1.0, abs(interior)), abs(refine_tol) ** 2)
    warning = ""
    if not ok:
        slack = max(slack, abs(grid_best - best_f))
        warning = "refinement did not converge within the evaluation budget"

    if sign * (boundary - interior) < 0:
        value, attained = boundary, False
    else:
        value, attained = interior, True
    if sign > 0:
        bracket = (value - slack, value)
    else:
        bracket = (value, value + slack)
    s_opt, t_opt = np.tan(np.clip(best_x, -lim, lim))
    return ConstantEstimate(
        which,
        float(p),
        float(value),
        (float(bracket[0]), float(bracket[1])),
        (float(s_opt), abs(float(t_opt))),
        evals,
        float(boundary),
        limits,
        attained,
        warning,
    )


@dataclass
class LemmaCheck:
    p: float
    dim: int
    n_samples: int
    violations: dict
    tightest: dict

    @property
    def total_violations(self):
        return sum(self.violations.values())

    def to_dict(self):
        return asdict(self)


def sample_pairs(rng, n, dim):
    """Random complex pairs with log-uniform relative size of ``eta``."""
    xi = rng.standard_normal((n, dim)) + 1j * rng.standard_normal((n, dim))
    eta = rng.standard_normal((n, dim)) + 1j * rng.standard_normal((n, dim))
    scale = 10.0 ** rng.uniform(-3, 3, size=(n, 1))
    # occasionally align eta with xi, where the ratios are extremal
    align = rng.uniform(size=n) < 0.25
    eta[align] = xi[align] * rng.uniform(-3, 3, size=(int(align.sum()), 1))
    return xi, eta * scale


def lemma_bound_check(p, n_samples, dim, constants, seed=0, rtol=1e-12):
    """Sample random ``(xi, eta)`` and count violations of the lemma bounds.

    ``constants`` maps ``"c1"``/``"c2"``/``"c3"`` to :class:`ConstantEstimate`;
    the lower bracket end is used for lower bounds and the upper end for the
    upper bound, so bracket slack never causes a spurious violation.
    """
    rng = np.random.default_rng(seed)
    xi, eta = sample_pairs(rng, int(n_samples), int(dim))
    cp = cp_eval(p, xi, eta)
    tol = rtol * cp_scale(p, xi, eta)
    neta = np.linalg.norm(eta, axis=-1)
    violations, tightest = {}, {}
    keep = neta > 0
    if "c1" in constants:
        ref = neta**p
        violations["c1"] = int(np.sum(cp[keep] < constants["c1"].lo * ref[keep] - tol[keep]))
        tightest["c1"] = float(np.min(cp[keep] / ref[keep]))
    if "c2" in constants or "c3" in constants:
        denom = (np.linalg.norm(xi, axis=-1) + np.linalg.norm(xi - eta, axis=-1)) ** (2.0 - p)
        ref = neta**2 / denom
        ratio = cp[keep] / ref[keep]
        if "c2" in constants:
            violations["c2"] = int(np.sum(cp[keep] < constants["c2"].lo * ref[keep] - tol[keep]))
            tightest["c2"] = float(np.min(ratio))
        if "c3" in constants:
            violations["c3"] = int(np.sum(cp[keep] > constants["c3"].hi * ref[keep] + tol[keep]))
            tightest["c3"] = float(np.max(ratio))
    return LemmaCheck(float(p), int(dim), int(n_samples), violations, tightest)
