"""Central finite-difference stencils acting on batches of points.

Every routine takes ``f`` mapping an ``(M, N)`` array of points to an array
whose leading axis is ``M`` (scalar ``(M,)`` or vector ``(M, l)`` values) and a
step ``h`` that is either a scalar or one step per point.
"""

from __future__ import annotations

import numpy as np


def _steps(h, m):
    h = np.asarray(h, dtype=float)
    if h.ndim == 0:
        h = np.full(m, float(h))
    if np.any(h <= 0):
        raise ValueError("finite-difference step must be positive")
    return h


def _bcast(h, values):
    # reshape per-point steps so they broadcast against trailing value axes
    return h.reshape(h.shape + (1,) * (values.ndim - 1))


def directional(f, X, direction, h, order=1):
    """Central difference of ``f`` along ``direction``; O(h^2) for order 1 and 2."""
    X = np.atleast_2d(np.asarray(X, dtype=float))
    d = np.asarray(direction, dtype=float)
    h = _steps(h, X.shape[0])
    shift = h[:, None] * d
    fp = np.asarray(f(X + shift))
    fm = np.asarray(f(X - shift))
    hb = _bcast(h, fp)
    if order == 1:
        return (fp - fm) / (2.0 * hb)
    if order == 2:
        f0 = np.asarray(f(X))
        return (fp - 2.0 * f0 + fm) / hb**2
    raise ValueError(f"unsupported derivative order {order}")


def gradient(f, X, h):
    """Stack of first derivatives; the derivative index is the last axis."""
    X = np.atleast_2d(np.asarray(X, dtype=float))
    n = X.shape[1]
    eye = np.eye(n)
    cols = [directional(f, X, eye[j], h, order=1) for j in range(n)]
    return np.stack(cols, axis=-1)


def hessian(f, X, h):
    """Second derivatives with the two derivative indices as the last two axes."""
    X = np.atleast_2d(np.asarray(X, dtype=float))
    m, n = X.shape
    h = _steps(h, m)
    f0 = np.asarray(f(X))
    hb = _bcast(h, f0)
    out = np.empty(f0.shape + (n, n), dtype=np.result_type(f0.dtype, float))
    eye = np.eye(n)
    for j in range(n):
        ej = h[:, None] * eye[j]
        out[..., j, j] = (np.asarray(f(X + ej)) - 2.0 * f0 + np.asarray(f(X - ej))) / hb**2
        for k in range(j + 1, n):
            ek = h[:, None] * eye[k]
            mixed = (
                np.asarray(f(X + ej + ek))
                - np.asarray(f(X + ej - ek))
                - np.asarray(f(X - ej + ek))
                + np.asarray(f(X - ej - ek))
            ) / (4.0 * hb**2)
            out[..., j, k] = mixed
            out[..., k, j] = mixed
    return out


def observed_order(errors, steps):
    """Least-squares slope of log(error) against log(step)."""
    e = np.log(np.abs(np.asarray(errors, dtype=float)))
    s = np.log(np.asarray(steps, dtype=float))
    slope, _ = np.polyfit(s, e, 1)
    return float(slope)
