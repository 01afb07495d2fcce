"""Pointwise hot loops with a numba path and a pure numpy fallback.

Set ZKBLOWUP_NO_NUMBA=1 before import to force the numpy versions.
"""
import os

import numpy as np

USE_NUMBA = os.environ.get("ZKBLOWUP_NO_NUMBA", "0").lower() not in ("1", "true", "yes")

if USE_NUMBA:
    try:
        from numba import njit
    except ImportError:  # pragma: no cover
        USE_NUMBA = False


def _np_cube(u):
    return u * u * u


def _np_weighted_dot(f, g, w):
    return float(np.sum(f * g * w))


def _np_weighted_grad_sq(fx, fy, w):
    return float(np.sum((fx * fx + fy * fy) * w))


def _np_quartic_remainder(base, eps, w):
    e2 = eps * eps
    return float(np.sum((6.0 * base * base * e2 + 4.0 * base * e2 * eps + e2 * e2) * w))


def _np_cubic_remainder(base, eps):
    # (b+e)^3 - b^3 written without cancellation
    return eps * (3.0 * base * base + 3.0 * base * eps + eps * eps)


if USE_NUMBA:

    @njit(cache=True, fastmath=False)
    def _nb_cube(u):
        out = np.empty_like(u)
        a = u.ravel()
        o = out.ravel()
        for i in range(a.size):
            v = a[i]
            o[i] = v * v * v
        return out

    @njit(cache=True)
    def _nb_weighted_dot(f, g, w):
        a = f.ravel()
        b = g.ravel()
        c = w.ravel()
        s = 0.0
        for i in range(a.size):
            s += a[i] * b[i] * c[i]
        return s

    @njit(cache=True)
    def _nb_weighted_grad_sq(fx, fy, w):
        a = fx.ravel()
        b = fy.ravel()
        c = w.ravel()
        s = 0.0
        for i in range(a.size):
            s += (a[i] * a[i] + b[i] * b[i]) * c[i]
        return s

    @njit(cache=True)
    def _nb_quartic_remainder(base, eps, w):
        a = base.ravel()
        e = eps.ravel()
        c = w.ravel()
        s = 0.0
        for i in range(a.size):
            x = a[i]
            y = e[i]
            # (x+y)^4 - x^4 - 4x^3 y
            s += (6.0 * x * x * y * y + 4.0 * x * y * y * y + y * y * y * y) * c[i]
        return s

    @njit(cache=True)
    def _nb_cubic_remainder(base, eps):
        out = np.empty_like(base)
        a = base.ravel()
        e = eps.ravel()
        o = out.ravel()
        for i in range(a.size):
            x = a[i]
            y = e[i]
            o[i] = y * (3.0 * x * x + 3.0 * x * y + y * y)
        return out


def _contig(x):
    return np.ascontiguousarray(x, dtype=np.float64)


def cube(u):
    if USE_NUMBA:
        return _nb_cube(_contig(u))
    return _np_cube(u)


def weighted_dot(f, g, w):
    if USE_NUMBA:
        return float(_nb_weighted_dot(_contig(f), _contig(g), _contig(w)))
    return _np_weighted_dot(f, g, w)


def weighted_grad_sq(fx, fy, w):
    if USE_NUMBA:
        return float(_nb_weighted_grad_sq(_contig(fx), _contig(fy), _contig(w)))
    return _np_weighted_grad_sq(fx, fy, w)


def quartic_remainder(base, eps, w):
    """Sum of ((base+eps)^4 - base^4 - 4 base^3 eps) * w."""
    if USE_NUMBA:
        return float(_nb_quartic_remainder(_contig(base), _contig(eps), _contig(w)))
    return _np_quartic_remainder(base, eps, w)


def cubic_remainder(base, eps):
    """(base+eps)^3 - base^3, pointwise."""
    if USE_NUMBA:
        return _nb_cubic_remainder(_contig(base), _contig(eps))
    return _np_cubic_remainder(base, eps)


numpy_impl = {
    "cube": _np_cube,
    "weighted_dot": _np_weighted_dot,
    "weighted_grad_sq": _np_weighted_grad_sq,
    "quartic_remainder": _np_quartic_remainder,
    "cubic_remainder": _np_cubic_remainder,
}
