"""Smooth cutoffs: chi (0 left of -2, 1 right of -1) and the bump sigma."""
import numpy as np


def _logistic_parts(u):
    # s = 1/(1+e^u) and p = s(1-s), stable for large |u|
    with np.errstate(over="ignore"):
        s = 0.5 * (1.0 - np.tanh(0.5 * u))
        p = 0.25 / np.cosh(0.5 * u) ** 2
    return s, p


def chi(y, deriv=0):
    """C-infinity nondecreasing step with chi = 0 on (-inf,-2] and 1 on [-1,inf).

    Built from exp(-1/t) bridges; deriv in 0..3 returns exact derivatives.
    """
    if deriv not in (0, 1, 2, 3):
        raise ValueError("deriv must be 0..3")
    y = np.asarray(y, dtype=float)
    t = y + 2.0
    inside = (t > 0.0) & (t < 1.0)
    out = np.zeros_like(y)
    if deriv == 0:
        out[t >= 1.0] = 1.0
    ti = t[inside]
    if ti.size == 0:
        return out
    u = 1.0 / ti - 1.0 / (1.0 - ti)
    s, p = _logistic_parts(u)
    if deriv == 0:
        out[inside] = s
        return out
    u1 = -1.0 / ti ** 2 - 1.0 / (1.0 - ti) ** 2
    s_u = -p
    if deriv == 1:
        out[inside] = s_u * u1
        return out
    u2 = 2.0 / ti ** 3 - 2.0 / (1.0 - ti) ** 3
    s_uu = (1.0 - 2.0 * s) * p
    if deriv == 2:
        out[inside] = s_uu * u1 ** 2 + s_u * u2
        return out
    u3 = -6.0 / ti ** 4 - 6.0 / (1.0 - ti) ** 4
    s_uuu = 2.0 * p * p - (1.0 - 2.0 * s) ** 2 * p
    out[inside] = s_uuu * u1 ** 3 + 3.0 * s_uu * u1 * u2 + s_u * u3
    return out


def sigma(y, deriv=0):
    """Bump equal to 1 on [-1, 1] and 0 outside (-2, 2)."""
    y = np.asarray(y, dtype=float)
    if deriv == 0:
        return chi(y) * chi(-y)
    if deriv == 1:
        return chi(y, 1) * chi(-y) - chi(y) * chi(-y, 1)
    if deriv == 2:
        return chi(y, 2) * chi(-y) - 2 * chi(y, 1) * chi(-y, 1) + chi(y) * chi(-y, 2)
    if deriv == 3:
        return (chi(y, 3) * chi(-y) - 3 * chi(y, 2) * chi(-y, 1)
                + 3 * chi(y, 1) * chi(-y, 2) - chi(y) * chi(-y, 3))
    raise ValueError("deriv must be 0..3")


class ScaledCutoff:
    """y1 -> chi(a * y1) and its derivatives."""

    def __init__(self, a):
        self.a = float(a)

    def __call__(self, y1, deriv=0):
        return self.a ** deriv * chi(self.a * np.asarray(y1, dtype=float), deriv)

    @property
    def left_edge(self):
        return -2.0 / self.a
