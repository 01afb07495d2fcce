"""Fields that are localized except for a polynomial left tail.

A ZField stores f = core + sum_l T(y1) y1^l b_l(y2), where the core decays in
every direction on the periodic box and T is a smooth switch equal to 1 far
to the left and 0 to the right. Derivatives and right-integrals of the tail
are done exactly, so non-decaying profiles never touch the periodic seam.
"""
from functools import lru_cache

import numpy as np
from scipy.special import erfc

TAIL_CENTER = -8.0
TAIL_WIDTH = 2.0


def tail_switch(y1, deriv=0):
    z = (np.asarray(y1, dtype=float) - TAIL_CENTER) / TAIL_WIDTH
    if deriv == 0:
        return 0.5 * erfc(z)
    g = -np.exp(-z * z) / (TAIL_WIDTH * np.sqrt(np.pi))
    if deriv == 1:
        return g
    if deriv == 2:
        return g * (-2.0 * z / TAIL_WIDTH)
    if deriv == 3:
        return g * (4.0 * z * z - 2.0) / TAIL_WIDTH ** 2
    raise ValueError("deriv must be 0..3")


class _Basis:
    """Per-grid 1D helpers for the tail algebra."""

    def __init__(self, grid):
        self.grid = grid
        y = grid.x1
        self.y = y
        self.T = tail_switch(y)
        self.dT = tail_switch(y, 1)
        self.k1 = grid.k1
        self.k2 = grid.k2
        self._rho = {}
        self._a = {}

    def antideriv_1d(self, f):
        """Periodic antiderivative along y1 of a zero-mean function, pinned to 0 at the left edge."""
        fh = np.fft.fft(f, axis=0)
        k = self.k1.reshape((-1,) + (1,) * (np.ndim(f) - 1))
        with np.errstate(divide="ignore", invalid="ignore"):
            out = np.where(k == 0, 0.0, fh / (1j * k))
        if self.grid.n1 % 2 == 0:
            out[self.grid.n1 // 2] = 0.0
        res = np.real(np.fft.ifft(out, axis=0))
        return res - res[0]

    def moment_shift(self, ell):
        # a_l with I(T y^l) = -T y^(l+1)/(l+1) + a_l T + rho_l
        if ell not in self._a:
            h = self.grid.h1
            self._a[ell] = -float(np.sum(self.dT * self.y ** (ell + 1))) * h / (ell + 1)
        return self._a[ell]

    def rho(self, ell):
        if ell not in self._rho:
            a = self.moment_shift(ell)
            integrand = self.dT * self.y ** (ell + 1) / (ell + 1) - a * self.dT
            self._rho[ell] = self.antideriv_1d(integrand)
        return self._rho[ell]

    def d2_1d(self, b, order=1):
        k = self.k2.copy()
        if order % 2:
            k[self.grid.n2 // 2] = 0.0
        return np.real(np.fft.ifft((1j * k) ** order * np.fft.fft(b, axis=-1), axis=-1))

    def helmholtz_1d(self, b):
        """(1 - d^2/dy2^2)^-1 b."""
        return np.real(np.fft.ifft(np.fft.fft(b, axis=-1) / (1.0 + self.k2 ** 2), axis=-1))


@lru_cache(maxsize=16)
def basis(grid):
    return _Basis(grid)


class ZField:
    __slots__ = ("grid", "core", "tails")
    __array_ufunc__ = None

    def __init__(self, grid, core=None, tails=None):
        self.grid = grid
        self.core = np.zeros(grid.shape) if core is None else np.asarray(core, dtype=float)
        if tails is None:
            tails = np.zeros((0, grid.n2))
        self.tails = np.atleast_2d(np.asarray(tails, dtype=float))
        if self.tails.size == 0:
            self.tails = np.zeros((0, grid.n2))

    @classmethod
    def local(cls, grid, arr):
        return cls(grid, np.array(arr, dtype=float))

    @property
    def degree(self):
        return self.tails.shape[0] - 1

    def copy(self):
        return ZField(self.grid, self.core.copy(), self.tails.copy())

    # tail evaluation
    def tail_values(self, y1=None):
        b = basis(self.grid)
        if y1 is None:
            y1, T = b.y, b.T
        else:
            T = tail_switch(y1)
        out = np.zeros((np.size(y1), self.grid.n2))
        p = np.ones_like(np.asarray(y1, dtype=float))
        for ell in range(self.tails.shape[0]):
            out += (T * p)[:, None] * self.tails[ell][None, :]
            p = p * y1
        return out

    def full(self):
        if self.tails.shape[0] == 0:
            return self.core.copy()
        return self.core + self.tail_values()

    def evaluate(self, ext_grid):
        """Values on a grid with the same spacing that extends the box along y1."""
        g = self.grid
        if ext_grid.n2 != g.n2 or not np.isclose(ext_grid.h1, g.h1) or not np.isclose(ext_grid.half_width2, g.half_width2):
            raise ValueError("extended grid must share spacing and the y2 axis")
        pad = int(round((ext_grid.half_width1 - g.half_width1) / g.h1))
        if pad < 0 or ext_grid.n1 != g.n1 + 2 * pad:
            raise ValueError("extended grid is not a symmetric extension")
        out = np.zeros(ext_grid.shape)
        out[pad:pad + g.n1] = self.core
        if self.tails.shape[0]:
            out += self.tail_values(ext_grid.x1)
        return out

    # arithmetic
    def _tails_sum(self, other, sign=1.0):
        m = max(self.tails.shape[0], other.tails.shape[0])
        t = np.zeros((m, self.grid.n2))
        t[:self.tails.shape[0]] += self.tails
        t[:other.tails.shape[0]] += sign * other.tails
        return t

    def __add__(self, other):
        if isinstance(other, ZField):
            return ZField(self.grid, self.core + other.core, self._tails_sum(other))
        return ZField(self.grid, self.core + other, self.tails)

    __radd__ = __add__

    def __sub__(self, other):
        if isinstance(other, ZField):
            return ZField(self.grid, self.core - other.core, self._tails_sum(other, -1.0))
        return ZField(self.grid, self.core - other, self.tails)

    def __rsub__(self, other):
        return (-self) + other

    def __neg__(self):
        return ZField(self.grid, -self.core, -self.tails)

    def __mul__(self, other):
        if isinstance(other, ZField):
            return self._mul_z(other)
        if np.ndim(other) == 0:
            return ZField(self.grid, self.core * other, self.tails * other)
        # localized 2D multiplier
        return ZField(self.grid, self.full() * other)

    __rmul__ = __mul__

    def __truediv__(self, c):
        return self * (1.0 / c)

    def _mul_z(self, other):
        b = basis(self.grid)
        ta = self.tail_values() if self.tails.shape[0] else 0.0
        tb = other.tail_values() if other.tails.shape[0] else 0.0
        core = self.core * other.core + self.core * tb + ta * other.core
        m = self.tails.shape[0] + other.tails.shape[0] - 1
        if self.tails.shape[0] == 0 or other.tails.shape[0] == 0:
            return ZField(self.grid, core)
        tails = np.zeros((m, self.grid.n2))
        mix = b.T * b.T - b.T
        for i in range(self.tails.shape[0]):
            for j in range(other.tails.shape[0]):
                prod = self.tails[i] * other.tails[j]
                tails[i + j] += prod
                core += (mix * b.y ** (i + j))[:, None] * prod[None, :]
        return ZField(self.grid, core, tails)

    def mul_y1(self):
        tails = np.zeros((self.tails.shape[0] + 1, self.grid.n2)) if self.tails.shape[0] else None
        if tails is not None:
            tails[1:] = self.tails
        return ZField(self.grid, self.core * self.grid.Y1, tails)

    def mul_y2(self, v):
        return ZField(self.grid, self.core * v[None, :], self.tails * v[None, :])

    # derivatives
    def d1(self):
        g = self.grid
        b = basis(g)
        core = g.d1(self.core)
        n = self.tails.shape[0]
        if n == 0:
            return ZField(g, core)
        p = np.ones_like(b.y)
        for ell in range(n):
            core = core + (b.dT * p)[:, None] * self.tails[ell][None, :]
            p = p * b.y
        tails = np.array([ell * self.tails[ell] for ell in range(1, n)]) if n > 1 else None
        return ZField(g, core, tails)

    def d2(self):
        b = basis(self.grid)
        tails = b.d2_1d(self.tails) if self.tails.shape[0] else None
        return ZField(self.grid, self.grid.d2(self.core), tails)

    def lap(self):
        return self.d1().d1() + self.d2().d2()

    def scaling(self):
        return self + self.d1().mul_y1() + self.d2().mul_y2(self.grid.x2)

    def apply_L(self, q):
        return -self.lap() + self - ZField(self.grid, 3.0 * q * q * self.full())

    def integrate_right(self):
        """int_{y1}^{infinity} f(tau, y2) dtau."""
        g = self.grid
        b = basis(g)
        hsum = self.core.sum(axis=0) * g.h1
        core = b.antideriv_1d(-self.core - b.dT[:, None] * hsum[None, :])
        n = self.tails.shape[0]
        tails = np.zeros((n + 1, g.n2))
        tails[0] += hsum
        for ell in range(n):
            bl = self.tails[ell]
            tails[ell + 1] += -bl / (ell + 1)
            tails[0] += b.moment_shift(ell) * bl
            core = core + b.rho(ell)[:, None] * bl[None, :]
        return ZField(g, core, tails)

    def inner_local(self, a):
        return self.grid.inner(self.full(), a)

    def reflect_error(self):
        """Max deviation from evenness in y2."""
        f = self.core
        r = np.roll(np.flip(f, axis=1), 1, axis=1)
        err = np.max(np.abs(f - r))
        if self.tails.shape[0]:
            t = np.roll(np.flip(self.tails, axis=1), 1, axis=1)
            err = max(err, np.max(np.abs(self.tails - t)))
        return float(err)

    def symmetrize_y2(self):
        f = self.core
        core = 0.5 * (f + np.roll(np.flip(f, axis=1), 1, axis=1))
        t = self.tails
        if t.shape[0]:
            t = 0.5 * (t + np.roll(np.flip(t, axis=1), 1, axis=1))
        return ZField(self.grid, core, t)

    def trimmed(self, tol=0.0):
        t = self.tails
        while t.shape[0] and np.max(np.abs(t[-1])) <= tol:
            t = t[:-1]
        return ZField(self.grid, self.core, t)
