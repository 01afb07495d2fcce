"""Periodic 2D pseudo-spectral discretization.

Axis 0 is y1 (the propagation direction), axis 1 is y2. The grid covers
[-L, L) on each axis with the origin at index n//2.
"""
import struct
from dataclasses import dataclass, field

import numpy as np
import scipy.fft as sfft

DUMP_MAGIC = b"ZKF1"
_HEADER = struct.Struct("<4sIII2d")  # 32 bytes

_WORKERS = None


def set_threads(n):
    global _WORKERS
    _WORKERS = None if n is None or n <= 1 else int(n)


@dataclass(frozen=True, eq=False)
class Grid2D:
    n1: int
    n2: int
    half_width1: float
    half_width2: float
    _cache: dict = field(default_factory=dict, repr=False, compare=False)

    def __post_init__(self):
        for n in (self.n1, self.n2):
            if int(n) != n or n < 16 or n % 2:
                raise ValueError(f"grid sizes must be even integers >= 16, got {n}")
        if not (self.half_width1 > 0 and self.half_width2 > 0):
            raise ValueError("half-widths must be positive")

    @classmethod
    def square(cls, n, half_width=40.0):
        return cls(n, n, float(half_width), float(half_width))

    @property
    def shape(self):
        return (self.n1, self.n2)

    @property
    def h1(self):
        return 2.0 * self.half_width1 / self.n1

    @property
    def h2(self):
        return 2.0 * self.half_width2 / self.n2

    @property
    def cell_area(self):
        return self.h1 * self.h2

    def key(self):
        return (self.n1, self.n2, self.half_width1, self.half_width2)

    def __eq__(self, other):
        return isinstance(other, Grid2D) and self.key() == other.key()

    def __hash__(self):
        return hash(self.key())

    def _get(self, name, make):
        if name not in self._cache:
            self._cache[name] = make()
        return self._cache[name]

    # coordinates
    @property
    def x1(self):
        return self._get("x1", lambda: -self.half_width1 + self.h1 * np.arange(self.n1))

    @property
    def x2(self):
        return self._get("x2", lambda: -self.half_width2 + self.h2 * np.arange(self.n2))

    @property
    def Y1(self):
        return self._get("Y1", lambda: np.broadcast_to(self.x1[:, None], self.shape))

    @property
    def Y2(self):
        return self._get("Y2", lambda: np.broadcast_to(self.x2[None, :], self.shape))

    @property
    def R(self):
        return self._get("R", lambda: np.hypot(self.Y1, self.Y2))

    # wavenumbers (full transform)
    @property
    def k1(self):
        return self._get("k1", lambda: np.pi * np.fft.fftfreq(self.n1, 1.0 / self.n1) / self.half_width1)

    @property
    def k2(self):
        return self._get("k2", lambda: np.pi * np.fft.fftfreq(self.n2, 1.0 / self.n2) / self.half_width2)

    # wavenumbers on the half spectrum used internally
    @property
    def kr1(self):
        return self._get("kr1", lambda: self.k1[:, None])

    @property
    def kr2(self):
        return self._get("kr2", lambda: (np.pi * np.arange(self.n2 // 2 + 1) / self.half_width2)[None, :])

    @property
    def kr1_odd(self):
        def make():
            k = self.k1.copy()
            k[self.n1 // 2] = 0.0
            return k[:, None]
        return self._get("kr1_odd", make)

    @property
    def kr2_odd(self):
        def make():
            k = self.kr2.copy()
            k[0, -1] = 0.0
            return k
        return self._get("kr2_odd", make)

    @property
    def ksq(self):
        return self._get("ksq", lambda: self.kr1 ** 2 + self.kr2 ** 2)

    def rfft(self, f):
        return sfft.rfft2(f, workers=_WORKERS)

    def irfft(self, fh):
        return sfft.irfft2(fh, s=self.shape, workers=_WORKERS)

    # differential operators on raw arrays
    def d1(self, f):
        return self.irfft(1j * self.kr1_odd * self.rfft(f))

    def d2(self, f):
        return self.irfft(1j * self.kr2_odd * self.rfft(f))

    def grad(self, f):
        fh = self.rfft(f)
        return self.irfft(1j * self.kr1_odd * fh), self.irfft(1j * self.kr2_odd * fh)

    def d11(self, f):
        return self.irfft(-(self.kr1 ** 2) * self.rfft(f))

    def lap(self, f):
        return self.irfft(-self.ksq * self.rfft(f))

    def multiplier(self, f, symbol):
        return self.irfft(symbol * self.rfft(f))

    def inner(self, f, g):
        return float(np.sum(f * g)) * self.cell_area

    def integral(self, f):
        return float(np.sum(f)) * self.cell_area

    def norm(self, f):
        return np.sqrt(self.inner(f, f))

    def h1_norm_sq(self, f):
        gx, gy = self.grad(f)
        return self.inner(f, f) + self.inner(gx, gx) + self.inner(gy, gy)

    def scaling(self, f):
        gx, gy = self.grad(f)
        return f + self.Y1 * gx + self.Y2 * gy

    def rescale(self, f, lam, shift=(0.0, 0.0)):
        """lam^-1 f((y - shift)/lam) via trigonometric interpolation of f."""
        p1 = (self.x1 - shift[0]) / lam
        p2 = (self.x2 - shift[1]) / lam
        return sample_separable(self, f, p1, p2) / lam


def sample_separable(grid, f, p1, p2):
    """Evaluate the trigonometric interpolant of f on the product set p1 x p2.

    Points outside the box wrap periodically.
    """
    fh = np.fft.fft2(f) / (grid.n1 * grid.n2)
    k1 = grid.k1.copy()
    k2 = grid.k2.copy()
    # split Nyquist evenly so the interpolant stays real
    e1 = np.exp(1j * np.outer(np.asarray(p1) - grid.x1[0], k1))
    e2 = np.exp(1j * np.outer(np.asarray(p2) - grid.x2[0], k2))
    e1[:, grid.n1 // 2] = np.cos(grid.k1[grid.n1 // 2] * (np.asarray(p1) - grid.x1[0]))
    e2[:, grid.n2 // 2] = np.cos(grid.k2[grid.n2 // 2] * (np.asarray(p2) - grid.x2[0]))
    return np.real(e1 @ fh @ e2.T)


@dataclass(frozen=True)
class RealField2D:
    grid: Grid2D
    values: np.ndarray

    def __post_init__(self):
        v = np.asarray(self.values, dtype=np.float64)
        if v.shape != self.grid.shape:
            raise ValueError(f"shape {v.shape} does not match grid {self.grid.shape}")
        if not np.all(np.isfinite(v)):
            raise ValueError("field contains non-finite entries")
        object.__setattr__(self, "values", v)


@dataclass(frozen=True)
class SpectralField2D:
    grid: Grid2D
    coefficients: np.ndarray

    def to_real(self):
        return RealField2D(self.grid, np.real(sfft.ifft2(self.coefficients, workers=_WORKERS)))


def forward_transform(f):
    if not isinstance(f, RealField2D):
        raise TypeError("expected RealField2D")
    return SpectralField2D(f.grid, sfft.fft2(f.values, workers=_WORKERS))


def inverse_transform(fh):
    return fh.to_real()


def continuum_transform(f):
    """Grid approximation of the unitary continuum transform, sampled at grid.k1 x grid.k2.

    (2 pi)^-1 * integral f(y) exp(-i xi.y) dy, with the phase of the grid origin removed.
    """
    g = f.grid
    c = sfft.fft2(f.values, workers=_WORKERS) * g.cell_area / (2.0 * np.pi)
    phase = np.exp(-1j * (g.k1[:, None] * g.x1[0] + g.k2[None, :] * g.x2[0]))
    return c * phase


def fractional_derivative(f, axis, r):
    if axis not in (1, 2):
        raise ValueError("axis must be 1 or 2")
    if not r > -1:
        raise ValueError("order r must exceed -1")
    g = f.grid
    k = np.abs(g.kr1) if axis == 1 else np.abs(g.kr2)
    if r == 0:
        return RealField2D(g, f.values.copy())
    with np.errstate(divide="ignore"):
        sym = np.where(k == 0, 0.0, k ** r) if r < 0 else k ** r
    sym = np.broadcast_to(sym, (g.n1, g.n2 // 2 + 1))
    return RealField2D(g, g.multiplier(f.values, sym))


def flow_symbol(grid, t):
    return np.exp(1j * t * grid.kr1_odd * grid.ksq)


def linear_flow(f, t):
    g = f.grid
    if t == 0:
        return RealField2D(g, f.values.copy())
    return RealField2D(g, g.multiplier(f.values, flow_symbol(g, t)))


def scaling_operator(f):
    return RealField2D(f.grid, f.grid.scaling(f.values))


# binary dumps
def write_dump(path, grid, values):
    v = np.ascontiguousarray(values, dtype="<f8")
    if v.shape != grid.shape:
        raise ValueError("shape mismatch")
    with open(path, "wb") as fh:
        fh.write(_HEADER.pack(DUMP_MAGIC, grid.n1, grid.n2, 0, grid.half_width1, grid.half_width2))
        fh.write(v.tobytes(order="C"))


def read_dump(path):
    with open(path, "rb") as fh:
        head = fh.read(_HEADER.size)
        magic, n1, n2, _, l1, l2 = _HEADER.unpack(head)
        if magic != DUMP_MAGIC:
            raise ValueError(f"{path}: not a field dump")
        data = np.frombuffer(fh.read(), dtype="<f8")
    if data.size != n1 * n2:
        raise ValueError(f"{path}: truncated dump")
    grid = Grid2D(n1, n2, l1, l2)
    return grid, data.reshape(n1, n2).astype(np.float64)
