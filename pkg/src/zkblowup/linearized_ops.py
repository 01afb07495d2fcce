"""Linearized operator around Q, the virial operator, and their spectral data."""
from dataclasses import dataclass, field

import numpy as np
from scipy.sparse.linalg import LinearOperator, eigsh, minres, cg

from .spectral_core import RealField2D


class SolverError(RuntimeError):
    pass


@dataclass
class LinearizedOperator:
    gs: object
    kind: str = "L"
    shift: float = 0.0
    _cache: dict = field(default_factory=dict, repr=False)

    def __post_init__(self):
        if self.kind not in ("L", "H"):
            raise ValueError("kind must be 'L' or 'H'")
        g = self.grid
        q = self.gs.values
        d1 = g.d1(q)
        if self.kind == "L":
            self._pot = 1.0 - 3.0 * q * q
        else:
            self._pot = 0.5 - 1.5 * (q * q + 2.0 * g.Y1 * q * d1)
            self._a = q * q * d1
            self._b = g.Y1 * q
            self._coef = 3.0 / g.inner(q, q)
            # kinetic symbol of -1/2 Lap - d11
            self._kin = 0.5 * g.ksq + g.kr1 ** 2

    @property
    def grid(self):
        return self.gs.grid

    def apply(self, f):
        g = self.grid
        if self.kind == "L":
            out = -g.lap(f) + self._pot * f
        else:
            out = g.multiplier(f, self._kin) + self._pot * f
            out = out + self._coef * (g.inner(f, self._a) * self._b + g.inner(f, self._b) * self._a)
        if self.shift:
            out = out + self.shift * f
        return out

    def form(self, f, h):
        return self.grid.inner(self.apply(f), h)


def apply_operator(op, f):
    if f.grid != op.grid:
        raise ValueError("grid mismatch")
    return RealField2D(op.grid, op.apply(f.values))


def _flat(op):
    g = op.grid
    n = g.n1 * g.n2
    return n, g.shape


def _helmholtz_inverse(g, s):
    sym = 1.0 / (g.ksq + s)
    return lambda v: g.multiplier(v.reshape(g.shape), sym).ravel()


@dataclass
class SpectralReport:
    eigenvalues: np.ndarray
    mu0: float
    Y: RealField2D
    kernel_residuals: list
    mu1: float = float("nan")
    mu2: float = float("nan")


def lowest_eigenpairs(op, k=4, sigma=None, tol=1e-12):
    """Lowest k eigenpairs by shift-invert Lanczos.

    The inner solves use CG on the positive definite operator A + s,
    preconditioned by the inverse of (-Lap + s + 1).
    """
    g = op.grid
    n, shape = _flat(op)
    if sigma is None:
        # below the potential minimum so A - sigma is positive definite
        sigma = float(np.min(op._pot)) - 1.0
    s = -sigma
    prec = LinearOperator((n, n), matvec=_helmholtz_inverse(g, s + 1.0), dtype=float)
    amat = LinearOperator((n, n), matvec=lambda v: op.apply(v.reshape(shape)).ravel() + s * v, dtype=float)
    info_acc = []

    def solve(b):
        x, info = cg(amat, b, rtol=1e-13, atol=0.0, maxiter=4000, M=prec)
        info_acc.append(info)
        return x

    opinv = LinearOperator((n, n), matvec=solve, dtype=float)
    a_op = LinearOperator((n, n), matvec=lambda v: op.apply(v.reshape(shape)).ravel(), dtype=float)
    v0 = np.exp(-g.R ** 2).ravel()
    try:
        vals, vecs = eigsh(a_op, k=k, sigma=sigma, which="LM", OPinv=opinv, tol=tol, v0=v0)
    except Exception as exc:  # ArpackNoConvergence and friends
        raise SolverError(f"eigensolver failed: {exc}") from exc
    if any(i != 0 for i in info_acc):
        raise SolverError("inner CG did not converge")
    order = np.argsort(vals)
    vals = vals[order]
    vecs = vecs[:, order]
    y = vecs[:, 0].reshape(shape)
    y = y / g.norm(y)
    if y[g.n1 // 2, g.n2 // 2] < 0:
        y = -y
    res = []
    for j in range(k):
        v = vecs[:, j].reshape(shape)
        v = v / g.norm(v)
        res.append(g.norm(op.apply(v) - vals[j] * v))
    return SpectralReport(vals, float(-vals[0]), RealField2D(g, y), res)


def coercivity_constant(op, constraints, tol=1e-9, k=1):
    """min (Af, f) / ||f||_{H1}^2 over f orthogonal (in L2) to the constraints.

    With B = 1 - Lap diagonal in Fourier space the quotient becomes the lowest
    eigenvalue of B^-1/2 A B^-1/2 on the complement of B^-1/2 c, found by
    Lanczos on the projected operator.
    """
    g = op.grid
    n, shape = _flat(op)
    cons = [np.asarray(getattr(c, "values", c), dtype=float) for c in constraints]
    half = 1.0 / np.sqrt(1.0 + g.ksq)
    basis = []
    if cons:
        cm = np.stack([c.ravel() / np.abs(c).max() for c in cons], axis=1)
        sv = np.linalg.svd(cm, compute_uv=False)
        if sv[-1] < 1e-8 * sv[0]:
            raise ValueError("degenerate constraint set")
        basis = _orthonormal(g, [g.multiplier(c, half) for c in cons])
    proj = lambda v: _project(g, v, basis)

    def mv(v):
        x = proj(v.reshape(shape))
        y = g.multiplier(op.apply(g.multiplier(x, half)), half)
        return proj(y).ravel()

    cmat = LinearOperator((n, n), matvec=mv, dtype=float)
    # start inside the admissible set; the projector kernel sits at eigenvalue 0
    # so shift it far above the spectrum
    big = 10.0 * (1.0 + abs(float(np.min(op._pot))))
    if basis:
        def mv_shift(v):
            x = v.reshape(shape)
            out = mv(v).reshape(shape)
            for u in basis:
                out = out + big * g.inner(x, u) * u / g.cell_area
            return out.ravel()
        cmat = LinearOperator((n, n), matvec=mv_shift, dtype=float)
    v0 = proj(np.exp(-0.05 * g.R ** 2) * (1.0 + 0.1 * g.Y1 + 0.07 * g.Y2)).ravel()
    vals = eigsh(cmat, k=k, which="SA", tol=tol, v0=v0, ncv=max(40, 2 * k + 1),
                 maxiter=20000, return_eigenvectors=False)
    return float(np.min(vals))


def invert_L(op, g_field, tol=1e-12, maxiter=5000, check=1e-8):
    """Solve L f = g with f orthogonal to grad Q (MINRES on the projected operator)."""
    if op.kind != "L":
        raise ValueError("invert_L needs the L operator")
    gr = op.grid
    rhs = np.asarray(getattr(g_field, "values", g_field), dtype=float)
    q = op.gs.values
    k1, k2 = gr.grad(q)
    basis = _orthonormal(gr, [k1, k2])
    scale = max(gr.norm(rhs), 1e-300)
    for b in basis:
        if abs(gr.inner(rhs, b)) > check * scale:
            raise ValueError("right-hand side has a kernel component")
    if gr.norm(rhs) == 0:
        return np.zeros_like(rhs)
    proj = lambda v: _project(gr, v, basis)
    n, shape = _flat(op)
    amat = LinearOperator((n, n), matvec=lambda v: proj(op.apply(proj(v.reshape(shape)))).ravel(), dtype=float)
    prec = LinearOperator((n, n), matvec=lambda v: proj(gr.multiplier(proj(v.reshape(shape)), 1.0 / (1.0 + gr.ksq))).ravel(), dtype=float)
    b = proj(rhs).ravel()
    x, info = minres(amat, b, M=prec, rtol=tol, maxiter=maxiter)
    if info != 0:
        raise SolverError(f"MINRES stagnated (info={info})")
    return proj(x.reshape(shape))


def _orthonormal(g, vecs):
    out = []
    for v in vecs:
        w = v.copy()
        for u in out:
            w = w - g.inner(w, u) * u
        out.append(w / g.norm(w))
    return out


def _project(g, v, basis):
    for u in basis:
        v = v - g.inner(v, u) * u
    return v
