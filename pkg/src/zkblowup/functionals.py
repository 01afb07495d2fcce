"""Weight family, weighted norm and the energy/virial Lyapunov quantities.

All weights are functions of y1 only. Templates are C-infinity and are built
from the exp(-1/t) step in `cutoffs`; antiderivatives are tabulated once with
Gauss-Legendre panels, so sampled values do not depend on the caller's grid.
"""
from dataclasses import dataclass, field
from functools import lru_cache

import numpy as np
from scipy.optimize import brentq

from . import _kernels
from .cutoffs import chi, sigma

# largest left shift of the psi_B' junction that still lands inside the zeta plateau
SHIFT_CAP = 0.09
LOCAL_SCALE = 10.0

_GL_X, _GL_W = np.polynomial.legendre.leggauss(12)


def step(x, a, b, deriv=0):
    """C-infinity step, 0 left of a and 1 right of b."""
    w = b - a
    return chi(-2.0 + (np.asarray(x, dtype=float) - a) / w, deriv) / w ** deriv


def _gl_integral(f, lo, hi):
    """Vectorized Gauss-Legendre integral of f over [lo, hi] (arrays broadcast)."""
    lo = np.asarray(lo, dtype=float)
    hi = np.asarray(hi, dtype=float)
    mid, half = 0.5 * (lo + hi), 0.5 * (hi - lo)
    nodes = mid[..., None] + half[..., None] * _GL_X
    return half * np.sum(f(nodes) * _GL_W, axis=-1)


class _Antiderivative:
    """F(x) = F(lo) + int_lo^x f on [lo, hi], tabulated at knots and refined by a local panel."""

    def __init__(self, f, lo, hi, value_lo=0.0, knots=4001):
        self.f = f
        self.x = np.linspace(lo, hi, knots)
        pieces = _gl_integral(f, self.x[:-1], self.x[1:])
        self.F = value_lo + np.concatenate([[0.0], np.cumsum(pieces)])

    def __call__(self, x):
        x = np.asarray(x, dtype=float)
        i = np.clip(np.searchsorted(self.x, x) - 1, 0, self.x.size - 2)
        return self.F[i] + _gl_integral(self.f, self.x[i], x)


# templates

class ZetaTemplate:
    """Even bump: 1 on |u| < 1/10, exp(-2|u|) for |u| > 1/6, total integral 1.

    On the bridge the exponential is blended in with a smooth step and a small
    bump is subtracted; its amplitude is fixed by the unit-mass condition.
    """

    lo, hi = 0.1, 1.0 / 6.0

    def __init__(self):
        mid = 0.5 * (self.lo + self.hi)
        self.mid = mid
        base_mass = _gl_integral(lambda u: self._base(u, 0), np.linspace(self.lo, self.hi, 201)[:-1],
                                 np.linspace(self.lo, self.hi, 201)[1:]).sum()
        bump_mass = _gl_integral(lambda u: self._bump(u, 0), np.linspace(self.lo, self.hi, 201)[:-1],
                                 np.linspace(self.lo, self.hi, 201)[1:]).sum()
        half_mass = self.lo + base_mass + 0.5 * np.exp(-2.0 * self.hi)
        self.alpha = (half_mass - 0.5) / bump_mass
        self._Z = _Antiderivative(lambda u: self(u), -self.hi, self.hi, 0.5 * np.exp(-2.0 * self.hi))

    def _base(self, u, d):
        # (1 - s) + s e, written without cancellation in the exponential tail
        s = [step(u, self.lo, self.hi, k) for k in range(d + 1)]
        e = [(-2.0) ** k * np.exp(-2.0 * u) for k in range(d + 1)]
        out = sum(_binom(d, k) * s[k] * e[d - k] for k in range(d + 1))
        return out + (1.0 - s[0] if d == 0 else -s[d])

    def _bump(self, u, d):
        up = [step(u, self.lo, self.mid, k) for k in range(d + 1)]
        dn = [(1.0 if k == 0 else 0.0) - step(u, self.mid, self.hi, k) for k in range(d + 1)]
        return sum(_binom(d, k) * up[k] * dn[d - k] for k in range(d + 1))

    def __call__(self, u, deriv=0):
        u = np.asarray(u, dtype=float)
        a = np.abs(u)
        val = self._base(a, deriv) - self.alpha * self._bump(a, deriv)
        return val * np.sign(u) ** deriv if deriv % 2 else val

    def antiderivative(self, u):
        """int_{-inf}^u zeta."""
        u = np.asarray(u, dtype=float)
        out = np.empty_like(u)
        left, right = u <= -self.hi, u >= self.hi
        mid = ~(left | right)
        out[left] = 0.5 * np.exp(2.0 * u[left])
        out[right] = 1.0 - 0.5 * np.exp(-2.0 * u[right])
        out[mid] = self._Z(u[mid])
        return out


class VarthetaTemplate:
    """1/2 on (-inf, a], y^7 on [1, inf), with vartheta' = 7 y^6 S(y) >= 0 between.

    The step S rises on [a, 1]; a is chosen so the two pinned pieces join.
    """

    def __init__(self):
        def gap(a):
            return _gl_integral(lambda t: 7.0 * t ** 6 * step(t, a, 1.0), np.linspace(a, 1.0, 101)[:-1],
                                np.linspace(a, 1.0, 101)[1:]).sum() - 0.5

        self.a = brentq(gap, 0.5, 0.999, xtol=1e-15)
        self._V = _Antiderivative(lambda t: 7.0 * t ** 6 * step(t, self.a, 1.0), self.a, 1.0, 0.5)

    def __call__(self, y, deriv=0):
        y = np.asarray(y, dtype=float)
        if deriv == 0:
            out = np.full_like(y, 0.5)
            right = y >= 1.0
            out[right] = y[right] ** 7
            mid = (y > self.a) & ~right
            out[mid] = self._V(y[mid])
            return out
        s = [step(y, self.a, 1.0, k) for k in range(deriv)]
        p = [7.0 * y ** 6, 42.0 * y ** 5, 210.0 * y ** 4]
        return sum(_binom(deriv - 1, k) * p[deriv - 1 - k] * s[k] for k in range(deriv))


class Psi0Template:
    """exp(6y) for y < -1, 1/2 for y > -1/2, nondecreasing."""

    rate, top = 6.0, 0.5

    def __call__(self, y, deriv=0):
        y = np.asarray(y, dtype=float)
        s = [step(y, -1.0, -0.5, k) for k in range(deriv + 1)]
        e = [self.rate ** k * np.exp(self.rate * np.minimum(y, 0.0)) for k in range(deriv + 1)]
        h = [self.top] + [0.0] * deriv
        # (1 - s) e + s h
        return sum(_binom(deriv, k) * (((1.0 if k == 0 else 0.0) - s[k]) * e[deriv - k] + s[k] * h[deriv - k])
                   for k in range(deriv + 1))


class Psi1Template(Psi0Template):
    """exp(10y) for y < -1, 1 + y for y > -1/2, increasing."""

    rate = 10.0

    def __call__(self, y, deriv=0):
        y = np.asarray(y, dtype=float)
        s = [step(y, -1.0, -0.5, k) for k in range(deriv + 1)]
        e = [self.rate ** k * np.exp(self.rate * np.minimum(y, 0.0)) for k in range(deriv + 1)]
        h = [1.0 + y, np.ones_like(y)] + [np.zeros_like(y)] * deriv
        return sum(_binom(deriv, k) * (((1.0 if k == 0 else 0.0) - s[k]) * e[deriv - k] + s[k] * h[deriv - k])
                   for k in range(deriv + 1))


def _binom(n, k):
    return [[1], [1, 1], [1, 2, 1], [1, 3, 3, 1]][n][k]


@lru_cache(maxsize=1)
def templates():
    z = ZetaTemplate()
    p0 = Psi0Template()
    Psi0 = _Antiderivative(lambda t: p0(t), -1.0, -0.5, np.exp(-6.0) / 6.0)
    return {"zeta": z, "vartheta": VarthetaTemplate(), "psi0": p0, "psi1": Psi1Template(), "Psi0": Psi0}


def _psi0_antiderivative(u):
    """int_0^u psi0."""
    u = np.asarray(u, dtype=float)
    P = templates()["Psi0"]
    at_half = P(np.array([-0.5]))[0]
    out = np.empty_like(u)
    hi, lo = u >= -0.5, u <= -1.0
    mid = ~(hi | lo)
    out[hi] = 0.5 * u[hi]
    out[lo] = np.exp(6.0 * u[lo]) / 6.0 - at_half - 0.25
    out[mid] = P(u[mid]) - at_half - 0.25
    return out


# weight family

@dataclass(frozen=True)
class WeightFamily:
    """psi_B, phi_B = sqrt(2 psi_B) vartheta(y/plateau), psi_{0,B}, psi_{1,B}, rho_B as callables of y1.

    plateau defaults to B^10. A smaller value rescales vartheta's growth into a
    finite box and is flagged by `plateau_rescaled`.
    """

    B: float
    delta: float
    plateau: float
    shift: float
    norm: float
    _cache: dict = field(default_factory=dict, repr=False, compare=False)

    @property
    def plateau_rescaled(self):
        return self.plateau < self.B ** 10

    @property
    def literal(self):
        """True when the two pieces of psi_B' meet on the zeta plateau without clamping."""
        return self.shift == 0.5 * self.B ** (-1.0 / 3.0)

    @property
    def zeta(self):
        return templates()["zeta"]

    @property
    def vartheta(self):
        return templates()["vartheta"]

    def _pieces(self, y):
        B = self.B
        y = np.asarray(y, dtype=float)
        left = y < -B / 3.0
        arg = np.where(left, y / B + 1.0 / 3.0 - self.shift, y / B ** (2.0 / 3.0) + B ** (1.0 / 3.0) / 3.0)
        scale = np.where(left, 1.0 / B, B ** (-2.0 / 3.0))
        return left, arg, scale

    def psi(self, y, deriv=0):
        B = self.B
        left, arg, scale = self._pieces(y)
        z = self.zeta
        if deriv == 0:
            Z = z.antiderivative(arg)
            right = z.antiderivative(np.array([-self.shift]))[0] + B ** (-1.0 / 3.0) * (Z - 0.5)
            return self.norm * np.where(left, Z, right)
        return self.norm * z(arg, deriv - 1) * scale ** (deriv - 1) / B

    def vartheta_B(self, y, deriv=0):
        return self.vartheta(np.asarray(y, dtype=float) / self.plateau, deriv) / self.plateau ** deriv

    def phi(self, y, deriv=0):
        p = [self.psi(y, k) for k in range(deriv + 1)]
        r = np.sqrt(2.0 * p[0])
        g = [r]
        if deriv >= 1:
            g.append(p[1] / r)
        if deriv >= 2:
            g.append(p[2] / r - p[1] ** 2 / r ** 3)
        if deriv >= 3:
            g.append(p[3] / r - 3.0 * p[1] * p[2] / r ** 3 + 3.0 * p[1] ** 3 / r ** 5)
        v = [self.vartheta_B(y, k) for k in range(deriv + 1)]
        return sum(_binom(deriv, k) * g[k] * v[deriv - k] for k in range(deriv + 1))

    def psi0(self, y, deriv=0):
        return templates()["psi0"](np.asarray(y, dtype=float) / self.B, deriv) / self.B ** deriv

    def psi1(self, y, deriv=0):
        return templates()["psi1"](np.asarray(y, dtype=float) / self.B, deriv) / self.B ** deriv

    def rho(self, y, deriv=0):
        B = self.B
        y = np.asarray(y, dtype=float)
        # R = (2/B) int_0^y psi_{0,B} and its derivatives
        R = [2.0 * _psi0_antiderivative(y / B)] + [2.0 / B * self.psi0(y, k - 1) for k in range(1, deriv + 1)]
        scale = np.where(y <= 0.0, 2.0 * B, 10.0 * self.plateau)
        c = [sigma(y / scale, k) / scale ** k for k in range(deriv + 1)]
        return sum(_binom(deriv, k) * c[k] * R[deriv - k] for k in range(deriv + 1))

    def sampled(self, grid):
        """(psi_B, phi_B) on the y1 axis of a grid, cached per grid."""
        key = ("pp", grid.key())
        if key not in self._cache:
            self._cache[key] = (self.psi(grid.x1), self.phi(grid.x1))
        return self._cache[key]


def build_weights(B=32.0, plateau=None, delta=None):
    if not B >= 16:
        raise ValueError("B must be at least 16")
    shift = min(0.5 * B ** (-1.0 / 3.0), SHIFT_CAP)
    z = templates()["zeta"]
    # limit of the unnormalized psi_B; exactly 1/2 when the shift is not clamped
    limit = z.antiderivative(np.array([-shift]))[0] + 0.5 * B ** (-1.0 / 3.0)
    plateau = float(B) ** 10 if plateau is None else float(plateau)
    if plateau <= 0:
        raise ValueError("plateau must be positive")
    return WeightFamily(float(B), float(B) ** -3 if delta is None else float(delta), plateau, shift, 0.5 / limit)


# inequality audit

def audit_grid(B, span=30.0, points_per_width=40):
    """Uniform y1 samples on [-span B, span B] resolving the narrowest transition layer."""
    width = min(B ** (2.0 / 3.0), B) * (ZetaTemplate.hi - ZetaTemplate.lo)
    h = width / points_per_width
    n = int(np.ceil(2 * span * B / h)) + 1
    return np.linspace(-span * B, span * B, n)


def _ratio(lhs, rhs, tiny=1e-300):
    lhs = np.abs(np.asarray(lhs, dtype=float))
    rhs = np.asarray(rhs, dtype=float)
    ok = rhs > tiny
    r = float(np.max(lhs[ok] / rhs[ok])) if ok.any() else 0.0
    scale = max(float(np.max(lhs)), 1e-300)
    if np.any(lhs[~ok] > 1e-13 * scale):
        r = float("inf")
    return r


def weight_inequality_audit(wf, y=None):
    """Sampled sup of LHS/RHS for every pointwise weight inequality.

    Entries with an explicit bound carry it; the others only need a finite
    constant. Each entry has "constant", "bound" (None for implicit
    constants) and "holds".
    """
    B = wf.B
    y = audit_grid(B) if y is None else np.asarray(y, dtype=float)
    psi = [wf.psi(y, k) for k in range(4)]
    phi = [wf.phi(y, k) for k in range(4)]
    p0 = [wf.psi0(y, k) for k in range(4)]
    rho = [wf.rho(y, k) for k in range(4)]
    p1 = wf.psi1(y)
    rep = {}

    def implicit(name, lhs, rhs):
        c = _ratio(lhs, rhs)
        rep[name] = {"constant": c, "bound": None, "holds": bool(np.isfinite(c))}

    def explicit(name, value, bound, holds):
        rep[name] = {"constant": float(value), "bound": bound, "holds": bool(holds)}

    # monotone profile with limit 1/2
    explicit("psi_increasing", np.min(psi[1]), 0.0, np.all(psi[1] > 0) and np.all(np.diff(psi[0]) >= 0))
    edge = abs(float(psi[0][-1]) - 0.5)
    explicit("psi_limit_half", edge, 1e-8, edge <= 1e-8)
    far = y < -B
    r1 = np.sqrt(psi[0][far]) * np.exp(-y[far] / B)
    r2 = np.sqrt(2.0 * phi[0][far] ** 2) * np.exp(-y[far] / B)
    lo, hi = float(min(r1.min(), r2.min())), float(max(r1.max(), r2.max()))
    rep["left_exponential_sandwich"] = {"constant": lo, "upper": hi, "bound": [1.0, np.sqrt(2.0)],
                                        "holds": bool(lo >= 1.0 and hi <= np.sqrt(2.0))}
    mid = np.abs(y) < B / 4.0
    decay = np.exp(-B ** (1.0 / 3.0) / 6.0)
    implicit("psi_flat_core", (psi[1] + np.abs(psi[0] - 0.5))[mid], np.full(mid.sum(), decay))
    implicit("phi_flat_core", (np.abs(phi[1]) + np.abs(phi[0] - 0.5))[mid], np.full(mid.sum(), decay))
    gap = float(np.max(psi[0] - phi[0]))
    explicit("psi_below_phi", gap, 0.0, gap <= 0.0)

    # derivative hierarchies
    implicit("psi_derivatives", B ** (2 / 3) * np.abs(psi[2]) + B ** (4 / 3) * np.abs(psi[3]), psi[1])
    implicit("sqrt_B_dpsi_vs_psi_B_dphi", np.sqrt(B * psi[1]), psi[0] + B * phi[1])
    implicit("psi_B_dphi_vs_phi", psi[0] + B * phi[1], phi[0])
    implicit("y_dpsi_vs_sqrt_psi", np.abs(y) * psi[1], np.sqrt(psi[0]))
    implicit("sqrt_psi_vs_psi_B_dphi", np.sqrt(psi[0]), psi[0] + B * phi[1])
    implicit("phi_second_vs_psi", phi[2], B ** (-2 / 3) * phi[1] + B ** -20.0 * psi[0])
    implicit("phi_third_vs_psi", phi[3], B ** (-4 / 3) * phi[1] + B ** -30.0 * psi[0])
    ind_far = (y >= B ** 10).astype(float)
    implicit("phi_vs_psi_dphi", phi[0], psi[0] + B * phi[1] + np.abs(y) * phi[1] * ind_far)

    # virial weights
    implicit("phi_second_vs_psi0", phi[2], B ** (-2 / 3) * phi[1] + B ** -20.0 * p0[0])
    implicit("phi_third_vs_psi0", phi[3], B ** (-4 / 3) * phi[1] + B ** -30.0 * p0[0])
    implicit("rho_derivatives", B * np.abs(rho[1]) + B ** 2 * np.abs(rho[2]) + B ** 3 * np.abs(rho[3]), p0[0])
    implicit("psi0_derivatives", B * np.abs(p0[1]) + B ** 2 * np.abs(p0[2]) + B ** 3 * np.abs(p0[3]), p0[0])
    implicit("rho_vs_psi0_psi1", np.maximum(rho[0], 0.0), np.minimum(B ** 9 * p0[0], p1 * np.sqrt(p0[0])))
    outer = ((y <= -B / 2.0) | (y >= B ** 10)).astype(float)
    implicit("drho_vs_psi0", rho[1] - 2.0 / B * p0[0], np.minimum(B ** 9 * phi[1], outer))
    implicit("rho_vs_linear", rho[0] - 2.0 * y / B * p0[0], outer * np.abs(y))

    rep["_meta"] = {"B": B, "samples": int(y.size), "y_range": [float(y[0]), float(y[-1])],
                    "plateau": wf.plateau, "plateau_rescaled": wf.plateau_rescaled,
                    "vartheta_growth_sampled": bool(y[-1] > 0.5 * wf.plateau), "literal_junction": wf.literal,
                    "normalization": wf.norm}
    return rep


def failed_checks(report):
    return [k for k, v in report.items() if not k.startswith("_") and not v["holds"]]


# functionals on 2D fields

def _values(f):
    return f.values if hasattr(f, "values") else np.asarray(f, dtype=float)


def _full(w, grid):
    return np.ascontiguousarray(np.broadcast_to(w[:, None], grid.shape))


def local_l2(eps, grid, scale=LOCAL_SCALE):
    """(int eps^2 exp(-|y|/scale))^(1/2)."""
    e = _values(eps)
    return float(np.sqrt(_kernels.weighted_dot(e, e, np.exp(-grid.R / scale)) * grid.cell_area))


def norm_N_B(eps, wf, grid):
    """(int |grad eps|^2 psi_B + eps^2 phi_B)^(1/2)."""
    e = _values(eps)
    psi, phi = wf.sampled(grid)
    gx, gy = grid.grad(e)
    val = _kernels.weighted_grad_sq(gx, gy, _full(psi, grid)) + _kernels.weighted_dot(e, e, _full(phi, grid))
    return float(np.sqrt(max(val, 0.0) * grid.cell_area))


def energy_F(eps, W, wf, grid):
    """int |grad eps|^2 psi_B + eps^2 phi_B - 1/2 psi_B ((W+eps)^4 - W^4 - 4 W^3 eps)."""
    e = _values(eps)
    psi, phi = wf.sampled(grid)
    P = _full(psi, grid)
    gx, gy = grid.grad(e)
    quad = _kernels.weighted_grad_sq(gx, gy, P) + _kernels.weighted_dot(e, e, _full(phi, grid))
    rem = _kernels.quartic_remainder(np.ascontiguousarray(_values(W)), e, P)
    return float((quad - 0.5 * rem) * grid.cell_area)


def apply_L(eps, q, grid):
    e = _values(eps)
    return grid.irfft((grid.ksq + 1.0) * grid.rfft(e)) - 3.0 * q * q * e


def eta_transform(eps, delta, q, grid):
    """(1 - delta Lap)^-1 L eps, with L applied pseudo-spectrally."""
    if not delta > 0:
        raise ValueError("delta must be positive")
    return grid.irfft(grid.rfft(apply_L(eps, q, grid)) / (1.0 + delta * grid.ksq))


def virial_P(eta, wf, grid):
    """int eta^2 rho_B(y1)."""
    e = _values(eta)
    return float(_kernels.weighted_dot(e, e, _full(wf.rho(grid.x1), grid)) * grid.cell_area)


def lyapunov_W(F_energy, P_virial, B):
    return F_energy + P_virial / B ** 20


def dissipation(eps, wf, grid):
    """int (|grad eps|^2 + eps^2)(phi_B' + psi_{0,B})."""
    e = _values(eps)
    w = _full(wf.phi(grid.x1, 1) + wf.psi0(grid.x1), grid)
    gx, gy = grid.grad(e)
    return float((_kernels.weighted_grad_sq(gx, gy, w) + _kernels.weighted_dot(e, e, w)) * grid.cell_area)


@dataclass
class DiagnosticsReport:
    N_B: float
    F_energy: float
    P_virial: float
    W_lyapunov: float
    eta: np.ndarray
    local_l2: float
    dissipation: float = float("nan")

    def as_dict(self):
        return {"N_B": self.N_B, "F_energy": self.F_energy, "P_virial": self.P_virial,
                "W_lyapunov": self.W_lyapunov, "local_l2": self.local_l2, "dissipation": self.dissipation}


def diagnostics(eps, W, wf, q, grid):
    e = _values(eps)
    eta = eta_transform(e, wf.delta, q, grid)
    F = energy_F(e, W, wf, grid)
    P = virial_P(eta, wf, grid)
    out = DiagnosticsReport(norm_N_B(e, wf, grid), F, P, lyapunov_W(F, P, wf.B), eta, local_l2(e, grid),
                            dissipation(e, wf, grid))
    vals = [out.N_B, out.F_energy, out.P_virial, out.W_lyapunov, out.local_l2]
    if not np.all(np.isfinite(vals)):
        raise FloatingPointError("non-finite diagnostic")
    return out


def experiment_hook(wf, q):
    """Callable (eps, grid, W) -> dict of diagnostics, for the blow-up experiment."""

    def hook(eps, grid, W):
        return diagnostics(eps, W, wf, q, grid).as_dict()

    return hook


def monotonicity_audit(s, W_series, dissipation_series, B, mu=1.0):
    """dW/ds + mu/(2 B^27) * dissipation against C / |s|^10; returns the series and the smallest C."""
    s = np.asarray(s, dtype=float)
    Ws = np.asarray(W_series, dtype=float)
    lhs = np.gradient(Ws, s, edge_order=2) + mu / (2.0 * B ** 27) * np.asarray(dissipation_series, dtype=float)
    weight = np.abs(s) ** 10
    return {"lhs": lhs, "C_observed": float(np.max(np.maximum(lhs, 0.0) * weight)),
            "max_lhs": float(np.max(lhs))}


# admissible perturbations

def admissible_projection(eps, tests, grid):
    """Remove the span of `tests` so that (eps, t) = 0 for each test function."""
    e = _values(eps)
    G = np.array([[grid.inner(a, b) for b in tests] for a in tests])
    rhs = np.array([grid.inner(e, t) for t in tests])
    coef = np.linalg.solve(G, rhs)
    return e - sum(c * t for c, t in zip(coef, tests))


def random_admissible(grid, q, rng, size=1e-3, bumps=6, radius=6.0):
    """Random y2-even localized field orthogonal to Q, Q^3 and d1 Q, with L2 norm `size`."""
    e = np.zeros(grid.shape)
    for _ in range(bumps):
        c1, c2 = rng.uniform(-radius, radius, 2)
        w = rng.uniform(0.5, 2.5)
        e += rng.normal() * np.exp(-((grid.Y1 - c1) ** 2 + (grid.Y2 - c2) ** 2) / (2 * w * w))
    e = 0.5 * (e + np.roll(np.flip(e, axis=1), 1, axis=1))
    e = admissible_projection(e, [q, q ** 3, grid.d1(q)], grid)
    return size * e / grid.norm(e)


def sandwich_constants(grid, q, W, wf, rng, samples=100, size=1e-3):
    """Observed c, C with c N_B^2 <= W_lyapunov <= C N_B^2, plus the local-norm constant."""
    ratios, loc = [], []
    for _ in range(samples):
        e = random_admissible(grid, q, rng, size=size)
        d = diagnostics(e, W, wf, q, grid)
        ratios.append(d.W_lyapunov / d.N_B ** 2)
        loc.append(d.local_l2 / d.N_B)
    ratios = np.array(ratios)
    return {"c": float(ratios.min()), "C": float(ratios.max()), "local_constant": float(np.max(loc)),
            "samples": samples}
