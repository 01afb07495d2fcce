"""Blow-up profile ingredients: transverse functions, theta, P, higher profiles, W and W_b."""
from dataclasses import dataclass, field
from math import comb

import numpy as np

from .cutoffs import ScaledCutoff
from .ground_state import apply_L
from .linearized_ops import LinearizedOperator, invert_L
from .spectral_core import Grid2D
from .zfields import ZField, basis

B_STAR = 0.05


class SolvabilityError(ValueError):
    pass


# transverse profiles

@dataclass
class TransverseProfiles:
    grid: Grid2D
    F: np.ndarray
    h2: np.ndarray
    h1: np.ndarray
    G_of_y1: np.ndarray
    theta: float
    h1_recipe: str = "a*exp(-y^2) + c*y^2*exp(-y^2), unit mass, orthogonal to G"


def compute_F(gs):
    """F(y2) = integral of Lambda Q over y1."""
    g = gs.grid
    return g.scaling(gs.values).sum(axis=0) * g.h1


def _k_1d(n, half_width):
    return np.pi * np.fft.fftfreq(n, 1.0 / n) / half_width


def compute_h2(F, half_width):
    """Even solution of -h'' + h = F'' on the periodic y2 grid."""
    k = _k_1d(F.size, half_width)
    return np.real(np.fft.ifft(-(k ** 2) / (1.0 + k ** 2) * np.fft.fft(F)))


def compute_theta(F, half_width=None):
    """2 int |F^|^2/(1+xi^2) / int |F^|^2 on the discrete frequency set."""
    F = np.asarray(F, dtype=float)
    if not np.any(F):
        raise ValueError("F must be nonzero")
    k = _k_1d(F.size, 1.0 if half_width is None else half_width)
    power = np.abs(np.fft.fft(F)) ** 2
    return float(2.0 * np.sum(power / (1.0 + k ** 2)) / np.sum(power))


def make_h1(grid, G):
    y = grid.x1
    e0 = np.exp(-y ** 2)
    e2 = y ** 2 * e0
    h = grid.h1
    mat = np.array([[e0.sum() * h, e2.sum() * h], [(e0 * G).sum() * h, (e2 * G).sum() * h]])
    a, c = np.linalg.solve(mat, [1.0, 0.0])
    return a * e0 + c * e2


def transverse_profiles(gs):
    g = gs.grid
    F = compute_F(gs)
    h2 = compute_h2(F, g.half_width2)
    G = (gs.values * h2[None, :]).sum(axis=1) * g.h2
    h1 = make_h1(g, G)
    return TransverseProfiles(g, F, h2, h1, G, compute_theta(F, g.half_width2))


# the profile P

@dataclass
class ProfileP:
    P: ZField
    diagnostics: dict = field(default_factory=dict)

    @property
    def grid(self):
        return self.P.grid


def _lop(gs, op):
    return op if op is not None else LinearizedOperator(gs)


def dL_residual(gs, f, g):
    """Norm of d1 L f - g: (core L2 norm, max tail coefficient)."""
    r = f.apply_L(gs.values).d1() - g
    tmax = float(np.max(np.abs(r.tails))) if r.tails.shape[0] else 0.0
    return float(gs.grid.norm(r.core)), tmax


def solve_P(gs, tp=None, op=None, tol=1e-13):
    """P with d1 L P = Lambda Q, built from the right-integral plus h1 (x) h2 construction."""
    g = gs.grid
    q = gs.values
    op = _lop(gs, op)
    if tp is None:
        tp = transverse_profiles(gs)
    lq = ZField.local(g, g.scaling(q))
    I = lq.integrate_right()
    JG = ZField.local(g, tp.h1[:, None] * tp.h2[None, :]).integrate_right()
    f0 = -I - JG
    R = -I - f0.apply_L(q)
    tail_defect = float(np.max(np.abs(R.tails))) if R.tails.shape[0] else 0.0
    d1q, d2q = g.grad(q)
    solv = g.inner(R.core, d1q) / (g.norm(R.core) * g.norm(d1q))
    ftil = invert_L(op, _project_kernel(g, R.core, d1q, d2q), tol=tol)
    f = f0 + ftil
    c = f.inner_local(d1q) / g.inner(d1q, d1q)
    f = (f - ZField.local(g, c * d1q)).symmetrize_y2()
    P = ProfileP(f)
    P.diagnostics = profile_P_diagnostics(gs, tp, f)
    P.diagnostics.update({"tail_defect": tail_defect, "solvability_defect": float(solv)})
    return P


def _project_kernel(g, r, d1q, d2q):
    for v in (d1q, d2q):
        r = r - g.inner(r, v) / g.inner(v, v) * v
    return r


def profile_P_diagnostics(gs, tp, f):
    g = gs.grid
    q = gs.values
    full = f.full()
    d1q, d2q = g.grad(q)
    fd1 = f.d1().full()
    fd2 = f.d2().full()
    res_core, res_tail = dL_residual(gs, f, ZField.local(g, g.scaling(q)))
    i_left = int(np.argmin(np.abs(g.x1 + 0.8 * g.half_width1)))
    left_err = float(np.max(np.abs(full[i_left] + tp.F + tp.h2)))
    right = g.Y1 >= 0
    decay = float(np.max(np.abs(full[right]) * np.exp(g.R[right] / 3.0)))
    return {
        "P_dot_Q": g.inner(full, q),
        "quarter_F_sq": 0.25 * float(np.sum(tp.F ** 2)) * g.h2,
        "d1P_dot_Q": g.inner(fd1, q),
        "d2P_dot_Q": g.inner(fd2, q),
        "P_dot_d1Q": g.inner(full, d1q),
        "residual_core": res_core,
        "residual_tail": res_tail,
        "left_limit_error": left_err,
        "right_decay_constant": decay,
        "parity_error": f.reflect_error(),
    }


def theta_consistency(P, gs):
    """(Lambda P + 3 d1(Q P^2), Q) / (P, Q)."""
    num, den = _theta_parts(P, gs)
    return num / den


def _theta_parts(P, gs):
    g = gs.grid
    q = gs.values
    f = P.P if isinstance(P, ProfileP) else P
    lp = f.scaling()
    nl = (f * f * q).d1()
    return (lp + 3.0 * nl).inner_local(q), f.inner_local(q)


def compute_sigma_star(P, gs):
    g = gs.grid
    q = gs.values
    f = P.P if isinstance(P, ProfileP) else P
    lp = f.scaling().inner_local(q)
    nl = (f * f * q).d1().inner_local(q)
    return (lp + 6.0 * nl) / (lp + 3.0 * nl)


def fourier_energy_identity(P, gs, tp):
    """Returns ((P, Lap d1 P - d1 P), 1/2 int |F^|^2/(1+xi^2))."""
    g = gs.grid
    f = P.P if isinstance(P, ProfileP) else P
    d1 = f.d1()
    rhs = d1.lap() - d1
    # integrate by parts into localized quantities: (P, Lap d1P - d1P) = -1/2 lim ... ;
    # evaluate with P tail included; the integrand is localized in y1
    lhs = g.inner(f.full(), rhs.full())
    k = g.k2
    Fh = np.fft.fft(tp.F) * g.h2 / np.sqrt(2 * np.pi)
    dk = k[1] - k[0]
    ref = 0.5 * float(np.sum(np.abs(Fh) ** 2 / (1.0 + k ** 2))) * dk
    return lhs, ref


# inversion of d1 L on polynomially growing classes

def invert_dL_Zk(gs, g_field, k=-1, op=None, tol=1e-13, orth_tol=1e-7, return_info=False):
    """f with d1 L f = g, (f, grad Q) = 0, f even in y2, growth one degree above g.

    The left tail is solved degree by degree with (1 - d2^2)^-1, the rest by one
    projected inversion of L.
    """
    grid = gs.grid
    q = gs.values
    op = _lop(gs, op)
    if not isinstance(g_field, ZField):
        g_field = ZField.local(grid, np.asarray(getattr(g_field, "values", g_field)))
    g_field = g_field.trimmed()
    if g_field.degree > k:
        raise SolvabilityError(f"input grows like y1^{g_field.degree}, beyond class {k}")
    gq = g_field.inner_local(q)
    scale = max(1.0, grid.norm(g_field.core))
    if abs(gq) > orth_tol * scale:
        raise SolvabilityError(f"(g, Q) = {gq:.3e} violates solvability")
    if not np.any(g_field.core) and not np.any(g_field.tails):
        out = ZField(grid)
        return (out, {}) if return_info else out
    b = basis(grid)
    r = -g_field.integrate_right()
    n = r.tails.shape[0]
    phi = np.zeros_like(r.tails)
    for ell in range(n - 1, -1, -1):
        rhs = r.tails[ell].copy()
        if ell + 2 < n:
            rhs += (ell + 2) * (ell + 1) * phi[ell + 2]
        phi[ell] = b.helmholtz_1d(rhs)
    ft = ZField(grid, None, phi)
    rem = r - ft.apply_L(q)
    tail_defect = float(np.max(np.abs(rem.tails))) if rem.tails.shape[0] else 0.0
    d1q, d2q = grid.grad(q)
    solv = grid.inner(rem.core, d1q) / max(grid.norm(rem.core) * grid.norm(d1q), 1e-300)
    fc = invert_L(op, _project_kernel(grid, rem.core, d1q, d2q), tol=tol)
    f = ft + fc
    c = f.inner_local(d1q) / grid.inner(d1q, d1q)
    f = (f - ZField.local(grid, c * d1q)).symmetrize_y2()
    if return_info:
        res = dL_residual(gs, f, g_field)
        return f, {"tail_defect": tail_defect, "solvability_defect": float(solv),
                   "residual_core": res[0], "residual_tail": res[1]}
    return f


# higher order profiles

@dataclass
class ProfileSet:
    gs: object
    tp: TransverseProfiles
    P: ProfileP
    theta: float
    K: int
    c: dict
    A: dict
    X: dict
    info: dict = field(default_factory=dict)

    @property
    def grid(self):
        return self.gs.grid

    @property
    def n_gamma(self):
        return len(self.c)

    def gamma(self, lam):
        return sum(self.c[j] * lam ** (j * self.theta) for j in self.c)


def _products(X, m, count):
    """Sum over ordered index tuples of length count summing to m of prod X."""
    out = None

    def rec(prefix, remaining, slots):
        nonlocal out
        if slots == 0:
            if remaining == 0:
                term = X[prefix[0]]
                for i in prefix[1:]:
                    term = term * X[i]
                out = term if out is None else out + term
            return
        for i in sorted(X):
            if i <= remaining - (slots - 1):
                rec(prefix + [i], remaining - i, slots - 1)

    rec([], m, count)
    return out


def source_term(gs, theta, X, c, m):
    """F_m = sum_j c_j (Lambda X_{m-j} - (m-j) theta X_{m-j}) + 3 d1(Q N_m) + d1 M_m."""
    q = gs.values
    grid = gs.grid
    out = ZField(grid)
    for j, cj in c.items():
        ell = m - j
        if ell in X:
            out = out + cj * (X[ell].scaling() - ell * theta * X[ell])
    n_m = _products(X, m, 2)
    if n_m is not None:
        out = out + 3.0 * (n_m * q).d1()
    m_m = _products(X, m, 3)
    if m_m is not None:
        out = out + m_m.d1()
    return out


def build_profile_set(gs, K=2, P=None, tp=None, op=None, allow_high_order=False, tol=1e-13):
    if K < 1 or K > 4:
        raise ValueError("order K must be in 1..4")
    if K > 2 and not allow_high_order:
        raise ValueError("orders 3 and 4 need allow_high_order=True")
    op = _lop(gs, op)
    if tp is None:
        tp = transverse_profiles(gs)
    if P is None:
        P = solve_P(gs, tp, op, tol=tol)
    theta = tp.theta
    q = gs.values
    pf = P.P
    pq = pf.inner_local(q)
    c = {1: -1.0 / theta}
    X = {1: c[1] * pf}
    A = {}
    info = {}
    for m in range(2, K + 2):
        # the c_{m-1} dependence of F_m is affine; fix it by (F_m, Q) = 0
        if m - 1 >= 2 and m - 1 <= 3:
            X0 = dict(X)
            X0[m - 1] = A[m - 1]
            c0 = dict(c)
            c0[m - 1] = 0.0
            f0 = source_term(gs, theta, X0, c0, m)
            X1 = dict(X)
            X1[m - 1] = A[m - 1] + pf
            c1 = dict(c)
            c1[m - 1] = 1.0
            f1 = source_term(gs, theta, X1, c1, m)
            a0 = f0.inner_local(q)
            a1 = (f1 - f0).inner_local(q)
            c[m - 1] = -a0 / a1
            X[m - 1] = A[m - 1] + c[m - 1] * pf
            info[f"slope_F{m}"] = a1
            info[f"theta_PQ_multiple_F{m}"] = a1 / (theta * pq)
        elif m - 1 == 4:
            X[4] = A[4]
        if m > K:
            break
        Fm = source_term(gs, theta, X, c, m)
        info[f"F{m}_dot_Q"] = Fm.inner_local(q)
        if m == 2:
            # the theta identity makes (F_2, Q) vanish up to discretization; remove the defect
            Fm = Fm - ZField.local(gs.grid, info["F2_dot_Q"] / gs.grid.inner(q, q) * q)
        A[m], inv = invert_dL_Zk(gs, Fm, k=m - 2, op=op, tol=tol, return_info=True, orth_tol=1e-6)
        info[f"A{m}"] = inv
        X[m] = A[m]  # provisional, the P component is added once c_m is known
    return ProfileSet(gs, tp, P, theta, K, c, A, {k: X[k] for k in range(1, K + 1)}, info)


def c2_quadrature(ps):
    """c2 from (F_{3,2}, Q) / (theta (P, Q)), written out term by term."""
    gs = ps.gs
    q = gs.values
    th = ps.theta
    p = ps.P.P
    a2 = ps.A[2]
    f32 = a2.scaling() - 2 * th * a2 + 6.0 * (q * (p * a2)).d1() + (p * p * p).d1() / th ** 2
    return f32.inner_local(q) / (th * p.inner_local(q))


# W and the refined profile

def extended_grid(core, half_width1):
    """Grid with the spacing and y2 axis of core, extended along y1 to at least half_width1."""
    pad = int(np.ceil(max(0.0, half_width1 - core.half_width1) / core.h1))
    pad += (-(core.n1 + 2 * pad)) % 2
    return Grid2D(core.n1 + 2 * pad, core.n2, core.half_width1 + pad * core.h1, core.half_width2)


def _pad_local(core, ext, arr):
    pad = (ext.n1 - core.n1) // 2
    out = np.zeros(ext.shape)
    out[pad:pad + core.n1] = arr
    return out


@dataclass
class BlowupProfile:
    ps: ProfileSet
    lam: float
    K: int
    eval_grid: Grid2D
    Theta: ScaledCutoff
    W: np.ndarray
    V: np.ndarray

    @property
    def theta(self):
        return self.ps.theta

    @property
    def c(self):
        return self.ps.c

    @property
    def gamma(self):
        return self.ps.gamma(self.lam)

    @property
    def X(self):
        return self.ps.X


def build_blowup_profile(ps, lam, K=None, eval_grid=None, min_resolution=4.0):
    """W = Q + sum_k lam^{k theta} X_k Theta on an evaluation grid.

    By default the grid extends far enough that the whole cutoff region fits. A
    narrower window can be passed with min_resolution=0; then only pointwise
    (product rule) quantities are meaningful, not FFT derivatives of W.
    """
    K = ps.K if K is None else K
    if K > ps.K:
        raise ValueError("profile set was built for a lower order")
    if not (0 < lam <= 0.3):
        raise ValueError("lambda must lie in (0, 0.3]")
    core = ps.grid
    a = lam ** 1.6
    if eval_grid is None:
        eval_grid = extended_grid(core, min_resolution / a + 8.0)
    if a * eval_grid.half_width1 < min_resolution:
        raise ValueError("cutoff not resolved: lambda^(8/5) * half_width1 < %g" % min_resolution)
    Th = ScaledCutoff(a)
    t = Th(eval_grid.x1)[:, None]
    V = np.zeros(eval_grid.shape)
    for k in range(1, K + 1):
        V += lam ** (k * ps.theta) * ps.X[k].evaluate(eval_grid) * t
    Q = _pad_local(core, eval_grid, ps.gs.values)
    return BlowupProfile(ps, lam, K, eval_grid, Th, Q + V, V)


def _leibniz_d1(z, cut, eg, order):
    """d1^order (z * cut) evaluated on eg, with z a ZField and cut a 1D cutoff."""
    out = np.zeros(eg.shape)
    zi = z
    for i in range(order + 1):
        out += comb(order, i) * zi.evaluate(eg) * cut(eg.x1, order - i)[:, None]
        if i < order:
            zi = zi.d1()
    return out


def profile_residual(bp, lam_s_over_lam):
    """E(W) computed directly, and the pieces of -(l_s/l + Gamma)(Lambda Q + Psi_lambda) + Psi_W."""
    ps = bp.ps
    eg = bp.eval_grid
    if bp.Theta.a * eg.half_width1 < 4.0:
        raise ValueError("direct evaluation needs the whole cutoff region inside the grid")
    lam, th = bp.lam, ps.theta
    Th = bp.Theta
    t0 = Th(eg.x1)[:, None]
    t1 = Th(eg.x1, 1)[:, None]
    y1 = eg.x1[:, None]
    W = bp.W
    ds_w = np.zeros(eg.shape)
    for k in range(1, bp.K + 1):
        xv = ps.X[k].evaluate(eg)
        ds_w += k * th * lam ** (k * th) * xv * t0 + 1.6 * lam ** (k * th) * xv * y1 * t1
    ds_w *= lam_s_over_lam
    direct = ds_w + eg.d1(eg.lap(W) - W + W ** 3) - lam_s_over_lam * eg.scaling(W)
    pieces = profile_error_terms(bp)
    LQ = _pad_local(ps.grid, eg, ps.grid.scaling(ps.gs.values))
    formula = -(lam_s_over_lam + pieces["gamma"]) * (LQ + pieces["Psi_lambda"]) + pieces["Psi_W"]
    pieces.update({
        "E_W": direct,
        "formula": formula,
        "relative_identity_error": float(eg.norm(direct - formula) / eg.norm(direct)),
    })
    return pieces


def profile_error_terms(bp):
    """Psi_lambda and Psi_W by the product rule; valid on any evaluation window."""
    ps = bp.ps
    eg = bp.eval_grid
    core = ps.grid
    lam, th, K = bp.lam, ps.theta, bp.K
    Th = bp.Theta
    q = ps.gs.values
    c = {j: ps.c[j] for j in ps.c if j <= K}
    gam = sum(cj * lam ** (j * th) for j, cj in c.items())
    X = {k: ps.X[k] for k in range(1, K + 1)}
    t0 = Th(eg.x1)[:, None]
    t1 = Th(eg.x1, 1)[:, None]
    t2 = Th(eg.x1, 2)[:, None]
    t3 = Th(eg.x1, 3)[:, None]
    y1 = eg.x1[:, None]
    LQ = _pad_local(core, eg, core.scaling(q))

    psi_lam = np.zeros(eg.shape)
    psi1 = np.zeros(eg.shape)
    psi2 = np.zeros(eg.shape)
    for k, xk in X.items():
        lk = lam ** (k * th)
        xv = xk.evaluate(eg)
        psi_lam += lk * ((xk.scaling() - k * th * xk).evaluate(eg) * t0 - 0.6 * xv * y1 * t1)
        psi1 += -0.6 * gam * lk * xv * y1 * t1
        lx = xk.apply_L(q) - 2.0 * xk.d1().d1()
        psi2 += lk * (-lx.evaluate(eg) * t1 + 3.0 * xk.d1().evaluate(eg) * t2 + xv * t3)
    J = max(c)
    for m in range(K + 1, K + J + 1):
        acc = None
        for j, cj in c.items():
            ell = m - j
            if ell in X:
                term = cj * (X[ell].scaling() - ell * th * X[ell])
                acc = term if acc is None else acc + term
        if acc is not None:
            psi1 += lam ** (m * th) * acc.evaluate(eg) * t0

    th2 = lambda y, d=0: _power_cut(Th, y, 2, d)
    th3 = lambda y, d=0: _power_cut(Th, y, 3, d)
    th2m = lambda y, d=0: th2(y, d) - Th(y, d)
    th3m = lambda y, d=0: th3(y, d) - Th(y, d)
    psi3 = np.zeros(eg.shape)
    for m in range(3, 3 * K + 1):
        mm = _products(X, m, 3)
        if mm is None:
            continue
        if m <= K:
            psi3 += lam ** (m * th) * (mm.evaluate(eg) * t1 + _leibniz_d1(mm, th3m, eg, 1))
        else:
            psi3 += lam ** (m * th) * _leibniz_d1(mm, th3, eg, 1)
    psi4 = np.zeros(eg.shape)
    for m in range(2, 2 * K + 1):
        nm = _products(X, m, 2)
        if nm is None:
            continue
        qn = nm * q
        if m <= K:
            psi4 += 3.0 * lam ** (m * th) * (qn.evaluate(eg) * t1 + _leibniz_d1(qn, th2m, eg, 1))
        else:
            psi4 += 3.0 * lam ** (m * th) * _leibniz_d1(qn, th2, eg, 1)
    psi_w = gam * LQ * (1.0 - t0) + psi1 + psi2 + psi3 + psi4
    return {"Psi_lambda": psi_lam, "Psi_W": psi_w, "gamma": gam, "grid": eg}


def local_residual_exponent(ps, lams, K=None, window=None, rate=8.0):
    """Least-squares slope of log ||Psi_W exp(-|y|/rate)|| against log lambda."""
    core = ps.grid
    window = 5.0 * core.half_width1 if window is None else window
    eg = extended_grid(core, window)
    norms = []
    for lam in lams:
        bp = build_blowup_profile(ps, lam, K=K, eval_grid=eg, min_resolution=0.0)
        norms.append(local_residual_norm(profile_error_terms(bp), rate))
    slope = np.polyfit(np.log(lams), np.log(norms), 1)[0]
    return float(slope), np.array(norms)


def _power_cut(cut, y, p, d):
    """Derivatives of cut(y)^p up to order 3."""
    c0 = cut(y)
    if d == 0:
        return c0 ** p
    c1 = cut(y, 1)
    if d == 1:
        return p * c0 ** (p - 1) * c1
    c2 = cut(y, 2)
    if d == 2:
        return p * (p - 1) * c0 ** (p - 2) * c1 ** 2 + p * c0 ** (p - 1) * c2
    c3 = cut(y, 3)
    return (p * (p - 1) * (p - 2) * c0 ** (p - 3) * c1 ** 3
            + 3 * p * (p - 1) * c0 ** (p - 2) * c1 * c2 + p * c0 ** (p - 1) * c3)


def local_residual_norm(res, rate=8.0):
    eg = res["grid"]
    return float(eg.norm(res["Psi_W"] * np.exp(-eg.R / rate)))


@dataclass
class RefinedProfile:
    bp: BlowupProfile
    b: float
    chi_b: ScaledCutoff
    P_b: np.ndarray
    W_b_lambda: np.ndarray
    sigma_star: float
    Psi_b: np.ndarray


def build_refined_profile(bp, b, sigma_star=None):
    """W_{b,lambda} = W + b chi(|b|^{3/4} y1) P and the error field Psi_b, on bp's evaluation grid."""
    if abs(b) >= B_STAR:
        raise ValueError(f"|b| must stay below {B_STAR}")
    ps = bp.ps
    eg = bp.eval_grid
    pf = ps.P.P
    if sigma_star is None:
        sigma_star = compute_sigma_star(ps.P, ps.gs)
    if b == 0:
        zero = np.zeros(eg.shape)
        return RefinedProfile(bp, 0.0, None, zero, bp.W.copy(), sigma_star, zero)
    cb = ScaledCutoff(abs(b) ** 0.75)
    pb = _leibniz_d1(pf, cb, eg, 0)
    wb = bp.W + b * pb
    psi = refined_error_field(bp, b, cb)
    return RefinedProfile(bp, float(b), cb, pb, wb, sigma_star, psi)


def _w_d1(bp):
    """d1 W from the product rule, exact for the non-periodic pieces."""
    ps = bp.ps
    eg = bp.eval_grid
    out = _pad_local(ps.grid, eg, ps.grid.d1(ps.gs.values))
    for k in range(1, bp.K + 1):
        out += bp.lam ** (k * ps.theta) * _leibniz_d1(ps.X[k], bp.Theta, eg, 1)
    return out


def refined_error_field(bp, b, cb):
    """Psi_b = d1(b Lap P_b - b P_b + W_b^3 - W^3) + b Lambda Q + b Gamma Lambda P_b."""
    ps = bp.ps
    eg = bp.eval_grid
    pf = ps.P.P
    q = ps.gs.values
    lapP = pf.lap()
    # d1 (Lap P_b - P_b) via Leibniz on chi_b P
    d1_lap_pb = (_leibniz_d1(lapP, cb, eg, 1) + 2.0 * _leibniz_d1(pf.d1(), lambda y, d=0: cb(y, d + 1), eg, 1)
                 + _leibniz_d1(pf, lambda y, d=0: cb(y, d + 2), eg, 1))
    d1_pb = _leibniz_d1(pf, cb, eg, 1)
    pb = _leibniz_d1(pf, cb, eg, 0)
    W = bp.W
    dW = _w_d1(bp)
    Wb = W + b * pb
    dWb = dW + b * d1_pb
    cubic = 3.0 * (Wb * Wb * dWb - W * W * dW)
    lam_pb = pf.scaling().evaluate(eg) * cb(eg.x1)[:, None] + pf.evaluate(eg) * (eg.x1 * cb(eg.x1, 1))[:, None]
    LQ = _pad_local(ps.grid, eg, ps.grid.scaling(q))
    return b * (d1_lap_pb - d1_pb) + cubic + b * LQ + b * bp.gamma * lam_pb


def refined_scalar_product(bp, b, sigma_star=None):
    """((Psi_b, Q) + sigma* b lam^theta (P, Q), |b| (|b| + lam^{2 theta}))."""
    ps = bp.ps
    if sigma_star is None:
        sigma_star = compute_sigma_star(ps.P, ps.gs)
    cb = ScaledCutoff(abs(b) ** 0.75)
    psi = refined_error_field(bp, b, cb)
    eg = bp.eval_grid
    Qe = _pad_local(ps.grid, eg, ps.gs.values)
    pq = ps.P.P.inner_local(ps.gs.values)
    lhs = eg.inner(psi, Qe) + sigma_star * b * bp.lam ** ps.theta * pq
    return lhs, abs(b) * (abs(b) + bp.lam ** (2 * ps.theta))
