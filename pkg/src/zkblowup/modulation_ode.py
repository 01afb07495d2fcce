"""Modulation system for (lambda, b, x1) in rescaled time and blow-up rate fits."""
from dataclasses import dataclass, field, replace

import numpy as np
from scipy.integrate import cumulative_simpson, quad, solve_ivp
from scipy.optimize import brentq


class ParameterRangeError(RuntimeError):
    pass


@dataclass(frozen=True)
class OdeConfig:
    theta: float
    c2: float = 0.0
    c3: float = 0.0
    lambda0: float = 0.3
    rtol: float = 1e-10
    atol: float = 1e-30

    def __post_init__(self):
        # the blow-up ansatz lambda ~ |s|^(-1/theta) with x1 ~ |s|^(1 - 1/theta) needs theta > 1
        if not self.theta > 1.0:
            raise ValueError("theta must exceed 1")
        if not 0 < self.lambda0 <= 1:
            raise ValueError("lambda0 must lie in (0, 1]")

    @property
    def c1(self):
        return -1.0 / self.theta

    @classmethod
    def from_profiles(cls, ps, **kw):
        return cls(theta=ps.theta, c2=ps.c.get(2, 0.0), c3=ps.c.get(3, 0.0), **kw)

    def truncated(self):
        """Same theta, Gamma reduced to its leading term."""
        return replace(self, c2=0.0, c3=0.0)


def gamma(cfg, lam):
    lam = np.asarray(lam, dtype=float)
    if np.any(lam < 0):
        raise ValueError("lambda must be nonnegative")
    x = lam ** cfg.theta
    return cfg.c1 * x + cfg.c2 * x * x + cfg.c3 * x ** 3


def g_denominator(cfg, tau):
    """1/theta - c2 tau^theta - c3 tau^(2 theta), the factor that must stay positive."""
    x = np.asarray(tau, dtype=float) ** cfg.theta
    return 1.0 / cfg.theta - cfg.c2 * x - cfg.c3 * x * x


def positivity_audit(cfg, samples=2001):
    tau = np.linspace(0.0, cfg.lambda0, samples)
    d = g_denominator(cfg, tau)
    return {"min_denominator": float(d.min()), "argmin": float(tau[np.argmin(d)]),
            "positive": bool(d.min() > 0)}


def G_of_lambda(cfg, lam):
    """int_lam^lambda0 dtau / (tau^{1+theta} (1/theta - c2 tau^theta - c3 tau^{2 theta})).

    With u = tau^-theta the integrand becomes 1/(1 - theta c2/u - theta c3/u^2),
    so G = (U - U0) + int_{U0}^{U} (integrand - 1) du, and the remainder is
    integrated in log u.
    """
    if not (0.0 < lam <= cfg.lambda0):
        raise ParameterRangeError(f"lambda={lam} outside (0, {cfg.lambda0}]")
    th = cfg.theta
    u_hi = lam ** -th
    u_lo = cfg.lambda0 ** -th
    if u_hi == u_lo:
        return 0.0

    def excess(v):
        u = np.exp(v)
        a = th * cfg.c2 / u + th * cfg.c3 / (u * u)
        return a / (1.0 - a) * u

    rem, _ = quad(excess, np.log(u_lo), np.log(u_hi), epsabs=0.0, epsrel=1e-13, limit=200)
    return float((u_hi - u_lo) + rem)


def dG_dlambda(cfg, lam):
    return -1.0 / (lam ** (1.0 + cfg.theta) * g_denominator(cfg, lam))


def G_inverse(cfg, n):
    if n < 0:
        raise ValueError("n must be nonnegative")
    if n == 0:
        return cfg.lambda0
    lo = np.log(cfg.lambda0)
    guess = np.log(n) / -cfg.theta
    a = min(guess, lo) - 2.0
    while G_of_lambda(cfg, np.exp(a)) < n:
        a -= 2.0
    v = brentq(lambda x: G_of_lambda(cfg, np.exp(x)) - n, a, lo, xtol=1e-15, rtol=4 * np.finfo(float).eps, maxiter=200)
    return float(np.exp(v))


@dataclass
class ParamState:
    s: float
    t: float
    lam: float
    b: float
    x1: float

    def __post_init__(self):
        if not self.lam > 0:
            raise ValueError("lambda must be positive")
        if not all(np.isfinite([self.s, self.t, self.lam, self.b, self.x1])):
            raise ValueError("state must be finite")


@dataclass
class ParamTrajectory:
    s: np.ndarray
    t: np.ndarray
    lam: np.ndarray
    b: np.ndarray
    x1: np.ndarray
    status: str = "ok"
    fits: dict = field(default_factory=dict)

    def __len__(self):
        return self.s.size

    def state(self, i):
        return ParamState(self.s[i], self.t[i], self.lam[i], self.b[i], self.x1[i])

    def to_csv(self, path):
        data = np.column_stack([self.s, self.t, self.lam, self.b, self.x1])
        np.savetxt(path, data, delimiter=",", header="s,t,lambda,b,x1", comments="", fmt="%.17g")


def _rhs(cfg):
    th = cfg.theta

    def f(s, y):
        loglam, b = y[0], y[1]
        lam = np.exp(loglam)
        return [-gamma(cfg, lam) - b, b * lam ** th, lam, lam ** 3]

    return f


def integrate_params(cfg, initial, s_end, samples=None, n_samples=400):
    """Integrate lambda_s/lambda = -Gamma - b, b_s = b lambda^theta, x1_s = lambda, t_s = lambda^3.

    Sample points default to a log-spaced set in |s|. Leaving (0, lambda0] stops
    the run and is reported in the status field.
    """
    s0 = initial.s
    if not (0 < initial.lam <= cfg.lambda0):
        raise ParameterRangeError("initial lambda outside (0, lambda0]")
    if s_end <= s0:
        raise ValueError("s_end must exceed the initial s")
    if samples is None:
        if s_end < 0:
            samples = -np.geomspace(-s0, -s_end, n_samples)
        else:
            samples = np.linspace(s0, s_end, n_samples)
        samples[0], samples[-1] = s0, s_end
    log_l0 = np.log(cfg.lambda0)

    def leave(s, y):
        return y[0] - log_l0

    leave.terminal = True
    leave.direction = 1
    y0 = [np.log(initial.lam), initial.b, initial.x1, initial.t]
    sol = solve_ivp(_rhs(cfg), (s0, s_end), y0, method="DOP853", t_eval=samples, events=leave,
                    rtol=cfg.rtol, atol=[1e-14, cfg.atol, cfg.atol, cfg.atol])
    if not sol.success:
        raise ParameterRangeError(sol.message)
    status = "ok" if sol.status == 0 else "lambda left (0, lambda0]"
    y = sol.y
    return ParamTrajectory(sol.t, y[3], np.exp(y[0]), y[1], y[2], status=status)


def rescaled_time_map(traj, T_anchor, S_anchor):
    """Recompute t from dt/ds = lambda^3 by cumulative Simpson quadrature, pinned at (S_anchor, T_anchor)."""
    if np.any(traj.lam <= 0):
        raise ValueError("lambda samples must be positive")
    cum = cumulative_simpson(traj.lam ** 3, x=traj.s, initial=0.0)
    ref = np.interp(S_anchor, traj.s, cum)
    return replace(traj, t=T_anchor + cum - ref)


def anchor_pair(theta, n):
    """(T_n, S_n) = (theta / ((3 - theta) n^{(3-theta)/theta}), -n)."""
    return theta / ((3.0 - theta) * n ** ((3.0 - theta) / theta)), -float(n)


def time_of_lambda(cfg, lam):
    """t as a function of lambda on the b = 0 trajectory that blows up at t = 0."""
    val, _ = quad(lambda x: x * x / -gamma(cfg, x), 0.0, lam, epsabs=0.0, epsrel=1e-13, limit=200)
    return val


def special_solution(theta, s):
    return np.abs(s) ** (-1.0 / theta)


def blowup_trajectory(cfg, lam_small, lam_large, b0=0.0, n_samples=400):
    """Run from lambda = lam_small at s = -G(lam_small) up to s = -G(lam_large).

    t starts at the b = 0 blow-up time map and x1 at its leading asymptotics, so
    that t -> 0 and x1 -> -infinity match the self-similar regime.
    """
    if not (0 < lam_small < lam_large < cfg.lambda0):
        raise ValueError("need 0 < lam_small < lam_large < lambda0")
    th = cfg.theta
    s0 = -G_of_lambda(cfg, lam_small)
    s1 = -G_of_lambda(cfg, lam_large)
    x0 = -th / (th - 1.0) * abs(s0) ** ((th - 1.0) / th)
    init = ParamState(s0, time_of_lambda(cfg, lam_small), lam_small, b0, x0)
    return integrate_params(cfg, init, s1, n_samples=n_samples)


def fit_blowup_rates(traj, t_range=None):
    """Log-log least-squares exponents of lambda, |x1| and |b| against t."""
    t = traj.t
    mask = t > 0
    if t_range is not None:
        mask &= (t >= t_range[0]) & (t <= t_range[1])
    if mask.sum() < 3:
        raise ValueError("not enough samples with t > 0")
    span = np.log10(t[mask].max() / t[mask].min())
    if span < 2.0:
        raise ValueError("trajectory must span at least two decades in t")
    lt = np.log(t[mask])
    out = {"decades": float(span)}
    out["p_lambda"] = float(np.polyfit(lt, np.log(traj.lam[mask]), 1)[0])
    out["p_x1"] = float(np.polyfit(lt, np.log(np.abs(traj.x1[mask])), 1)[0])
    bm = np.abs(traj.b[mask])
    out["p_b"] = float(np.polyfit(lt[bm > 0], np.log(bm[bm > 0]), 1)[0]) if np.count_nonzero(bm) >= 3 else float("nan")
    traj.fits.update(out)
    return out
