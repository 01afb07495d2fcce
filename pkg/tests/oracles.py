"""Independent reference computations used to freeze expected values."""
import json
from pathlib import Path

import numpy as np
from scipy.integrate import solve_ivp, quad

GOLDEN = Path(__file__).parent / "golden"


def _shoot(a, r_max=40.0):
    """Integrate Q'' + Q'/r - Q + Q^3 = 0 from Q(0)=a, Q'(0)=0.

    Returns the dense solution and the radius where it leaves the band
    0 < Q, Q' < 0.
    """
    r0 = 1e-6
    # series start: Q = a + c r^2, c = (a - a^3)/4
    c = (a - a ** 3) / 4.0
    y0 = [a + c * r0 ** 2, 2 * c * r0]

    def rhs(r, y):
        return [y[1], -y[1] / r + y[0] - y[0] ** 3]

    def cross(r, y):
        return y[0]
    cross.terminal = True

    def turn(r, y):
        return y[1]
    turn.terminal = True
    turn.direction = 1

    sol = solve_ivp(rhs, (r0, r_max), y0, method="DOP853", rtol=1e-13, atol=1e-16,
                    events=(cross, turn), dense_output=True)
    if sol.t_events[0].size:
        return sol, +1, sol.t_events[0][0]
    if sol.t_events[1].size:
        return sol, -1, sol.t_events[1][0]
    return sol, 0, r_max


def radial_ground_state_mass():
    """Mass 2 pi int Q^2 r dr of the positive radial solution by bisection shooting."""
    lo, hi = 2.0, 2.5
    for _ in range(200):
        mid = 0.5 * (lo + hi)
        _, kind, _ = _shoot(mid)
        if kind > 0:
            hi = mid
        else:
            lo = mid
        if hi - lo < 1e-15:
            break
    sol_lo, _, r_lo = _shoot(lo)
    sol_hi, _, r_hi = _shoot(hi)
    # trust the profile up to where the bracketing solutions separate
    rs = np.linspace(1e-6, min(r_lo, r_hi), 20001)
    ql = sol_lo.sol(rs)[0]
    qh = sol_hi.sol(rs)[0]
    gap = np.abs(ql - qh) > 1e-3 * np.abs(ql)
    r_cut = rs[np.argmax(gap)] if gap.any() else rs[-1]
    r_cut = min(r_cut, 14.0)
    f = lambda r: sol_lo.sol(r)[0] ** 2 * r
    core = quad(f, 1e-6, r_cut, limit=400, epsabs=1e-14, epsrel=1e-13)[0]
    # K0 tail matched at r_cut
    from scipy.special import k0
    qc = sol_lo.sol(r_cut)[0]
    amp = qc / k0(r_cut)
    tail = quad(lambda r: (amp * k0(r)) ** 2 * r, r_cut, np.inf, epsabs=1e-16)[0]
    return 2 * np.pi * (core + tail), 0.5 * (lo + hi)


def golden(name, producer):
    """Load a frozen value, producing and storing it on first use."""
    path = GOLDEN / f"{name}.json"
    if path.exists():
        return json.loads(path.read_text())
    value = producer()
    path.write_text(json.dumps(value, indent=2) + "\n")
    return value


def gaussian_transform(k1, k2, s=1.0):
    """Unitary 2D transform of exp(-|x|^2/(2 s^2))."""
    return s ** 2 * np.exp(-0.5 * s ** 2 * (k1 ** 2 + k2 ** 2))


def radial_profile(a=None):
    """Callable r -> Q(r) from shooting, with K0 tail beyond the trusted radius."""
    from scipy.special import k0
    if a is None:
        _, a = radial_ground_state_mass()
    sol, _, r_end = _shoot(a)
    r_cut = min(10.0, r_end)
    amp = sol.sol(r_cut)[0] / k0(r_cut)

    def q(r):
        r = np.asarray(r, dtype=float)
        out = np.empty_like(r)
        inner = r <= r_cut
        out[inner] = sol.sol(np.maximum(r[inner], 1e-6))[0]
        out[~inner] = amp * k0(r[~inner])
        return out
    return q


def periodic_d2_matrix(n, half_width):
    """Dense Fourier second-derivative matrix on n periodic points (n even)."""
    m = np.arange(1, n)
    scale = (np.pi / half_width) ** 2
    col = np.empty(n)
    col[0] = -scale * (n ** 2 / 12.0 + 1.0 / 6.0)
    col[1:] = -scale * 0.5 * (-1.0) ** m / np.sin(m * np.pi / n) ** 2
    from scipy.linalg import toeplitz
    return toeplitz(col)


def dense_mu0(n=64, half_width=12.0):
    """Negative eigenvalue magnitude of -Lap + 1 - 3Q^2 by dense diagonalization."""
    from scipy.linalg import eigh
    q = radial_profile()
    x = -half_width + 2 * half_width / n * np.arange(n)
    X1, X2 = np.meshgrid(x, x, indexing="ij")
    qq = q(np.hypot(X1, X2))
    d2 = periodic_d2_matrix(n, half_width)
    eye = np.eye(n)
    lap = np.kron(d2, eye) + np.kron(eye, d2)
    mat = -lap + np.diag(1.0 - 3.0 * qq.ravel() ** 2)
    vals = eigh(mat, eigvals_only=True, subset_by_index=[0, 3])
    return float(-vals[0]), vals
