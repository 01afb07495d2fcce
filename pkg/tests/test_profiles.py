import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from zkblowup import profiles as pr
from zkblowup.ground_state import cached_ground_state
from zkblowup.spectral_core import Grid2D
from zkblowup.zfields import ZField
from tests.oracles import golden


@pytest.fixture(scope="module")
def ps512():
    return pr.build_profile_set(cached_ground_state(Grid2D.square(512, 32.0)), K=2)


def test_F_examples(gs_mid):
    g = gs_mid.grid
    F = pr.compute_F(gs_mid)
    assert np.max(np.abs(F - np.roll(F[::-1], 1))) < 1e-10
    assert F.sum() * g.h2 == pytest.approx(-g.integral(gs_mid.values), rel=1e-8)
    sel = (g.x2 >= 10) & (g.x2 <= 20)
    slope = np.polyfit(g.x2[sel], np.log(np.abs(F[sel])), 1)[0]
    assert slope == pytest.approx(-1.0, abs=0.1)


def test_h2_examples(gs_mid):
    g = gs_mid.grid
    tp = pr.transverse_profiles(gs_mid)
    assert abs(tp.h2.sum() * g.h2) < 1e-10
    k = pr._k_1d(g.n2, g.half_width2)
    res = np.fft.ifft((k ** 2 + 1) * np.fft.fft(tp.h2) + k ** 2 * np.fft.fft(tp.F))
    assert np.max(np.abs(res)) < 1e-10
    Fh, hh = np.fft.fft(tp.F), np.fft.fft(tp.h2)
    assert np.max(np.abs(Fh + hh - Fh / (1 + k ** 2))) < 1e-12 * np.max(np.abs(Fh))
    assert abs(tp.G_of_y1 @ tp.h1) * g.h1 < 1e-12
    assert tp.h1.sum() * g.h1 == pytest.approx(1.0)


def test_theta_examples(gs_mid):
    th = pr.compute_theta(pr.compute_F(gs_mid), gs_mid.grid.half_width2)
    assert 1.6 < th < 1.8
    assert pr.compute_theta(np.ones(64), 5.0) == pytest.approx(2.0)
    with pytest.raises(ValueError):
        pr.compute_theta(np.zeros(16))


def test_theta_golden():
    gs = cached_ground_state(Grid2D.square(512, 40.0))
    th = pr.compute_theta(pr.compute_F(gs), 40.0)
    ref = golden("theta_512_L40", lambda: {"theta": th})
    assert th == pytest.approx(ref["theta"], abs=1e-9)
    assert abs(th - 1.66032) <= 5e-3


@settings(max_examples=30, deadline=None)
@given(st.floats(0.1, 10.0), st.floats(0.3, 3.0))
def test_theta_is_scale_invariant(a, width):
    y = np.linspace(-20, 20, 256, endpoint=False)
    F = np.exp(-(y / width) ** 2)
    assert pr.compute_theta(a * F, 20.0) == pytest.approx(pr.compute_theta(F, 20.0), rel=1e-12)
    assert 0.0 < pr.compute_theta(F, 20.0) <= 2.0


def test_profile_P(ps_mid):
    d = ps_mid.P.diagnostics
    assert abs(d["P_dot_Q"] - d["quarter_F_sq"]) / d["quarter_F_sq"] <= 1e-5
    assert d["left_limit_error"] <= 1e-4
    assert d["right_decay_constant"] < 10.0
    assert max(abs(d["d1P_dot_Q"]), abs(d["d2P_dot_Q"])) <= 1e-7
    assert d["parity_error"] == 0.0


def test_theta_consistency_and_fourier_identity(ps_mid):
    gs = ps_mid.gs
    tc = pr.theta_consistency(ps_mid.P, gs)
    assert abs(tc - ps_mid.theta) / ps_mid.theta <= 1e-3
    lhs, ref = pr.fourier_energy_identity(ps_mid.P, gs, ps_mid.tp)
    assert abs(lhs - ref) <= 1e-4 * abs(ref)


def test_quotient_homogeneity(ps_mid):
    gs = ps_mid.gs
    q = gs.values
    P = ps_mid.P.P
    lin = P.scaling().inner_local(q) / P.inner_local(q)
    for eps in (1e-2, 1e-4):
        num, den = pr._theta_parts(eps * P, gs)
        # the quadratic part shrinks linearly with eps
        assert abs(num / den - lin) < 5 * eps * abs(lin) + 1e-10


def test_invert_dL_examples(ps_mid):
    gs = ps_mid.gs
    g = gs.grid
    P2 = pr.invert_dL_Zk(gs, ZField.local(g, g.scaling(gs.values)), k=-1)
    assert np.max(np.abs(P2.full() - ps_mid.P.P.full())) < 1e-5
    z = pr.invert_dL_Zk(gs, np.zeros(g.shape))
    assert not np.any(z.core) and z.tails.shape[0] == 0
    assert ps_mid.info["A2"]["residual_core"] <= 1e-3
    with pytest.raises(pr.SolvabilityError):
        pr.invert_dL_Zk(gs, ZField.local(g, gs.values))
    with pytest.raises(pr.SolvabilityError):
        pr.invert_dL_Zk(gs, ps_mid.P.P, k=-1)


def test_a2_residual_production(ps512):
    assert ps512.info["A2"]["residual_core"] <= 1e-4


def test_gamma_coefficients(ps512):
    assert ps512.c[1] == -1.0 / ps512.theta
    ref = golden("c2_512_L32", lambda: {"c2": pr.c2_quadrature(ps512)})
    assert ps512.c[2] == pytest.approx(ref["c2"], rel=1e-8)
    assert pr.c2_quadrature(ps512) == pytest.approx(ps512.c[2], rel=1e-9)


def test_sigma_star(ps512):
    gs = ps512.gs
    s = pr.compute_sigma_star(ps512.P, gs)
    ref = golden("sigma_star_512_L32", lambda: {"sigma_star": s})
    assert s == pytest.approx(ref["sigma_star"], rel=1e-8)
    num, den = pr._theta_parts(ps512.P, gs)
    assert abs(num - ps512.theta * den) <= 1e-3 * abs(num)
    # dropping the nonlinear terms from both entries leaves a quotient of 1
    lp = ps512.P.P.scaling().inner_local(gs.values)
    assert lp / lp == 1.0


def test_profile_set_validation(gs_mid, ps_mid):
    with pytest.raises(ValueError):
        pr.build_profile_set(gs_mid, K=0)
    with pytest.raises(ValueError):
        pr.build_profile_set(gs_mid, K=3)
    with pytest.raises(ValueError):
        pr.build_blowup_profile(ps_mid, 0.5)
    with pytest.raises(ValueError):
        pr.build_blowup_profile(ps_mid, 0.1, K=3)


def test_W_approaches_Q(ps_mid):
    lams = np.array([0.02, 0.04, 0.08])
    dist, dmass = [], []
    for lam in lams:
        bp = pr.build_blowup_profile(ps_mid, lam)
        eg = bp.eval_grid
        Qe = pr._pad_local(ps_mid.grid, eg, ps_mid.gs.values)
        dist.append(np.sqrt(eg.h1_norm_sq(bp.W - Qe)))
        dmass.append(abs(eg.inner(bp.W, bp.W) - eg.inner(Qe, Qe)))
    slope = np.polyfit(np.log(lams), np.log(dist), 1)[0]
    assert slope >= ps_mid.theta - 0.8 - 0.05
    consts = np.array(dmass) / lams ** ps_mid.theta
    assert consts.max() / consts.min() < 3.0


def test_profile_identity_production(ps512):
    bp = pr.build_blowup_profile(ps512, 0.1)
    rate = -ps512.gamma(0.1)
    assert pr.profile_residual(bp, rate)["relative_identity_error"] <= 1e-6
    with pytest.raises(ValueError):
        pr.profile_residual(pr.build_blowup_profile(ps512, 0.1, eval_grid=ps512.grid, min_resolution=0.0), rate)


def test_local_residual_exponent(ps_mid):
    slope, norms = pr.local_residual_exponent(ps_mid, np.geomspace(0.02, 0.2, 6))
    assert slope >= 3 * ps_mid.theta - 0.2
    assert np.all(np.diff(norms) > 0)


def test_psi_lambda_local_bound(ps_mid):
    consts = []
    for lam in (0.05, 0.1, 0.2):
        bp = pr.build_blowup_profile(ps_mid, lam)
        terms = pr.profile_error_terms(bp)
        eg = terms["grid"]
        near = eg.R <= 10.0
        weighted = np.abs(terms["Psi_lambda"][near]) * np.exp(eg.R[near] / 4.0)
        consts.append(np.max(weighted) / lam ** ps_mid.theta)
    assert max(consts) / min(consts) < 3.0


def test_refined_profile(ps_mid):
    bp = pr.build_blowup_profile(ps_mid, 0.1)
    r0 = pr.build_refined_profile(bp, 0.0)
    assert np.array_equal(r0.W_b_lambda, bp.W)
    with pytest.raises(ValueError):
        pr.build_refined_profile(bp, 0.06)
    eg = bp.eval_grid
    m0 = eg.inner(bp.W, bp.W)
    for b in (1e-4, 1e-3, -1e-3):
        rb = pr.build_refined_profile(bp, b)
        dm = abs(eg.inner(rb.W_b_lambda, rb.W_b_lambda) - m0)
        assert dm <= 50.0 * (abs(b) + abs(b) ** 0.25 * 0.1 ** ps_mid.theta)


def test_refined_constant_stable_across_grids(ps_mid, ps512):
    def worst(ps):
        out = 0.0
        for lam in (0.05, 0.1, 0.2):
            bp = pr.build_blowup_profile(ps, lam)
            for b in (1e-4, -1e-4, 1e-3, -1e-3, 1e-2, -1e-2):
                lhs, scale = pr.refined_scalar_product(bp, b)
                out = max(out, abs(lhs) / scale)
        return out
    a, b = worst(ps_mid), worst(ps512)
    assert abs(a - b) / b <= 0.2
