import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from zkblowup import zk_dynamics as zd
from zkblowup.modulation_ode import OdeConfig, blowup_trajectory, gamma
from zkblowup.spectral_core import Grid2D, RealField2D, linear_flow


@pytest.fixture(scope="module")
def source(ps_mid):
    return zd.ProfileSource(ps_mid)


def test_config_validation():
    with pytest.raises(ValueError):
        zd.SolverConfig(dt=0.0)
    with pytest.raises(ValueError):
        zd.SolverConfig(dealias=1.5)


def test_zero_field_stays_zero(small_grid):
    out = zd.step(RealField2D(small_grid, np.zeros(small_grid.shape)))
    assert not np.any(out.values)


def test_linear_run_matches_flow():
    g = Grid2D.square(64, 10.0)
    f = np.exp(-g.R ** 2) * (1 + g.Y1)
    cfg = zd.SolverConfig(dt=1e-2, nonlinear=False, dealias=1.0)
    out = zd.ZKSolver(g, cfg).run(f, 0.5)
    ref = linear_flow(RealField2D(g, f), 0.5).values
    assert np.max(np.abs(out - ref)) < 1e-12


def test_run_validation(gs_small):
    solver = zd.ZKSolver(gs_small.grid, zd.SolverConfig(dt=1e-3))
    with pytest.raises(ValueError):
        solver.run(gs_small.values, 0.0105)
    big = zd.ZKSolver(gs_small.grid, zd.SolverConfig(dt=0.5))
    with pytest.raises(ValueError):
        big.run(gs_small.values, 1.0)


def test_soliton_short_transit(gs_small):
    r = zd.soliton_transit(gs_small, zd.SolverConfig(dt=1e-3), t_end=0.5)
    # coarse grid: the full-accuracy transit is exercised by the acceptance suite
    assert r["speed_error"] < 1e-4
    assert r["shape_error"] < 1e-3
    assert r["mass_drift"] < 1e-8
    calls = []
    zd.ZKSolver(gs_small.grid, zd.SolverConfig(dt=1e-2)).run(gs_small.values, 0.1, callback=lambda t, u: calls.append(t), every=5)
    assert calls == pytest.approx([0.05, 0.1])


def test_soliton_initial_data(gs_mid):
    g = gs_mid.grid
    assert np.array_equal(zd.soliton_initial_data(gs_mid).values, gs_mid.values)
    for lam in (0.8, 1.25):
        f = zd.soliton_initial_data(gs_mid, lam, 0.5)
        assert g.inner(f.values, f.values) == pytest.approx(gs_mid.mass, rel=1e-10)
        # centered at a grid node the peak is sampled exactly
        peak = zd.soliton_initial_data(gs_mid, lam).values.max()
        assert peak == pytest.approx(gs_mid.values.max() / lam, rel=1e-10)
    with pytest.raises(ValueError):
        zd.soliton_initial_data(gs_mid, 0.0)


def test_conserved_quantities_of_Q(gs_mid):
    cq = zd.conserved_quantities(gs_mid.Q)
    assert cq["mass"] == pytest.approx(gs_mid.mass)
    assert abs(cq["energy"]) <= 1e-8 * gs_mid.grid.h1_norm_sq(gs_mid.values) ** 2


def test_fit_translation(gs_mid):
    g = gs_mid.grid
    q = gs_mid.values
    shifted = np.real(np.fft.ifft(np.fft.fft(q, axis=0) * np.exp(-1j * g.k1[:, None] * 0.37), axis=0))
    assert zd.fit_translation(g, shifted, q, guess=0.3) == pytest.approx(0.37, abs=1e-10)


def test_decompose_round_trip(source):
    g = source.grid
    lam, x1, b = 0.25, 0.3, 0.002
    d0 = zd.Decomposition(lam, x1, b, np.zeros(g.shape), np.zeros(3), 0, g)
    vals, lab, off = zd.reconstruct(d0, source)
    d = zd.decompose(vals, lab, (lam * 1.001, x1 + 1e-3, b * 0.99), source, offset1=off)
    again, _, _ = zd.reconstruct(d, source)
    assert np.max(np.abs(again - vals)) < 1e-9
    assert max(abs(d.lam - lam), abs(d.x1 - x1), abs(d.b - b)) < 1e-10


def test_round_trip_with_eps(source, rng):
    r = zd.round_trip(source, (0.25, 0.3, 0.002), rng)
    assert r["parameter_error"] <= 1e-8
    assert r["orthogonality"] <= 1e-10
    assert r["eps_error"] < 1e-6


def test_modulation_response_to_translation(source):
    g = source.grid
    lam, x1, b = 0.02, 0.0, 0.0
    d0 = zd.Decomposition(lam, x1, b, np.zeros(g.shape), np.zeros(3), 0, g)
    vals, lab, off = zd.reconstruct(d0, source)
    delta = 1e-6
    d = zd.decompose(vals + delta * source.d1q, lab, (lam, x1, b), source, offset1=off)
    assert (d.x1 - x1) / (-delta * lam ** 2) == pytest.approx(1.0, abs=0.02)


def test_decompose_fails_outside_tube(source):
    g = source.grid
    with pytest.raises(zd.DecompositionError):
        zd.decompose(np.zeros(g.shape), g, (1.0, 0.0, 0.0), source)


def test_modulation_residuals_on_exact_paths():
    cfg = OdeConfig(theta=1.6614843541530675, c2=-1.28)
    traj = blowup_trajectory(cfg, 1e-3, 5e-2, n_samples=4000)
    series = {"s": traj.s, "lambda": traj.lam, "b": traj.b, "x1": traj.x1}
    res = zd.modulation_residuals(series, cfg)
    lam_s = np.gradient(traj.lam, traj.s, edge_order=2)
    direct = np.abs(lam_s / traj.lam + gamma(cfg, traj.lam) + traj.b)
    assert np.max(direct[5:-5]) < 1e-6
    assert res["max_ratio_b"] == 0.0
    with pytest.raises(ValueError):
        zd.modulation_residuals({k: v[:3] for k, v in series.items()}, cfg)


@pytest.fixture(scope="module")
def short_run(ps_mid):
    seen = []

    def hook(eps, grid, W):
        seen.append(float(grid.norm(eps)))
        return {"hook_norm": seen[-1]}
    res = zd.run_blowup_experiment(ps_mid, zd.ExperimentConfig(window=1.0), diagnostics=hook)
    return res, seen


def test_experiment_start(ps_mid, short_run):
    res, seen = short_run
    th = ps_mid.theta
    first = res.samples[0]
    assert res.status == "ok"
    assert first["eps_L2"] < 1e-12
    assert first["x1"] == pytest.approx(-th / (th - 1) * 100 ** (1 - 1 / th))
    assert first["s"] == -100.0
    assert seen[0] == first["hook_norm"]
    assert len(res.samples) == 3


def test_bootstrap_metrics(ps_mid, short_run):
    res, _ = short_run
    m = zd.bootstrap_metrics(res, ps_mid.theta)
    assert m["samples"] == 3
    assert m["max_lambda_metric"] <= 10.0
    with pytest.raises(ValueError):
        zd.bootstrap_metrics(zd.ExperimentResult(), ps_mid.theta)


@settings(max_examples=10, deadline=None)
@given(st.floats(-2.0, 2.0))
def test_solver_commutes_with_transverse_reflection(a):
    g = Grid2D.square(32, 8.0)
    f = a * np.exp(-g.R ** 2) * (1 + 0.3 * g.Y2 + 0.2 * g.Y1)
    cfg = zd.SolverConfig(dt=1e-2)
    out = zd.ZKSolver(g, cfg).run(f, 0.1)
    refl = lambda v: np.roll(np.flip(v, 1), 1, 1)
    alt = zd.ZKSolver(g, cfg).run(refl(f), 0.1)
    assert np.max(np.abs(refl(alt) - out)) < 1e-12
