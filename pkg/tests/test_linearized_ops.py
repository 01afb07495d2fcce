import numpy as np
import pytest

from zkblowup.ground_state import cached_ground_state
from zkblowup.linearized_ops import (LinearizedOperator, apply_operator, coercivity_constant, invert_L,
                                     lowest_eigenpairs)
from zkblowup.spectral_core import Grid2D, RealField2D
from tests.oracles import dense_mu0, golden


@pytest.fixture(scope="module")
def gs20():
    return cached_ground_state(Grid2D.square(256, 20.0))


@pytest.fixture(scope="module")
def spec20(gs20):
    return lowest_eigenpairs(LinearizedOperator(gs20), k=4)


def test_operator_kind_validation(gs_small):
    with pytest.raises(ValueError):
        LinearizedOperator(gs_small, kind="X")


def test_apply_operator_grid_mismatch(gs_small, gs_mid):
    op = LinearizedOperator(gs_small)
    with pytest.raises(ValueError):
        apply_operator(op, gs_mid.Q)


def test_L_identities(gs20):
    op = LinearizedOperator(gs20)
    g = gs20.grid
    q = gs20.values
    assert g.norm(op.apply(q) + 2 * q ** 3) / g.norm(q) < 1e-8
    lq = g.scaling(q)
    assert g.norm(op.apply(lq) + 2 * q) / g.norm(q) < 1e-3


def test_spectrum_structure(spec20):
    ev = spec20.eigenvalues
    assert np.sum(ev < -1e-6) == 1
    assert np.sum(np.abs(ev) <= 1e-6) == 2
    assert ev[3] > 0
    assert max(spec20.kernel_residuals) < 1e-6


def test_eigenfunction_decays(spec20):
    y = spec20.Y.values
    g = spec20.Y.grid
    radii = np.arange(4.0, 14.0, 1.0)
    peaks = np.array([np.max(np.abs(y[g.R >= r])) for r in radii])
    slope = np.polyfit(radii, np.log(peaks), 1)[0]
    assert slope < -0.9


def test_mu0_matches_dense_oracle(spec20):
    ref = golden("dense_mu0", lambda: {"mu0": dense_mu0()[0], "grid": [64, 12.0]})
    assert abs(spec20.mu0 - ref["mu0"]) / ref["mu0"] < 0.02


def test_mu0_stable_between_resolutions(spec20):
    coarse = lowest_eigenpairs(LinearizedOperator(cached_ground_state(Grid2D.square(128, 20.0))), k=2)
    assert abs(coarse.mu0 - spec20.mu0) / spec20.mu0 < 0.02


def test_coercivity_constants(gs20, spec20):
    g = gs20.grid
    q = gs20.values
    d1, d2 = g.grad(q)
    op = LinearizedOperator(gs20)
    assert coercivity_constant(op, [spec20.Y.values, d1, d2]) > 0
    assert coercivity_constant(op, [q ** 3, d1, d2]) > 0
    assert coercivity_constant(LinearizedOperator(gs20, kind="H"), [q, d1, d2]) > 0
    assert coercivity_constant(op, []) < 0
    with pytest.raises(ValueError):
        coercivity_constant(op, [d1, 2 * d1])


def test_invert_L(gs20):
    g = gs20.grid
    q = gs20.values
    op = LinearizedOperator(gs20)
    assert np.array_equal(invert_L(op, np.zeros(g.shape)), np.zeros(g.shape))
    f = invert_L(op, -2 * q ** 3)
    assert g.norm(f - q) / g.norm(q) < 1e-7
    lq = invert_L(op, RealField2D(g, -2 * q))
    assert g.norm(op.apply(lq) + 2 * q) / g.norm(q) < 1e-8
    with pytest.raises(ValueError):
        invert_L(op, g.d1(q))
    with pytest.raises(ValueError):
        invert_L(LinearizedOperator(gs20, kind="H"), q)
