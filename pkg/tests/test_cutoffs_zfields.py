import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from zkblowup.cutoffs import ScaledCutoff, chi, sigma
from zkblowup.spectral_core import Grid2D
from zkblowup.zfields import ZField, tail_switch


def test_chi_pinned_regions():
    y = np.array([-5.0, -2.0, -1.0, 0.0, 3.0])
    assert np.array_equal(chi(y), [0.0, 0.0, 1.0, 1.0, 1.0])
    assert chi(np.array([-1.5]))[0] == pytest.approx(0.5)
    with pytest.raises(ValueError):
        chi(y, 4)


@pytest.mark.parametrize("d", [1, 2, 3])
def test_chi_derivatives_match_differences(d):
    y = np.linspace(-1.97, -1.03, 41)
    h = 1e-5
    fd = (chi(y + h, d - 1) - chi(y - h, d - 1)) / (2 * h)
    assert np.max(np.abs(fd - chi(y, d))) < 1e-5 * max(1.0, np.max(np.abs(chi(y, d))))


@pytest.mark.parametrize("d", [1, 2, 3])
def test_sigma_derivatives_match_differences(d):
    y = np.linspace(-1.97, 1.97, 81)
    h = 1e-5
    fd = (sigma(y + h, d - 1) - sigma(y - h, d - 1)) / (2 * h)
    assert np.max(np.abs(fd - sigma(y, d))) < 1e-5 * max(1.0, np.max(np.abs(sigma(y, d))))


def test_sigma_bump():
    assert np.array_equal(sigma(np.array([-3.0, -1.0, 0.0, 1.0, 2.5])), [0, 1, 1, 1, 0])


def test_scaled_cutoff():
    c = ScaledCutoff(0.1)
    assert c.left_edge == pytest.approx(-20.0)
    y = np.linspace(-25, 5, 31)
    assert np.allclose(c(y, 1), 0.1 * chi(0.1 * y, 1))


@settings(max_examples=50, deadline=None)
@given(st.lists(st.floats(-3, 1), min_size=2, max_size=20))
def test_chi_is_monotone_and_bounded(ys):
    y = np.sort(np.array(ys))
    v = chi(y)
    assert np.all(np.diff(v) >= 0)
    assert np.all((v >= 0) & (v <= 1))
    assert np.all(chi(y, 1) >= 0)


@settings(max_examples=50, deadline=None)
@given(st.floats(-2.5, 2.5))
def test_sigma_is_even(y):
    assert sigma(np.array([y]))[0] == pytest.approx(sigma(np.array([-y]))[0], abs=1e-15)


@pytest.fixture(scope="module")
def zgrid():
    return Grid2D(256, 32, 32.0, 4.0)


def _tail_field(g, coefs):
    prof = np.exp(-g.x2 ** 2)
    return ZField(g, np.exp(-g.R ** 2), np.array([c * prof for c in coefs]))


def test_tail_switch_limits():
    assert tail_switch(np.array([-40.0]))[0] == pytest.approx(1.0)
    assert tail_switch(np.array([20.0]))[0] == pytest.approx(0.0, abs=1e-15)
    with pytest.raises(ValueError):
        tail_switch(0.0, 5)


def test_d1_matches_polynomial_tail(zgrid):
    g = zgrid
    f = _tail_field(g, [1.0, 0.5])
    d = f.d1()
    # far left the field is (1 + 0.5 y1) h(y2), so d1 f = 0.5 h(y2)
    i = np.argmin(np.abs(g.x1 + 25.0))
    assert np.max(np.abs(d.full()[i] - 0.5 * np.exp(-g.x2 ** 2))) < 1e-10
    assert d.degree == 0


def test_integrate_right_inverts_d1(zgrid):
    g = zgrid
    f = _tail_field(g, [0.3])
    back = f.d1().integrate_right()
    # int_y^inf d1 f = -f since f vanishes to the right
    assert np.max(np.abs((back + f).full())) < 1e-8


def test_algebra_and_products(zgrid):
    g = zgrid
    a = _tail_field(g, [1.0])
    b = _tail_field(g, [0.0, 2.0])
    s = a + b
    assert np.allclose(s.full(), a.full() + b.full())
    assert np.allclose((a - b).full(), a.full() - b.full())
    assert np.allclose((3.0 * a).full(), 3.0 * a.full())
    assert np.allclose((a / 2.0).full(), 0.5 * a.full())
    assert np.allclose((a * b).full(), a.full() * b.full(), atol=1e-10)
    assert (a * b).degree == 1
    assert np.allclose((2.0 - a).full(), 2.0 - a.full())


def test_evaluate_on_extension(zgrid):
    from zkblowup.profiles import extended_grid
    g = zgrid
    f = _tail_field(g, [1.0, 0.1])
    ext = extended_grid(g, 64.0)
    v = f.evaluate(ext)
    i = np.argmin(np.abs(ext.x1 + 60.0))
    assert np.max(np.abs(v[i] - (1.0 + 0.1 * ext.x1[i]) * np.exp(-g.x2 ** 2))) < 1e-10
    with pytest.raises(ValueError):
        f.evaluate(Grid2D(256, 64, 32.0, 4.0))


def test_parity_tools(zgrid):
    g = zgrid
    f = ZField(g, np.exp(-(g.Y1 ** 2 + (g.Y2 - 0.5) ** 2)))
    assert f.reflect_error() > 0.1
    assert f.symmetrize_y2().reflect_error() < 1e-15
    assert ZField(g, None, np.zeros((2, g.n2))).trimmed().degree == -1


@settings(max_examples=20, deadline=None)
@given(st.floats(-2, 2), st.floats(-2, 2), st.floats(-1, 1))
def test_zfield_linearity(a, b, t):
    g = Grid2D(64, 16, 16.0, 4.0)
    f = _tail_field(g, [1.0, t])
    h = _tail_field(g, [t])
    lhs = (a * f + b * h).d1()
    rhs = a * f.d1() + b * h.d1()
    assert np.allclose(lhs.full(), rhs.full(), atol=1e-12)
    assert np.allclose((a * f + b * h).scaling().full(), (a * f.scaling() + b * h.scaling()).full(), atol=1e-10)
