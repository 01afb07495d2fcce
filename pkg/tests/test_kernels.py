import os
import subprocess
import sys

import numpy as np
import pytest
from hypothesis import given, settings, strategies as st
from hypothesis.extra.numpy import arrays

from zkblowup import _kernels

ARGS = {
    "cube": 1,
    "weighted_dot": 3,
    "weighted_grad_sq": 3,
    "quartic_remainder": 3,
    "cubic_remainder": 2,
}

finite = st.floats(-1e3, 1e3, allow_nan=False)


@pytest.mark.parametrize("name", sorted(ARGS))
def test_fast_path_matches_numpy(name, rng):
    argv = [np.ascontiguousarray(rng.standard_normal((33, 17))) for _ in range(ARGS[name])]
    ref = np.asarray(_kernels.numpy_impl[name](*argv))
    out = np.asarray(getattr(_kernels, name)(*argv))
    assert np.allclose(out, ref, rtol=1e-12, atol=1e-12 * np.max(np.abs(ref)))


@settings(max_examples=50, deadline=None)
@given(arrays(np.float64, (8, 8), elements=finite), arrays(np.float64, (8, 8), elements=st.floats(-1e-3, 1e-3)))
def test_remainders_agree_with_direct_expansion(base, eps):
    w = np.ones_like(base)
    direct = np.sum((base + eps) ** 4 - base ** 4 - 4 * base ** 3 * eps)
    rem = _kernels.quartic_remainder(base, eps, w)
    assert rem == pytest.approx(direct, rel=1e-6, abs=1e-9 * (1 + np.sum(base ** 4)))
    cub = _kernels.cubic_remainder(base, eps)
    assert np.allclose(cub, (base + eps) ** 3 - base ** 3, rtol=1e-8, atol=1e-7 * (1 + np.max(np.abs(base))) ** 3)


def test_quartic_remainder_is_small_for_small_eps():
    base = np.ones((4, 4))
    eps = np.full((4, 4), 1e-9)
    # a direct (W + eps)^4 - W^4 - 4 W^3 eps would lose everything to cancellation here
    assert _kernels.quartic_remainder(base, eps, np.ones_like(base)) == pytest.approx(16 * 6e-18, rel=1e-6)


def test_numpy_fallback_subprocess():
    env = dict(os.environ, ZKBLOWUP_NO_NUMBA="1")
    code = ("import numpy as np; from zkblowup import _kernels as k; "
            "assert not k.USE_NUMBA; a = np.arange(6.0).reshape(2, 3); "
            "print(k.weighted_dot(a, a, np.ones_like(a)), float(k.cube(a).sum()))")
    out = subprocess.run([sys.executable, "-c", code], env=env, capture_output=True, text=True, timeout=120)
    assert out.returncode == 0, out.stderr
    assert out.stdout.split() == ["55.0", "225.0"]
