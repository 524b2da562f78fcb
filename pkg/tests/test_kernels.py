"""The compiled and numpy kernels must agree bit for bit."""

import os

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from stochshape import _backend, _pykernels
from stochshape.harmonics import real_sh_matrix

from conftest import legendre_closed_form

_ck = pytest.importorskip("stochshape._ckernels")


@pytest.mark.parametrize("lmax", [0, 1, 2, 7, 25, 64])
def test_legendre_tables_bitwise_equal(lmax):
    x = np.cos(np.linspace(0.0, np.pi, 101))
    np.testing.assert_array_equal(_ck.legendre_table(lmax, x), _pykernels.legendre_table(lmax, x))


def test_legendre_table_against_closed_form():
    x = np.linspace(-0.95, 0.95, 9)
    table = _pykernels.legendre_table(6, x)
    from math import factorial, pi, sqrt

    for l in range(7):
        for m in range(l + 1):
            norm = sqrt((2 * l + 1) / (4 * pi) * factorial(l - m) / factorial(l + m))
            expected = [norm * legendre_closed_form(l, m, xi) for xi in x]
            np.testing.assert_allclose(table[:, l * (l + 1) // 2 + m], expected, rtol=1e-12, atol=1e-14)


@settings(max_examples=40, deadline=None)
@given(
    seed=st.integers(0, 2**32 - 1),
    b0=st.floats(-2, 2), b1=st.floats(-3, 3), s0=st.floats(0, 2), s1=st.floats(-1, 1),
    steps=st.integers(1, 60), paths=st.integers(1, 8),
)
def test_em_affine_bitwise_equal(seed, b0, b1, s0, s1, steps, paths):
    rng = np.random.default_rng(seed)
    x0 = rng.standard_normal(paths)
    dt = 1.0 / steps
    dw = rng.standard_normal((paths, steps)) * np.sqrt(dt)
    got_c, bad_c = _ck.em_affine(x0, dw, dt, b0, b1, s0, s1)
    got_p, bad_p = _pykernels.em_affine(x0, dw, dt, b0, b1, s0, s1)
    np.testing.assert_array_equal(got_c, got_p)
    assert bad_c == bad_p == -1


def test_em_affine_non_finite_paths_agree():
    x0 = np.array([1.0, 1e-300, -2.0, 0.0])
    dw = np.ones((4, 12)) * 0.1
    out = []
    for mod in (_ck, _pykernels):
        out.append(mod.em_affine(x0, dw, 0.5, 0.0, 1e100, 0.0, 0.0))
    (pc, bc), (pp, bp) = out
    np.testing.assert_array_equal(pc, pp)
    assert bc == bp == 4  # x0=1 overflows on step 4: (5e99)^4 > 1.8e308
    assert np.isinf(pc[0, -1]) and pc[3, -1] == 0.0


def test_backend_selection_and_fallback(backend):
    assert _backend.kernels is (_pykernels if backend == "python" else _ck)
    y = real_sh_matrix(5, np.array([0.3, 1.2]), np.array([0.1, 4.0]))
    assert y.shape == (2, 36) and np.all(np.isfinite(y))


@pytest.mark.skipif(os.environ.get("STOCHSHAPE_BACKEND", "").lower() == "python", reason="fallback forced")
def test_default_backend_is_compiled():
    assert _backend.BACKEND == "cython"
