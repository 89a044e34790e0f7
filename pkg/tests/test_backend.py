import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from dvcm import _backend, _numpy_core

compiled = pytest.importorskip("dvcm._core")


def rand(seed, *shape):
    return np.random.default_rng(seed).random(shape)


class TestCompiledMatchesNumpy:
    @settings(max_examples=20, deadline=None)
    @given(st.integers(0, 10_000), st.integers(1, 30), st.integers(1, 30), st.integers(1, 3))
    def test_pairwise_distance(self, seed, n, m, d):
        a, b = rand(seed, n, d), rand(seed + 1, m, d)
        np.testing.assert_allclose(compiled.pairwise_distance(a, b), _numpy_core.pairwise_distance(a, b), atol=1e-14)

    def test_exp_corr(self):
        dist = _numpy_core.pairwise_distance(rand(0, 20, 2), rand(1, 15, 2))
        np.testing.assert_allclose(compiled.exp_corr(dist, 2.5), _numpy_core.exp_corr(dist, 2.5), rtol=1e-14)

    def test_gneiting_corr(self):
        pts = rand(2, 12, 3)
        sd = _numpy_core.pairwise_distance(pts[:, :2], pts[:, :2])
        tsq = (pts[:, 2:] - pts[:, 2:].T) ** 2
        np.testing.assert_allclose(
            compiled.gneiting_corr(sd, tsq, 1.5, 2.0, 0.3),
            _numpy_core.gneiting_corr(sd, tsq, 1.5, 2.0, 0.3),
            rtol=1e-13,
        )

    @pytest.mark.parametrize("q", [1, 2, 3])
    def test_kron_design(self, q):
        X, nu = rand(3, 10, 4), rand(4, 10, q)
        np.testing.assert_allclose(compiled.kron_design(X, nu, q), _numpy_core.kron_design(X, nu, q), rtol=1e-15)


def test_backend_selection():
    assert _backend.BACKEND in ("cython", "numpy")
    assert _backend.core in (compiled, _numpy_core)


def test_exponential_kernels_use_vectorised_numpy():
    assert _backend.exp_corr is _numpy_core.exp_corr
    assert _backend.gneiting_corr is _numpy_core.gneiting_corr
