import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from dvcm.model import (
    Dataset,
    IndexPoint,
    ModelSpec,
    Observation,
    ParamState,
    beta_at_points,
    beta_from_state,
    build_design_W,
    mean_response,
)
from dvcm.simgen import generate_simulation


def random_dataset(rng, n=5, p=3, q=2, sizes=None, d=2):
    sizes = sizes if sizes is not None else rng.integers(1, 4, n)
    rows = int(np.sum(sizes))
    return Dataset(rng.random((n, d)), rng.standard_normal(rows), rng.standard_normal((rows, p)), sizes, q=q)


def loop_design(data, nu):
    """Assemble [X | nu^T kron Z] entry by entry."""
    p, q = data.p, data.q
    W = np.zeros((data.n_rows, p + q * q))
    for i in range(data.n):
        for r in range(data.offsets[i], data.offsets[i + 1]):
            for j in range(p):
                W[r, j] = data.X[r, j]
            for c in range(q):
                for b in range(q):
                    W[r, p + c * q + b] = nu[i, c] * data.X[r, b]
    return W


class TestTypes:
    def test_index_point_range(self):
        with pytest.raises(ValueError):
            IndexPoint((0.2, 1.5))
        assert IndexPoint((0.0, 1.0)).d == 2

    def test_observation_shapes(self):
        with pytest.raises(ValueError):
            Observation(IndexPoint((0.5,)), np.zeros(2), np.zeros((3, 2)))

    def test_dataset_round_trip_observations(self):
        rng = np.random.default_rng(0)
        data = random_dataset(rng)
        again = Dataset.from_observations(data.observations, q=data.q)
        np.testing.assert_array_equal(again.X, data.X)
        np.testing.assert_array_equal(again.y, data.y)
        np.testing.assert_array_equal(again.sizes, data.sizes)

    def test_empty_dataset(self):
        with pytest.raises(ValueError, match="no observations"):
            Dataset.from_observations([])

    def test_subset_keeps_rows_together(self):
        rng = np.random.default_rng(1)
        data = random_dataset(rng, n=6)
        sub = data.subset([4, 1])
        np.testing.assert_array_equal(sub.y[: data.sizes[4]], data.y[data.rows_of(4)])
        np.testing.assert_array_equal(sub.ids, [4, 1])

    def test_model_spec_validation(self):
        with pytest.raises(ValueError):
            ModelSpec.build(2, 3, 2)
        with pytest.raises(ValueError):
            ModelSpec.build(3, 3, 1, family="gneiting")
        with pytest.raises(ValueError):
            ModelSpec.build(3, 3, 2, delta=0.5)
        assert ModelSpec.build(3, 2, 2).n_coef == 7

    def test_param_state_vec_is_column_major(self):
        G = np.array([[1.0, 2.0], [3.0, 4.0]])
        s = ParamState([0.0, 0.0, 9.0], G, 1.0)
        np.testing.assert_array_equal(s.b, [0, 0, 9, 1, 3, 2, 4])
        a, G2 = ParamState.split_b(s.b, 3, 2)
        np.testing.assert_array_equal(G2, G)

    def test_tau2_positive(self):
        with pytest.raises(ValueError):
            ParamState([0.0], [[1.0]], 0.0)


class TestDesign:
    def test_zero_latents(self):
        data = Dataset([[0.1]], [1.0, 2.0], [[2.0], [5.0]], [2], q=1)
        W = build_design_W(data, np.zeros((1, 1)))
        np.testing.assert_array_equal(W, [[2.0, 0.0], [5.0, 0.0]])

    def test_scalar(self):
        data = Dataset([[0.1]], [1.0], [[2.0]], [1], q=1)
        np.testing.assert_array_equal(build_design_W(data, [[3.0]]), [[2.0, 6.0]])

    def test_matches_loop(self):
        rng = np.random.default_rng(2)
        data = random_dataset(rng, n=4, p=3, q=2, sizes=np.full(4, 2))
        nu = rng.standard_normal((4, 2))
        np.testing.assert_array_equal(build_design_W(data, nu), loop_design(data, nu))

    def test_accepts_observation_list(self):
        rng = np.random.default_rng(3)
        data = random_dataset(rng, n=3, p=2, q=2)
        nu = rng.standard_normal((3, 2))
        np.testing.assert_array_equal(build_design_W(data.observations, nu), build_design_W(data, nu))

    def test_shape_mismatch(self):
        data = random_dataset(np.random.default_rng(4), n=3)
        with pytest.raises(ValueError):
            build_design_W(data, np.zeros((2, 2)))

    @settings(max_examples=30)
    @given(st.integers(0, 100_000), st.integers(1, 4), st.integers(1, 4))
    def test_W_b_equals_model_mean(self, seed, p, q):
        q = min(p, q)
        rng = np.random.default_rng(seed)
        data = random_dataset(rng, n=5, p=p, q=q)
        nu = rng.standard_normal((5, q))
        alpha, Gamma = rng.standard_normal(p), rng.standard_normal((q, q))
        b = ParamState(alpha, Gamma, 1.0).b
        direct = data.X @ alpha
        for a in range(q):
            direct += (data.Z @ Gamma[:, a]) * nu[data.row_obs, a]
        np.testing.assert_allclose(build_design_W(data, nu) @ b, direct, atol=1e-12)


class TestBeta:
    def test_zero_latents_give_alpha(self):
        alpha = np.array([1.0, -2.0, 3.0])
        np.testing.assert_array_equal(beta_from_state(alpha, np.eye(2), [0.0, 0.0]), alpha)

    def test_identity_gamma(self):
        beta = beta_from_state([0.0, 0.0, 5.0], np.eye(2), [0.3, -0.7])
        np.testing.assert_array_equal(beta, [0.3, -0.7, 5.0])

    def test_affine_slope_is_gamma(self):
        rng = np.random.default_rng(5)
        alpha, Gamma, nu = rng.standard_normal(3), rng.standard_normal((3, 3)), rng.standard_normal(3)
        h = 0.5
        for c in range(3):
            e = np.zeros(3)
            e[c] = h
            slope = (beta_from_state(alpha, Gamma, nu + e) - beta_from_state(alpha, Gamma, nu)) / h
            np.testing.assert_allclose(slope, Gamma[:, c], atol=1e-10)

    def test_simulation_round_trip(self):
        train, test, truth = generate_simulation(20, 5, seed=11)
        for i in range(25):
            np.testing.assert_allclose(
                beta_from_state(truth.alpha0, truth.Gamma0, truth.nu0[i]), truth.beta0[i], atol=1e-12
            )

    def test_vectorized_matches_scalar(self):
        rng = np.random.default_rng(6)
        alpha, Gamma, nu = rng.standard_normal(4), rng.standard_normal((2, 2)), rng.standard_normal((3, 2))
        rows = np.array([beta_from_state(alpha, Gamma, v) for v in nu])
        np.testing.assert_allclose(beta_at_points(alpha, Gamma, nu), rows, atol=1e-15)

    def test_dimension_mismatch(self):
        with pytest.raises(ValueError):
            beta_from_state([1.0], np.eye(2), [0.0, 0.0])


class TestMeanResponse:
    def test_zero_beta(self):
        np.testing.assert_array_equal(mean_response(np.ones((2, 3)), np.zeros(3)), [0.0, 0.0])

    def test_identity_rows(self):
        np.testing.assert_array_equal(mean_response(np.eye(3), [4.0, 5.0, 6.0]), [4.0, 5.0, 6.0])

    def test_matches_loop(self):
        rng = np.random.default_rng(7)
        X, beta = rng.standard_normal((2, 3)), rng.standard_normal(3)
        loop = [sum(X[i, j] * beta[j] for j in range(3)) for i in range(2)]
        np.testing.assert_allclose(mean_response(X, beta), loop, atol=1e-15)

    def test_mismatch(self):
        with pytest.raises(ValueError):
            mean_response(np.ones((2, 3)), np.zeros(2))
