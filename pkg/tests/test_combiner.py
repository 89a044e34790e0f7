import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st
from scipy import stats

from dvcm.combiner import (
    ALL_METHODS,
    PIE_LEVELS,
    SubsetMoments,
    amc_combine,
    block_columns,
    cmc_combine,
    combine,
    combine_matrix,
    dpmc_combine,
    pie_combine,
    sqrtm_psd,
    subset_moments,
    tau2_from_log_draws,
    _barycenter_fixed_point,
    wasp_barycenter,
)
from dvcm.errors import ConvergenceError
from dvcm.sampler import DrawStore


def random_spd(rng, d):
    A = rng.standard_normal((d, d))
    return A @ A.T + 0.5 * np.eye(d)


def correlated_draws(rng, k, T, d):
    out = []
    for _ in range(k):
        L = np.linalg.cholesky(random_spd(rng, d))
        out.append(rng.standard_normal(d) + rng.standard_normal((T, d)) @ L.T)
    return out


class TestMoments:
    def test_identical_draws(self):
        m = subset_moments(np.ones((5, 3)))
        np.testing.assert_array_equal(m.covariance, np.zeros((3, 3)))

    def test_divisor_T(self):
        m = subset_moments(np.array([0.0, 2.0]))
        assert m.mean[0] == 1.0
        assert m.covariance[0, 0] == 1.0

    def test_monte_carlo(self):
        x = np.random.default_rng(0).normal(3.0, 2.0, 1000)
        m = subset_moments(x)
        assert abs(m.mean[0] - 3.0) < 3 * 2.0 / np.sqrt(1000)
        assert abs(m.covariance[0, 0] - 4.0) < 3 * 4.0 * np.sqrt(2.0 / 1000)

    def test_needs_two_draws(self):
        with pytest.raises(ValueError):
            subset_moments(np.zeros((1, 2)))

    def test_sqrtm(self):
        S = random_spd(np.random.default_rng(1), 4)
        r = sqrtm_psd(S)
        np.testing.assert_allclose(r @ r, S, atol=1e-10)
        np.testing.assert_allclose(sqrtm_psd(S, inverse=True) @ r, np.eye(4), atol=1e-10)


class TestIdentityAtOneSubset:
    @pytest.mark.parametrize("method", ["amc", "dpmc", "wasp", "cmc"])
    def test_draw_methods(self, method):
        x = correlated_draws(np.random.default_rng(2), 1, 200, 3)
        out = combine_matrix(x, method)
        np.testing.assert_allclose(out.draws, x[0], atol=1e-10)

    def test_pie(self):
        x = correlated_draws(np.random.default_rng(3), 1, 200, 3)
        out = pie_combine(x)
        np.testing.assert_allclose(out.quantiles, np.quantile(x[0], PIE_LEVELS, axis=0), atol=1e-12)


class TestAmc:
    def test_scalar_case(self):
        m1 = SubsetMoments(np.array([0.0]), np.array([[1.0]]), 2)
        m2 = SubsetMoments(np.array([4.0]), np.array([[9.0]]), 2)
        out = amc_combine([m1, m2], [np.array([[1.0], [-1.0]]), np.array([[7.0], [1.0]])])
        assert out.combined_mean[0] == pytest.approx(2.0)
        assert out.combined_cov[0, 0] == pytest.approx(5.0)
        assert out.draws[0, 0] == pytest.approx(2.0 + np.sqrt(5.0))

    @settings(max_examples=15, deadline=None)
    @given(st.integers(0, 10_000), st.integers(2, 5), st.integers(1, 6))
    def test_pushforward_moments(self, seed, k, d):
        draws = correlated_draws(np.random.default_rng(seed), k, 300, d)
        moms = [subset_moments(x) for x in draws]
        out = amc_combine(moms, draws)
        got = subset_moments(out.draws)
        np.testing.assert_allclose(got.mean, np.mean([m.mean for m in moms], axis=0), atol=1e-10)
        np.testing.assert_allclose(got.covariance, np.mean([m.covariance for m in moms], axis=0), atol=1e-8)

    def test_permutation_equivariance(self):
        rng = np.random.default_rng(4)
        draws = correlated_draws(rng, 3, 100, 4)
        perm = rng.permutation(4)
        a = combine_matrix(draws, "amc").draws[:, perm]
        b = combine_matrix([x[:, perm] for x in draws], "amc").draws
        np.testing.assert_allclose(a, b, atol=1e-10)


class TestDpmc:
    def test_scalar_case(self):
        m1 = SubsetMoments(np.array([0.0]), np.array([[1.0]]), 2)
        m2 = SubsetMoments(np.array([4.0]), np.array([[9.0]]), 2)
        out = dpmc_combine([m1, m2], [np.array([[1.0], [-1.0]]), np.array([[7.0], [1.0]])])
        assert out.draws[0, 0] == pytest.approx(3.0)

    def test_equal_covariances_match_amc(self):
        rng = np.random.default_rng(5)
        base = rng.standard_normal((400, 3)) @ np.linalg.cholesky(random_spd(rng, 3)).T
        draws = [base + rng.standard_normal(3), base - 2.0]
        a = subset_moments(combine_matrix(draws, "amc").draws)
        b = subset_moments(combine_matrix(draws, "dpmc").draws)
        np.testing.assert_allclose(a.mean, b.mean, atol=1e-8)
        np.testing.assert_allclose(a.covariance, b.covariance, atol=1e-8)

    def test_mean_is_average(self):
        draws = correlated_draws(np.random.default_rng(6), 4, 250, 5)
        got = subset_moments(combine_matrix(draws, "dpmc").draws).mean
        np.testing.assert_allclose(got, np.mean([x.mean(0) for x in draws], axis=0), atol=1e-10)


class TestWasp:
    def test_equal_matrices_fixed_point(self):
        S = random_spd(np.random.default_rng(7), 3)
        bary, res = wasp_barycenter([S, S, S])
        np.testing.assert_allclose(bary, S, atol=1e-10)
        assert len(res) == 1

    def test_one_dimensional(self):
        bary, _ = wasp_barycenter([np.array([[1.0]]), np.array([[9.0]])])
        assert bary[0, 0] == pytest.approx(4.0, abs=1e-8)

    def test_commuting(self):
        bary, _ = wasp_barycenter([np.diag([1.0, 4.0]), np.diag([9.0, 16.0])])
        np.testing.assert_allclose(bary, np.diag([4.0, 9.0]), atol=1e-6)

    @settings(max_examples=10, deadline=None)
    @given(st.integers(0, 10_000), st.integers(2, 20), st.integers(2, 5))
    def test_converges_monotonically(self, seed, d, k):
        rng = np.random.default_rng(seed)
        covs = [random_spd(rng, d) for _ in range(k)]
        bary, res = wasp_barycenter(covs)
        assert len(res) <= 100
        assert all(b <= a * (1 + 1e-6) + 1e-12 for a, b in zip(res, res[1:]))
        # fixed point equation holds at the result
        r = sqrtm_psd(bary)
        M = np.mean([sqrtm_psd(r @ c @ r) for c in covs], axis=0)
        np.testing.assert_allclose(M, bary, atol=1e-6 * np.abs(bary).max())

    def test_near_singular_inputs_use_ridge(self):
        rng = np.random.default_rng(3)
        d = 60
        Q, _ = np.linalg.qr(rng.standard_normal((d, d)))
        shape = (Q * np.logspace(0, -7, d)) @ Q.T
        covs = [np.cov(rng.standard_normal((120, d)) @ shape * (1 + 0.3 * j), rowvar=False, bias=True)
                for j in range(4)]
        _, _, plain_ok = _barycenter_fixed_point(covs, 1e-8, 100)
        assert not plain_ok
        bary, res = wasp_barycenter(covs)
        assert res[-1] <= 1e-8
        amc = np.mean(covs, axis=0)
        assert np.linalg.norm(bary - amc) < 0.5 * np.linalg.norm(amc)
        np.testing.assert_allclose(np.diag(bary), np.diag(amc), rtol=0.5)

    def test_iteration_cap(self):
        rng = np.random.default_rng(8)
        with pytest.raises(ConvergenceError):
            wasp_barycenter([random_spd(rng, 4) for _ in range(3)], tol=0.0, max_iter=3)

    def test_mean_is_average(self):
        draws = correlated_draws(np.random.default_rng(9), 3, 250, 4)
        got = subset_moments(combine_matrix(draws, "wasp").draws).mean
        np.testing.assert_allclose(got, np.mean([x.mean(0) for x in draws], axis=0), atol=1e-10)


class TestCmc:
    def test_scalar_weights(self):
        m1 = SubsetMoments(np.array([0.0]), np.array([[1.0]]), 2)
        m2 = SubsetMoments(np.array([0.0]), np.array([[9.0]]), 2)
        out = cmc_combine([m1, m2], [np.array([[1.0], [0.0]]), np.array([[4.0], [0.0]])])
        assert out.draws[0, 0] == pytest.approx(1.3)
        assert out.draws[1, 0] == pytest.approx(0.0)

    def test_equal_covariance_is_plain_average(self):
        rng = np.random.default_rng(10)
        base = rng.standard_normal((300, 2))
        draws = [base + 1.0, base[::-1].copy()]
        out = combine_matrix(draws, "cmc")
        np.testing.assert_allclose(out.draws, 0.5 * (draws[0] + draws[1]), atol=1e-10)

    def test_outputs_T_draws(self):
        draws = correlated_draws(np.random.default_rng(11), 3, 120, 2)
        assert combine_matrix(draws, "cmc").draws.shape == (120, 2)


class TestPie:
    def test_location_shift(self):
        x = np.random.default_rng(12).standard_normal((1001, 1))
        out = pie_combine([x, x + 3.0])
        med = out.quantiles[list(PIE_LEVELS).index(0.5)]
        assert med[0] == pytest.approx(np.median(x) + 1.5, abs=1e-12)

    def test_gaussian_quantiles(self):
        rng = np.random.default_rng(13)
        out = pie_combine([rng.normal(0, 1, (10_000, 1)), rng.normal(2, 1, (10_000, 1))])
        lo = out.quantiles[list(PIE_LEVELS).index(0.025), 0]
        hi = out.quantiles[list(PIE_LEVELS).index(0.975), 0]
        assert lo == pytest.approx(1 - stats.norm.ppf(0.975), abs=0.05)
        assert hi == pytest.approx(1 + stats.norm.ppf(0.975), abs=0.05)

    def test_grid(self):
        assert PIE_LEVELS[0] == 0.005 and PIE_LEVELS[-1] == 0.995 and PIE_LEVELS.size == 199

    def test_empty(self):
        with pytest.raises(ValueError):
            pie_combine([])


def test_tau2_from_log():
    np.testing.assert_array_equal(tau2_from_log_draws([0.0]), [1.0])
    np.testing.assert_allclose(tau2_from_log_draws(np.full(4, np.log(0.1))), 0.1, rtol=1e-15)
    with pytest.raises(ValueError):
        tau2_from_log_draws([np.nan])


def make_store(rng, T=80, n_test=3, p=2, s=2, shift=0.0):
    beta = rng.standard_normal((T, n_test * p)) + shift
    y = rng.standard_normal((T, n_test * s)) + shift
    return DrawStore(beta, y, rng.standard_normal(T) - 2.0, rng.random((n_test, 2)), [s] * n_test, p)


class TestStoreDriver:
    @pytest.mark.parametrize("method", ALL_METHODS)
    def test_single_store_identity(self, method):
        store = make_store(np.random.default_rng(14))
        out = combine([store], method)
        if method == "pie":
            np.testing.assert_array_equal(out.draws, np.quantile(store.matrix(), PIE_LEVELS, axis=0))
        else:
            np.testing.assert_array_equal(out.draws, store.matrix())

    @pytest.mark.parametrize("policy", ["joint", "quantity", "point"])
    def test_policies_preserve_mean(self, policy):
        rng = np.random.default_rng(15)
        test_pts = rng.random((3, 2))
        stores = []
        for j in range(3):
            s = make_store(rng, shift=j)
            s.test_points = test_pts
            stores.append(s)
        out = combine(stores, "amc", policy)
        np.testing.assert_allclose(out.draws.mean(0), np.mean([s.matrix().mean(0) for s in stores], axis=0),
                                   atol=1e-10)

    def test_block_columns_partition(self):
        for policy in ("joint", "quantity", "point"):
            cols = np.concatenate(block_columns(3, 2, [2, 1, 2], 100, policy))
            np.testing.assert_array_equal(np.sort(cols), np.arange(3 * 2 + 5 + 1))

    def test_auto_policy(self):
        assert len(block_columns(3, 2, [2, 2, 2], 100, "auto")) == 2
        assert len(block_columns(100, 3, [2] * 100, 100, "auto")) == 101

    def test_mismatched_test_points(self):
        rng = np.random.default_rng(16)
        with pytest.raises(ValueError):
            combine([make_store(rng), make_store(rng)], "amc")
