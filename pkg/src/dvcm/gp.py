"""Covariance operators for the latent processes of one chain.

A :class:`Geometry` fixes the training and test points (and inducing points
when FITC is on) and caches their lag matrices. ``geometry.operator(kernel)``
returns a dense or FITC operator exposing what the sampler needs: log
determinant, inverse quadratic form, prior draws, matrix-vector products and
predictive draws at the test points.
"""

from __future__ import annotations

from functools import cached_property

import numpy as np
from scipy.linalg import cho_solve, solve_triangular

from . import _seeding
from .kernels import (
    CorrMatrix,
    FitcFactor,
    JitterPolicy,
    KernelParams,
    Lags,
    as_coords,
    cholesky_with_jitter,
    corr_from_lags,
    select_inducing,
)

LOG_2PI = float(np.log(2.0 * np.pi))

# floor on FITC diagonal corrections of non-inducing points; keeps duplicated
# index points from producing a zero conditional variance
FITC_DIAG_FLOOR = 1e-8


class DenseOperator:
    """Exact correlation matrix ``R`` (plus any jitter its factorization needed)."""

    kind = "dense"

    def __init__(self, geometry: "Geometry", kernel: KernelParams):
        self.geometry = geometry
        self.kernel = kernel
        entries = corr_from_lags(geometry.train_lags, kernel)
        chol, jitter = cholesky_with_jitter(entries, geometry.jitter_policy)
        self.corr = CorrMatrix(entries, jitter, chol)
        self.chol = chol
        self.matrix = entries + jitter * np.eye(entries.shape[0]) if jitter else entries
        self.logdet = 2.0 * float(np.sum(np.log(np.diag(chol))))

    @property
    def m(self) -> int:
        return self.matrix.shape[0]

    @property
    def noise_dim(self) -> int:
        return self.m

    def inv_quad(self, v) -> float:
        w = solve_triangular(self.chol, v, lower=True, check_finite=False)
        return float(w @ w)

    def log_density(self, v) -> float:
        return -0.5 * (self.m * LOG_2PI + self.logdet + self.inv_quad(v))

    def prior_draw(self, noise) -> np.ndarray:
        return self.chol @ noise

    def matvec(self, v) -> np.ndarray:
        return self.matrix @ v

    def dense(self) -> np.ndarray:
        return self.matrix

    # test-point prediction
    @cached_property
    def _test_parts(self):
        g = self.geometry
        cross = corr_from_lags(g.train_test_lags, self.kernel)
        test_corr = corr_from_lags(g.test_lags, self.kernel)
        v = solve_triangular(self.chol, cross, lower=True, check_finite=False)
        cov = test_corr - v.T @ v
        cov = 0.5 * (cov + cov.T)
        return v, cov

    def predictive_moments(self, nu) -> tuple[np.ndarray, np.ndarray]:
        v, cov = self._test_parts
        w = solve_triangular(self.chol, nu, lower=True, check_finite=False)
        return v.T @ w, cov

    @cached_property
    def _predictive_chol(self):
        _, cov = self._test_parts
        return _psd_factor(cov, self.geometry.jitter_policy)

    @property
    def predict_noise_dim(self) -> int:
        return self.geometry.n_test

    def predict_draw(self, nu, noise) -> np.ndarray:
        mean, _ = self.predictive_moments(nu)
        return mean + self._predictive_chol @ noise


class FitcOperator:
    """FITC approximation ``A^T A + diag(D)`` with ``A = L^-1 K_rm``.

    When the inducing points are training points, their diagonal correction
    is exactly zero and likelihood and prediction use the partitioned form
    (inducing block, then conditionally independent remainder). Otherwise the
    Woodbury identity and the matrix determinant lemma are used.
    """

    kind = "fitc"

    def __init__(self, geometry: "Geometry", kernel: KernelParams):
        self.geometry = geometry
        self.kernel = kernel
        k_rr = corr_from_lags(geometry.inducing_lags, kernel)
        chol, jitter = cholesky_with_jitter(k_rr, geometry.jitter_policy)
        self.inducing_corr = CorrMatrix(k_rr, jitter, chol)
        self.L = chol
        cross_t = corr_from_lags(geometry.inducing_train_lags, kernel)
        self.A = solve_triangular(chol, cross_t, lower=True, check_finite=False)
        q_diag = np.einsum("ij,ij->j", self.A, self.A)
        self.diag_correction = np.maximum(1.0 - q_diag, 0.0)
        self.index = geometry.inducing_index
        D = np.maximum(self.diag_correction, FITC_DIAG_FLOOR)
        if self.index is not None:
            D[self.index] = 0.0
            mask = np.ones(D.size, dtype=bool)
            mask[self.index] = False
            self._rest = np.flatnonzero(mask)
            self.logdet = 2.0 * float(np.sum(np.log(np.diag(chol)))) + float(np.sum(np.log(D[self._rest])))
        else:
            self._DA = self.A / D
            M = np.eye(self.A.shape[0]) + self._DA @ self.A.T
            self._LM = np.linalg.cholesky(M)
            self.logdet = float(np.sum(np.log(D))) + 2.0 * float(np.sum(np.log(np.diag(self._LM))))
        self.D = D

    @property
    def m(self) -> int:
        return self.A.shape[1]

    @property
    def r(self) -> int:
        return self.A.shape[0]

    @property
    def noise_dim(self) -> int:
        return self.r + self.m

    def factor(self) -> FitcFactor:
        g = self.geometry
        return FitcFactor(g.inducing, (self.L @ self.A).T, self.inducing_corr, self.diag_correction, self.index)

    def inv_quad(self, v) -> float:
        if self.index is not None:
            w = solve_triangular(self.L, v[self.index], lower=True, check_finite=False)
            resid = v[self._rest] - self.A[:, self._rest].T @ w
            return float(w @ w + np.sum(resid * resid / self.D[self._rest]))
        c = solve_triangular(self._LM, self._DA @ v, lower=True, check_finite=False)
        return float(np.sum(v * v / self.D) - c @ c)

    def log_density(self, v) -> float:
        return -0.5 * (self.m * LOG_2PI + self.logdet + self.inv_quad(v))

    def prior_draw(self, noise) -> np.ndarray:
        r = self.r
        return self.A.T @ noise[:r] + np.sqrt(self.D) * noise[r:]

    def matvec(self, v) -> np.ndarray:
        return self.A.T @ (self.A @ v) + self.D * v

    def dense(self) -> np.ndarray:
        return self.A.T @ self.A + np.diag(self.D)

    @cached_property
    def _test_parts(self):
        g = self.geometry
        a_star = solve_triangular(
            self.L, corr_from_lags(g.inducing_test_lags, self.kernel), lower=True, check_finite=False
        )
        lam = np.maximum(1.0 - np.einsum("ij,ij->j", a_star, a_star), 0.0)
        return a_star, lam

    def predictive_moments(self, nu) -> tuple[np.ndarray, np.ndarray]:
        a_star, lam = self._test_parts
        if self.index is not None:
            w = solve_triangular(self.L, nu[self.index], lower=True, check_finite=False)
            return a_star.T @ w, np.diag(lam)
        c = cho_solve((self._LM, True), self._DA @ nu, check_finite=False)
        v = solve_triangular(self._LM, a_star, lower=True, check_finite=False)
        return a_star.T @ c, v.T @ v + np.diag(lam)

    @property
    def predict_noise_dim(self) -> int:
        return self.r + self.geometry.n_test

    def predict_draw(self, nu, noise) -> np.ndarray:
        a_star, lam = self._test_parts
        mean, _ = self.predictive_moments(nu) if self.index is None else (None, None)
        r = self.r
        if self.index is not None:
            w = solve_triangular(self.L, nu[self.index], lower=True, check_finite=False)
            return a_star.T @ w + np.sqrt(lam) * noise[r:]
        low = solve_triangular(self._LM.T, noise[:r], lower=False, check_finite=False)
        return mean + a_star.T @ low + np.sqrt(lam) * noise[r:]


def _psd_factor(cov, policy: JitterPolicy | None):
    """Factor a predictive covariance that may be singular (coincident points)."""
    if cov.shape[0] == 0:
        return cov
    scale = max(float(np.max(np.diag(cov))), 1e-300)
    try:
        chol, _ = cholesky_with_jitter(cov, policy, scale=scale)
        return chol
    except Exception:
        w, v = np.linalg.eigh(cov)
        return v * np.sqrt(np.clip(w, 0.0, None))


class Geometry:
    """Point sets of one chain and their cached lags.

    Parameters
    ----------
    train, test
        Training and test index points.
    fitc_rank
        Number of inducing points, or ``None`` for dense operators.
    inducing_seed
        Seed for the inducing subsample.
    fitc_grid
        Place inducing points on a regular grid instead of subsampling.
    """

    def __init__(self, train, test=None, fitc_rank=None, inducing_seed=0, fitc_grid=False, jitter_policy=None):
        self.train = as_coords(train)
        self.test = as_coords(test) if test is not None else np.zeros((0, self.train.shape[1]))
        self.jitter_policy = jitter_policy
        self.fitc = fitc_rank is not None
        self.inducing = None
        self.inducing_index = None
        if self.fitc:
            r = min(int(fitc_rank), self.train.shape[0])
            self.inducing, self.inducing_index = select_inducing(self.train, r, inducing_seed, fitc_grid)

    @property
    def m(self) -> int:
        return self.train.shape[0]

    @property
    def n_test(self) -> int:
        return self.test.shape[0]

    @cached_property
    def train_lags(self) -> Lags:
        return Lags(self.train)

    @cached_property
    def train_test_lags(self) -> Lags:
        return Lags(self.train, self.test)

    @cached_property
    def test_lags(self) -> Lags:
        return Lags(self.test)

    @cached_property
    def inducing_lags(self) -> Lags:
        return Lags(self.inducing)

    @cached_property
    def inducing_train_lags(self) -> Lags:
        return Lags(self.inducing, self.train)

    @cached_property
    def inducing_test_lags(self) -> Lags:
        return Lags(self.inducing, self.test)

    def operator(self, kernel: KernelParams):
        return FitcOperator(self, kernel) if self.fitc else DenseOperator(self, kernel)

    def operators(self, theta) -> list:
        return [self.operator(k) for k in theta]


def inducing_seed_for(chain_seed: int) -> int:
    return _seeding.derive_seed(chain_seed, _seeding.INDUCING)
