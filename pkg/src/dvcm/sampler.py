"""Data-augmentation MCMC for the varying coefficient model.

One iteration of :func:`run_chain` cycles through

(a) impute the latent processes at the training indices,
(b) draw the noise variance,
(c) draw the fixed effects ``b = (alpha, vec Gamma)``,
(d) update kernel parameters by elliptical slice sampling,
(e) predict latents and coefficients at the test indices,
(f) predict responses at the test indices.

With ``delta = 1`` this is the full-data sampler; with ``delta = n / m`` it is
the tempered subset sampler. The two share every line of code, so a full-data
run and a single-subset run with ``m = n`` and the same seed produce identical
draws.
"""

from __future__ import annotations

import logging
import math
import time
import warnings
from dataclasses import asdict, dataclass, field
from typing import Callable

import numpy as np
from scipy.linalg import cho_solve, solve_triangular
from threadpoolctl import threadpool_limits

from . import _backend
from .errors import ChainError, FactorizationError
from .gp import FitcOperator, Geometry, inducing_seed_for
from .kernels import (
    JitterPolicy,
    KernelParams,
    cholesky_with_jitter,
    from_unconstrained,
    log_jacobian,
    to_unconstrained,
)
from .model import Dataset, LatentState, ModelSpec, ParamState, beta_at_points

log = logging.getLogger(__name__)

TAU2_FLOOR = 1e-12
RIDGE_POLICY = JitterPolicy(start=1e-10, factor=10.0, cap=1e-4)


@dataclass(frozen=True)
class ChainConfig:
    """Schedule and tuning of one chain.

    Iteration ``t`` (1-based) is stored when ``t > burn_in`` and
    ``(t - burn_in) % thin == 0``.
    """

    n_iterations: int = 10000
    burn_in: int = 5000
    thin: int = 5
    delta: float = 1.0
    ess_prior_scale: float = 2.0
    rng_seed: int = 0
    theta_sweep: str = "joint"
    update_theta: bool = True
    record_params: bool = False

    def __post_init__(self):
        if self.n_iterations < 1 or not 0 <= self.burn_in < self.n_iterations:
            raise ValueError("need 0 <= burn_in < n_iterations")
        if self.thin < 1:
            raise ValueError("thin must be >= 1")
        if self.delta < 1:
            raise ValueError("delta must be >= 1")
        if not self.ess_prior_scale > 0:
            raise ValueError("ess_prior_scale must be positive")
        if self.theta_sweep not in ("joint", "per_coefficient"):
            raise ValueError("theta_sweep must be 'joint' or 'per_coefficient'")

    @property
    def n_stored(self) -> int:
        return (self.n_iterations - self.burn_in) // self.thin

    def stores(self, t: int) -> bool:
        return t > self.burn_in and (t - self.burn_in) % self.thin == 0

    def to_dict(self) -> dict:
        return asdict(self)


@dataclass
class DrawStore:
    """Stored draws of ``beta``, ``y`` and ``log tau2`` at the test indices.

    ``beta_draws`` columns run over test points, then coefficients; ``y_draws``
    columns over test points, then response components.
    """

    beta_draws: np.ndarray
    y_draws: np.ndarray
    log_tau2_draws: np.ndarray
    test_points: np.ndarray
    test_sizes: np.ndarray
    p: int
    metadata: dict = field(default_factory=dict)
    params: dict | None = None

    def __post_init__(self):
        self.beta_draws = np.atleast_2d(np.asarray(self.beta_draws, dtype=np.float64))
        self.y_draws = np.atleast_2d(np.asarray(self.y_draws, dtype=np.float64))
        self.log_tau2_draws = np.asarray(self.log_tau2_draws, dtype=np.float64).ravel()
        self.test_points = np.atleast_2d(np.asarray(self.test_points, dtype=np.float64))
        self.test_sizes = np.asarray(self.test_sizes, dtype=np.int64).ravel()
        T = self.log_tau2_draws.size
        if self.beta_draws.shape[0] != T or self.y_draws.shape[0] != T:
            raise ValueError("draw counts differ across quantities")
        if self.test_points.shape[0] < 1:
            raise ValueError("test points must be non-empty")
        if self.beta_draws.shape[1] != self.test_points.shape[0] * self.p:
            raise ValueError("beta columns must equal test points times p")
        if self.y_draws.shape[1] != int(self.test_sizes.sum()):
            raise ValueError("y columns must equal the total test response length")

    @property
    def n_draws(self) -> int:
        return self.log_tau2_draws.size

    @property
    def n_test(self) -> int:
        return self.test_points.shape[0]

    def matrix(self) -> np.ndarray:
        """All quantities side by side, in :meth:`column_names` order."""
        return np.hstack([self.beta_draws, self.y_draws, self.log_tau2_draws[:, None]])

    def column_names(self) -> list[str]:
        return draw_column_names(self.n_test, self.p, self.test_sizes)

    def beta_cube(self) -> np.ndarray:
        """Draws reshaped to ``(T, n_test, p)``."""
        return self.beta_draws.reshape(self.n_draws, self.n_test, self.p)

    def save(self, path) -> None:
        from .io import write_draw_store

        write_draw_store(self, path)

    @classmethod
    def load(cls, path) -> "DrawStore":
        from .io import read_draw_store

        return read_draw_store(path)


def draw_column_names(n_test: int, p: int, test_sizes) -> list[str]:
    names = [f"beta_{i}_{j}" for i in range(n_test) for j in range(p)]
    names += [f"y_{i}_{r}" for i, s in enumerate(test_sizes) for r in range(int(s))]
    names.append("log_tau2")
    return names


# ---------------------------------------------------------------------------
# (a) latent imputation


def _loadings(data: Dataset, Gamma) -> np.ndarray:
    """Column ``a`` holds ``Z Gamma[:, a]``, the row-wise loading of latent ``a``."""
    return data.Z @ np.asarray(Gamma, dtype=np.float64)


class _DenseSystem:
    """``C = sum_a Z_a R_a Z_a^T + tau2 I`` assembled and factored once."""

    def __init__(self, data, loadings, tau2, ops):
        ro = data.row_obs
        C = np.zeros((data.n_rows, data.n_rows))
        for a, op in enumerate(ops):
            z = loadings[:, a]
            C += np.outer(z, z) * op.dense()[np.ix_(ro, ro)]
        C[np.diag_indices_from(C)] += tau2
        self.chol, _ = cholesky_with_jitter(C, scale=tau2)

    def solve(self, v):
        return cho_solve((self.chol, True), v, check_finite=False)


class _BlockDiag:
    """Inverse of a matrix that is block diagonal by observation."""

    def __init__(self, data, blocks_for):
        self.groups = []
        for s in np.unique(data.sizes):
            obs = np.flatnonzero(data.sizes == s)
            rows = data.offsets[obs][:, None] + np.arange(s)
            self.groups.append((rows, np.linalg.inv(blocks_for(obs, rows))))

    def apply(self, v):
        out = np.empty_like(v)
        for rows, inv in self.groups:
            if v.ndim == 1:
                out[rows] = np.einsum("nij,nj->ni", inv, v[rows])
            else:
                out[rows] = np.einsum("nij,njk->nik", inv, v[rows])
        return out


class _FitcSystem:
    """Woodbury solve with ``C = B + U U^T``.

    ``B`` collects the noise and the FITC diagonal corrections, which are block
    diagonal by observation; ``U`` stacks the loaded low-rank factors.
    """

    def __init__(self, data, loadings, tau2, ops):
        ro = data.row_obs

        def blocks(obs, rows):
            s = rows.shape[1]
            out = np.broadcast_to(tau2 * np.eye(s), (len(obs), s, s)).copy()
            for a, op in enumerate(ops):
                z = loadings[rows, a]
                out += op.D[obs][:, None, None] * z[:, :, None] * z[:, None, :]
            return out

        self.B = _BlockDiag(data, blocks)
        self.U = np.hstack([loadings[:, a, None] * op.A.T[ro] for a, op in enumerate(ops)])
        self.BiU = self.B.apply(self.U)
        M = self.U.T @ self.BiU
        M[np.diag_indices_from(M)] += 1.0
        self.chol, _ = cholesky_with_jitter(M)

    def solve(self, v):
        t = self.B.apply(v)
        return t - self.BiU @ cho_solve((self.chol, True), self.U.T @ t, check_finite=False)


def _shared_system(data, loadings, tau2, ops):
    if ops and all(isinstance(op, FitcOperator) for op in ops):
        return _FitcSystem(data, loadings, tau2, ops)
    return _DenseSystem(data, loadings, tau2, ops)


def _impute_from_noise(data, alpha, Gamma, tau2, ops, prior_noise, eps_noise):
    """The imputed latents as an affine map of standard normal noise.

    ``nu = nu0 + R Z^T C^-1 (y - X alpha - Z nu0 - eps)`` with ``nu0`` a prior
    draw and ``eps ~ N(0, tau2 I)``; this is an exact draw from the conditional
    of the latents given the data.
    """
    loadings = _loadings(data, Gamma)
    ro = data.row_obs
    nu0 = [op.prior_draw(xi) for op, xi in zip(ops, prior_noise)]
    resid = data.y - data.X @ alpha - math.sqrt(tau2) * eps_noise
    for a, v in enumerate(nu0):
        resid -= loadings[:, a] * v[ro]
    w = _shared_system(data, loadings, tau2, ops).solve(resid)
    nu = np.empty((data.n, len(ops)))
    for a, op in enumerate(ops):
        g = np.bincount(ro, weights=loadings[:, a] * w, minlength=data.n)
        nu[:, a] = nu0[a] + op.matvec(g)
    return nu


def impute_latents(subset_data: Dataset, params: ParamState, kernel_matrices, rng) -> LatentState:
    """One exact draw of the latents at the training indices given everything else.

    Parameters
    ----------
    subset_data
        Training observations.
    params
        Current ``alpha``, ``Gamma`` and ``tau2``.
    kernel_matrices
        One covariance operator per latent (see :class:`dvcm.gp.Geometry`).
    rng
        ``numpy.random.Generator``.
    """
    ops = list(kernel_matrices)
    if len(ops) != params.Gamma.shape[0]:
        raise ValueError("one covariance operator per latent required")
    prior_noise = [rng.standard_normal(op.noise_dim) for op in ops]
    eps = rng.standard_normal(subset_data.n_rows)
    return LatentState(_impute_from_noise(subset_data, params.alpha, params.Gamma, params.tau2, ops, prior_noise, eps))


def latent_conditional(subset_data: Dataset, params: ParamState, kernel_matrices) -> tuple[np.ndarray, np.ndarray]:
    """Explicit mean and covariance of the stacked latents ``(nu_1, ..., nu_q)``.

    Dense ``O((mq)^3)`` reference used for checking :func:`impute_latents`.
    """
    data = subset_data
    R = [np.asarray(op.dense() if hasattr(op, "dense") else op, dtype=np.float64) for op in kernel_matrices]
    loadings = _loadings(data, params.Gamma)
    P = np.zeros((data.n_rows, data.n))
    P[np.arange(data.n_rows), data.row_obs] = 1.0
    Zt = [loadings[:, a, None] * P for a in range(len(R))]
    C = sum(Zt[a] @ R[a] @ Zt[a].T for a in range(len(R))) + params.tau2 * np.eye(data.n_rows)
    cross = np.hstack([Zt[a] @ R[a] for a in range(len(R))])
    sol = np.linalg.solve(C, np.column_stack([data.y - data.X @ params.alpha, cross]))
    mean = cross.T @ sol[:, 0]
    prior = np.zeros((cross.shape[1], cross.shape[1]))
    m = data.n
    for a in range(len(R)):
        prior[a * m : (a + 1) * m, a * m : (a + 1) * m] = R[a]
    cov = prior - cross.T @ sol[:, 1:]
    return mean, 0.5 * (cov + cov.T)


# ---------------------------------------------------------------------------
# (b), (c) noise variance and fixed effects


@dataclass(frozen=True)
class LeastSquares:
    b_hat: np.ndarray
    chol: np.ndarray
    rss: float
    ridge: float


def least_squares(W, y) -> LeastSquares:
    """Normal-equation fit with the escalating ridge used when ``W^T W`` is singular."""
    W = np.asarray(W, dtype=np.float64)
    y = np.asarray(y, dtype=np.float64)
    G = W.T @ W
    scale = float(np.trace(G)) / max(G.shape[0], 1)
    if not scale > 0:
        raise FactorizationError("design matrix is identically zero")
    try:
        chol, ridge = cholesky_with_jitter(G, RIDGE_POLICY, scale=scale)
    except FactorizationError as exc:
        raise FactorizationError(f"W^T W is rank deficient beyond the ridge policy: {exc}") from None
    b_hat = cho_solve((chol, True), W.T @ y, check_finite=False)
    resid = y - W @ b_hat
    return LeastSquares(b_hat, chol, float(resid @ resid), ridge)


def draw_tau2(residual_norm_sq: float, s_tilde: int, delta: float, rng, n_coef: int = 0) -> float:
    """``delta * rss / chi2(delta * s_tilde - n_coef)``.

    ``n_coef`` is ``p + q^2``; with the default 0 the degrees of freedom are
    ``delta * s_tilde``.
    """
    df = delta * s_tilde - n_coef
    if not df > 0:
        raise ValueError(f"non-positive degrees of freedom {df:g}: subset too small for delta, p and q")
    if residual_norm_sq < 0:
        raise ValueError("residual norm must be non-negative")
    if residual_norm_sq == 0:
        warnings.warn("zero residual; returning the tau2 floor", RuntimeWarning, stacklevel=2)
        return TAU2_FLOOR
    return max(delta * residual_norm_sq / rng.chisquare(df), TAU2_FLOOR)


def draw_b(W, y, tau2: float, delta: float, rng, ls: LeastSquares | None = None) -> np.ndarray:
    """Draw from ``N(b_hat, (tau2 / delta) (W^T W)^-1)``."""
    if not tau2 > 0:
        raise ValueError("tau2 must be positive")
    ls = ls or least_squares(W, y)
    xi = rng.standard_normal(ls.b_hat.size)
    return ls.b_hat + math.sqrt(tau2 / delta) * solve_triangular(ls.chol.T, xi, lower=False, check_finite=False)


# ---------------------------------------------------------------------------
# (d) kernel parameters


def theta_log_likelihood(nu, ops, delta: float) -> float:
    """``delta * sum_a log N(nu_a; 0, R_a)``, normalizing constant included."""
    nu = nu.nu if isinstance(nu, LatentState) else np.atleast_2d(nu)
    return delta * sum(op.log_density(nu[:, a]) for a, op in enumerate(ops))


def elliptical_slice(x, log_lik: Callable, prior_scale: float, rng, current=None, max_shrink: int = 200):
    """One elliptical slice sampling step under the prior ``N(0, prior_scale^2 I)``.

    ``log_lik(x)`` returns ``(value, aux)``; ``current`` is that pair at ``x``.
    Returns the new ``(x, value, aux)``. If the bracket collapses before a point
    is accepted the chain stays put.
    """
    if current is None:
        current = log_lik(x)
    cur_ll, cur_aux = current
    if not np.isfinite(cur_ll):
        raise ValueError("log-likelihood is not finite at the current state")
    nu = prior_scale * rng.standard_normal(x.shape)
    threshold = cur_ll + math.log(rng.random())
    angle = rng.uniform(0.0, 2.0 * math.pi)
    lo, hi = angle - 2.0 * math.pi, angle
    for _ in range(max_shrink):
        proposal = x * math.cos(angle) + nu * math.sin(angle)
        ll, aux = log_lik(proposal)
        if ll > threshold:
            return proposal, ll, aux
        if angle < 0:
            lo = angle
        else:
            hi = angle
        if hi - lo < 1e-12:
            break
        angle = rng.uniform(lo, hi)
    log.debug("elliptical slice bracket collapsed; keeping the current state")
    return x, cur_ll, cur_aux


def _theta_z(theta, ranges) -> list[np.ndarray]:
    return [to_unconstrained(t, r) for t, r in zip(theta, ranges)]


def _z_target(geometry, families, ranges, nu, delta, s2, indices):
    """Target on the unconstrained scale, divided by the Gaussian slice prior."""

    def target(zs, ops):
        total = 0.0
        for a, z in zip(indices, zs):
            total += delta * ops[a].log_density(nu[:, a]) + log_jacobian(z, ranges[a]) + float(z @ z) / (2.0 * s2)
        return total

    def log_lik(z_flat):
        zs, ops, pos = [], {}, 0
        for a in indices:
            k = ranges[a].lower_array.size
            z = z_flat[pos : pos + k]
            pos += k
            try:
                ops[a] = geometry.operator(from_unconstrained(z, ranges[a], families[a]))
            except FactorizationError:
                return -np.inf, None
            zs.append(z)
        return target(zs, ops), ops

    return target, log_lik


def _ess_step(nu, theta, ops, ranges, delta, ess_prior_scale, rng, geometry, sweep="joint"):
    nu = nu.nu if isinstance(nu, LatentState) else np.atleast_2d(nu)
    q = len(theta)
    if nu.shape[0] == 0:
        raise ValueError("elliptical slice update needs at least one latent value")
    families = [t.family for t in theta]
    zs = _theta_z(theta, ranges)
    theta, ops = list(theta), list(ops)
    s2 = ess_prior_scale**2
    blocks = [list(range(q))] if sweep == "joint" else [[a] for a in range(q)]
    for idx in blocks:
        target, log_lik = _z_target(geometry, families, ranges, nu, delta, s2, idx)
        x = np.concatenate([zs[a] for a in idx])
        cur = (target([zs[a] for a in idx], {a: ops[a] for a in idx}), {a: ops[a] for a in idx})
        x_new, _, new_ops = elliptical_slice(x, log_lik, ess_prior_scale, rng, current=cur)
        pos = 0
        for a in idx:
            k = zs[a].size
            zs[a] = x_new[pos : pos + k]
            pos += k
            ops[a] = new_ops[a]
            theta[a] = ops[a].kernel
    return theta, ops


def ess_update_theta(
    nu, theta, ranges, delta, ess_prior_scale, rng, geometry=None, train_points=None, sweep="joint", ops=None
) -> list[KernelParams]:
    """One elliptical slice update of all kernel parameters.

    The unconstrained vector ``z = logit((theta - lower) / (upper - lower))``
    gets the slice prior ``N(0, ess_prior_scale^2 I)``; the likelihood handed
    to the slice sampler is the tempered latent log-density plus the log
    Jacobian plus ``|z|^2 / (2 s^2)``, so the chain leaves the uniform-prior
    posterior of ``theta`` exactly invariant.
    """
    nu_arr = nu.nu if isinstance(nu, LatentState) else np.atleast_2d(nu)
    if nu_arr.size == 0:
        raise ValueError("elliptical slice update needs at least one latent value")
    if geometry is None:
        if train_points is None:
            raise ValueError("pass the training geometry or points")
        geometry = Geometry(train_points)
    if ops is None:
        ops = geometry.operators(theta)
    theta, _ = _ess_step(nu_arr, theta, ops, ranges, delta, ess_prior_scale, rng, geometry, sweep)
    return theta


# ---------------------------------------------------------------------------
# (e), (f) prediction


def predict_latents(nu, theta, train_points, test_points, rng, ops=None, geometry=None) -> np.ndarray:
    """Draw the latents at ``test_points``; returns a ``(q, n_test)`` array."""
    nu = nu.nu if isinstance(nu, LatentState) else np.atleast_2d(nu)
    if ops is None:
        geometry = geometry or Geometry(train_points, test_points)
        ops = geometry.operators(theta)
    return np.vstack([op.predict_draw(nu[:, a], rng.standard_normal(op.predict_noise_dim)) for a, op in enumerate(ops)])


def predict_response(X_star, beta_star, tau2: float, rng) -> np.ndarray:
    """Draw ``N(X beta, tau2 I)`` at one test index."""
    X = np.atleast_2d(np.asarray(X_star, dtype=np.float64))
    beta = np.asarray(beta_star, dtype=np.float64).ravel()
    if X.shape[1] != beta.size:
        raise ValueError("covariate columns must match coefficient length")
    if not tau2 > 0:
        raise ValueError("tau2 must be positive")
    return X @ beta + math.sqrt(tau2) * rng.standard_normal(X.shape[0])


def _predict_responses(test: Dataset, beta_star, tau2, rng) -> np.ndarray:
    mean = np.einsum("rj,rj->r", test.X, beta_star[test.row_obs])
    return mean + math.sqrt(tau2) * rng.standard_normal(test.n_rows)


# ---------------------------------------------------------------------------
# driver


def initial_state(data: Dataset, spec: ModelSpec) -> ParamState:
    """Least-squares ``alpha``, ``Gamma = I``, residual-variance ``tau2``, midpoint ``theta``."""
    ls = least_squares(data.X, data.y)
    dof = max(data.n_rows - data.p, 1)
    tau2 = max(ls.rss / dof, 1e-6)
    return ParamState(ls.b_hat, np.eye(spec.q), tau2, spec.midpoint_theta())


def run_chain(
    subset_data: Dataset,
    spec: ModelSpec,
    config: ChainConfig,
    test: Dataset,
    *,
    subset_id: int = 0,
    fixed_latents=None,
    init: ParamState | None = None,
) -> DrawStore:
    """Run one chain and return its stored draws.

    Parameters
    ----------
    subset_data
        Training observations of this chain.
    spec
        Model dimensions, kernels, prior ranges and FITC settings.
    config
        Schedule, tempering power and seed.
    test
        Test observations; only index points and covariates are used.
    fixed_latents
        Hold the latents at this ``(m, q)`` matrix instead of imputing them.
    init
        Starting parameters; defaults to :func:`initial_state`.
    """
    if subset_data.p != spec.p or subset_data.q != spec.q or test.p != spec.p:
        raise ValueError("dataset dimensions disagree with the model spec")
    with threadpool_limits(limits=1):
        return _run_chain(subset_data, spec, config, test, subset_id, fixed_latents, init)


def _run_chain(data, spec, config, test, subset_id, fixed_latents, init):
    start = time.perf_counter()
    rng = np.random.default_rng(config.rng_seed)
    delta = config.delta
    geometry = Geometry(
        data.coords,
        test.coords,
        fitc_rank=spec.fitc_rank,
        inducing_seed=inducing_seed_for(config.rng_seed),
        fitc_grid=spec.fitc_grid,
    )
    state = init or initial_state(data, spec)
    ranges = list(spec.prior_ranges)
    theta = list(state.theta)
    alpha, Gamma, tau2 = state.alpha.copy(), state.Gamma.copy(), float(state.tau2)
    nu = np.zeros((data.n, spec.q))
    if fixed_latents is not None:
        nu = np.array(fixed_latents, dtype=np.float64).reshape(data.n, spec.q)

    T, p, q = config.n_stored, spec.p, spec.q
    beta_out = np.empty((T, test.n * p))
    y_out = np.empty((T, test.n_rows))
    tau_out = np.empty(T)
    params = None
    if config.record_params:
        n_theta = sum(r.lower_array.size for r in ranges)
        params = {"b": np.empty((T, spec.n_coef)), "tau2": np.empty(T), "theta": np.empty((T, n_theta))}

    t = 0
    try:
        ops = geometry.operators(theta)
        stored = 0
        for t in range(1, config.n_iterations + 1):
            # (a)
            if fixed_latents is None:
                prior_noise = [rng.standard_normal(op.noise_dim) for op in ops]
                eps = rng.standard_normal(data.n_rows)
                nu = _impute_from_noise(data, alpha, Gamma, tau2, ops, prior_noise, eps)
            # (b), (c)
            W = _backend.kron_design(data.X, np.ascontiguousarray(nu[data.row_obs]), q)
            ls = least_squares(W, data.y)
            tau2 = draw_tau2(ls.rss, data.n_rows, delta, rng, spec.n_coef)
            b = draw_b(W, data.y, tau2, delta, rng, ls)
            alpha, Gamma = ParamState.split_b(b, p, q)
            # (d)
            if config.update_theta:
                theta, ops = _ess_step(
                    nu, theta, ops, ranges, delta, config.ess_prior_scale, rng, geometry, config.theta_sweep
                )
            if not config.stores(t):
                continue
            # (e), (f)
            nu_star = np.vstack(
                [op.predict_draw(nu[:, a], rng.standard_normal(op.predict_noise_dim)) for a, op in enumerate(ops)]
            )
            beta_star = beta_at_points(alpha, Gamma, nu_star.T)
            y_star = _predict_responses(test, beta_star, tau2, rng)
            if not (np.all(np.isfinite(beta_star)) and np.all(np.isfinite(y_star))):
                raise FloatingPointError("non-finite predictive draw")
            beta_out[stored] = beta_star.ravel()
            y_out[stored] = y_star
            tau_out[stored] = math.log(tau2)
            if params is not None:
                params["b"][stored] = b
                params["tau2"][stored] = tau2
                params["theta"][stored] = np.concatenate([k.as_array() for k in theta])
            stored += 1
    except ChainError:
        raise
    except (FactorizationError, np.linalg.LinAlgError, FloatingPointError, ValueError) as exc:
        raise ChainError(str(exc), iteration=t, subset_id=subset_id) from exc

    metadata = {
        "subset_id": int(subset_id),
        "n_obs": int(data.n),
        "n_rows": int(data.n_rows),
        "delta": float(delta),
        "config": config.to_dict(),
        "fitc_rank": spec.fitc_rank,
        "kernels": [k.family.value for k in theta],
        "wall_seconds": time.perf_counter() - start,
    }
    return DrawStore(beta_out, y_out, tau_out, test.coords, test.sizes, p, metadata, params)


__all__ = [
    "ChainConfig",
    "DrawStore",
    "draw_column_names",
    "impute_latents",
    "latent_conditional",
    "least_squares",
    "LeastSquares",
    "draw_tau2",
    "draw_b",
    "theta_log_likelihood",
    "elliptical_slice",
    "ess_update_theta",
    "predict_latents",
    "predict_response",
    "initial_state",
    "run_chain",
]
