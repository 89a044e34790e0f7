"""Combination of subset posterior draws.

Each method maps ``k`` sets of ``T`` subset draws of a vector quantity to
draws (or, for PIE, quantiles) approximating the full-data posterior.

AMC
    Recenter each subset to the average mean and rescale it to the average
    covariance.
DPMC
    Recenter only.
WASP
    Like AMC but rescale to the Wasserstein barycenter of the subset Gaussians.
CMC
    Precision-weighted average of the ``t``-th draws across subsets.
PIE
    Per-coordinate average of subset quantile functions.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from enum import Enum
from typing import Sequence

import numpy as np

from .errors import ConvergenceError

EIG_FLOOR = 1e-12
WASP_RIDGES = (0.0,) + tuple(10.0**e for e in range(-10, -3))
WASP_STALL_WINDOW = 10
PIE_LEVELS = np.arange(1, 200) / 200.0


class Method(str, Enum):
    AMC = "amc"
    DPMC = "dpmc"
    WASP = "wasp"
    PIE = "pie"
    CMC = "cmc"


ALL_METHODS = tuple(m.value for m in Method)


@dataclass(frozen=True)
class SubsetMoments:
    mean: np.ndarray
    covariance: np.ndarray
    draw_count: int

    @property
    def dim(self) -> int:
        return self.mean.size


@dataclass
class CombinedDraws:
    """Combined output for one vector quantity (or a stack of blocks).

    ``draws`` is ``None`` for PIE, which stores ``quantiles`` on ``levels``.
    """

    method: str
    draws: np.ndarray | None
    combined_mean: np.ndarray
    combined_cov: np.ndarray | None = None
    levels: np.ndarray | None = None
    quantiles: np.ndarray | None = None
    info: dict = field(default_factory=dict)

    @property
    def dim(self) -> int:
        return self.combined_mean.size

    def point_estimate(self) -> np.ndarray:
        return self.combined_mean

    def interval(self, level: float = 0.95) -> tuple[np.ndarray, np.ndarray]:
        """Equal-tailed interval per coordinate."""
        lo, hi = (1 - level) / 2, 1 - (1 - level) / 2
        if self.draws is not None:
            return np.quantile(self.draws, lo, axis=0), np.quantile(self.draws, hi, axis=0)
        return _grid_quantile(self.levels, self.quantiles, lo), _grid_quantile(self.levels, self.quantiles, hi)


def _grid_quantile(levels, quantiles, level):
    i = int(np.argmin(np.abs(levels - level)))
    if abs(levels[i] - level) < 1e-12:
        return quantiles[i].copy()
    return np.array([np.interp(level, levels, quantiles[:, c]) for c in range(quantiles.shape[1])])


# ---------------------------------------------------------------------------
# moments and matrix roots


def subset_moments(draws) -> SubsetMoments:
    """Mean and divisor-``T`` covariance of a ``(T, dim)`` draw matrix."""
    x = np.asarray(draws, dtype=np.float64)
    if x.ndim == 1:
        x = x[:, None]
    T = x.shape[0]
    if T < 2:
        raise ValueError("need at least two draws")
    mean = x.mean(axis=0)
    c = x - mean
    cov = c.T @ c / T
    return SubsetMoments(mean, 0.5 * (cov + cov.T), T)


def _eigh(S):
    S = 0.5 * (S + S.T)
    w, v = np.linalg.eigh(S)
    return np.maximum(w, EIG_FLOOR), v


def sqrtm_psd(S, inverse: bool = False) -> np.ndarray:
    """Symmetric square root, or inverse square root with eigenvalues floored at 1e-12."""
    S = np.atleast_2d(np.asarray(S, dtype=np.float64))
    if inverse:
        w, v = _eigh(S)
        return (v * w**-0.5) @ v.T
    w, v = np.linalg.eigh(0.5 * (S + S.T))
    return (v * np.sqrt(np.maximum(w, 0.0))) @ v.T


def _check(moments, draws):
    if len(moments) < 1 or len(moments) != len(draws):
        raise ValueError("need one moment summary per draw matrix and k >= 1")
    dims = {m.dim for m in moments} | {np.atleast_2d(d).shape[1] if np.ndim(d) > 1 else 1 for d in draws}
    if len(dims) != 1:
        raise ValueError("subset dimensions differ")


def _as2d(d):
    d = np.asarray(d, dtype=np.float64)
    return d[:, None] if d.ndim == 1 else d


def _identity(method, draws):
    x = _as2d(draws[0]).copy()
    mom = subset_moments(x)
    return CombinedDraws(method, x, mom.mean, mom.covariance, info={"k": 1})


def _affine(method, moments, draws, target_cov, info=None):
    mu = np.mean([m.mean for m in moments], axis=0)
    root = sqrtm_psd(target_cov) if target_cov is not None else None
    out = []
    for m, x in zip(moments, draws):
        centered = _as2d(x) - m.mean
        if root is not None:
            centered = centered @ (root @ sqrtm_psd(m.covariance, inverse=True)).T
        out.append(mu + centered)
    cov = target_cov if target_cov is not None else np.mean([m.covariance for m in moments], axis=0)
    return CombinedDraws(method, np.vstack(out), mu, cov, info=dict(info or {}, k=len(moments)))


def amc_combine(moments: Sequence[SubsetMoments], draws) -> CombinedDraws:
    """``mu + Sigma^1/2 Sigma_j^-1/2 (x - mu_j)`` with arithmetic-mean ``mu`` and ``Sigma``."""
    _check(moments, draws)
    if len(moments) == 1:
        return _identity(Method.AMC.value, draws)
    sigma = np.mean([m.covariance for m in moments], axis=0)
    return _affine(Method.AMC.value, moments, draws, sigma)


def dpmc_combine(moments: Sequence[SubsetMoments], draws) -> CombinedDraws:
    """``mu + (x - mu_j)``: recentering without rescaling."""
    _check(moments, draws)
    if len(moments) == 1:
        return _identity(Method.DPMC.value, draws)
    return _affine(Method.DPMC.value, moments, draws, None)


def _barycenter_fixed_point(covs, tol, max_iter):
    S = np.mean(covs, axis=0)
    residuals = []
    for it in range(max_iter):
        root = sqrtm_psd(S)
        inv_root = sqrtm_psd(S, inverse=True)
        M = np.mean([sqrtm_psd(root @ c @ root) for c in covs], axis=0)
        S_new = inv_root @ M @ M @ inv_root
        S_new = 0.5 * (S_new + S_new.T)
        residuals.append(float(np.linalg.norm(S_new - S)))
        S = S_new
        if residuals[-1] <= tol:
            return S, residuals, True
        # round-off floor: no longer contracting
        if it >= WASP_STALL_WINDOW and residuals[-1] > 0.5 * residuals[-1 - WASP_STALL_WINDOW]:
            break
    return S, residuals, False


def wasp_barycenter(covs, tol: float = 1e-8, max_iter: int = 100) -> tuple[np.ndarray, list[float]]:
    """Covariance of the Wasserstein barycenter of centered Gaussians.

    Fixed-point iteration ``S <- S^-1/2 (mean_j (S^1/2 C_j S^1/2)^1/2)^2 S^-1/2``
    from the arithmetic mean. Near-singular inputs stall above ``tol`` at the
    round-off floor; the inputs are then regularised with a ridge
    ``eps * mean(diag C_j) * I``, ``eps`` escalating from 1e-10 to 1e-4.
    Returns the barycenter and the Frobenius change at each iteration of the
    successful attempt.

    Raises
    ------
    ConvergenceError
        If no ridge level reaches ``tol`` within ``max_iter`` iterations.
    """
    covs = [np.atleast_2d(np.asarray(c, dtype=np.float64)) for c in covs]
    eye = np.eye(covs[0].shape[0])
    for eps in WASP_RIDGES:
        jittered = [c + eps * np.mean(np.diag(c)) * eye for c in covs] if eps else covs
        S, residuals, ok = _barycenter_fixed_point(jittered, tol, max_iter)
        if ok:
            return S, residuals
    raise ConvergenceError(f"barycenter iteration did not reach {tol:g} in {max_iter} iterations")


def wasp_combine(moments: Sequence[SubsetMoments], draws, tol: float = 1e-8, max_iter: int = 100) -> CombinedDraws:
    """AMC mapping with the Wasserstein-barycenter covariance."""
    _check(moments, draws)
    if len(moments) == 1:
        return _identity(Method.WASP.value, draws)
    S, residuals = wasp_barycenter([m.covariance for m in moments], tol, max_iter)
    return _affine(Method.WASP.value, moments, draws, S, info={"iterations": len(residuals)})


def cmc_combine(moments: Sequence[SubsetMoments], draws) -> CombinedDraws:
    """Consensus draws ``(sum_j P_j)^-1 sum_j P_j x_j^(t)`` with ``P_j = Sigma_j^-1``."""
    _check(moments, draws)
    if len(moments) == 1:
        return _identity(Method.CMC.value, draws)
    T = min(_as2d(d).shape[0] for d in draws)
    precisions = []
    for m in moments:
        w, v = _eigh(m.covariance)
        precisions.append((v / w) @ v.T)
    total = np.sum(precisions, axis=0)
    try:
        chol = np.linalg.cholesky(0.5 * (total + total.T))
    except np.linalg.LinAlgError:
        raise ValueError("summed subset precision is singular") from None
    weighted = sum(_as2d(x)[:T] @ P for x, P in zip(draws, precisions))
    out = np.linalg.solve(chol.T, np.linalg.solve(chol, weighted.T)).T
    mom = subset_moments(out)
    return CombinedDraws(Method.CMC.value, out, mom.mean, mom.covariance, info={"k": len(moments)})


def empirical_quantiles(x, levels=PIE_LEVELS) -> np.ndarray:
    return np.quantile(_as2d(x), levels, axis=0)


def pie_combine(draws, levels=PIE_LEVELS) -> CombinedDraws:
    """Average the subsets' empirical quantile functions coordinate by coordinate."""
    if len(draws) < 1:
        raise ValueError("need at least one subset")
    levels = np.asarray(levels, dtype=np.float64)
    q = np.mean([empirical_quantiles(d, levels) for d in draws], axis=0)
    # mean of the averaged quantile function on the grid
    return CombinedDraws(
        Method.PIE.value, None, q.mean(axis=0), None, levels=levels, quantiles=q, info={"k": len(draws)}
    )


def tau2_from_log_draws(log_draws) -> np.ndarray:
    log_draws = np.asarray(log_draws, dtype=np.float64)
    if not np.all(np.isfinite(log_draws)):
        raise ValueError("log tau2 draws must be finite")
    return np.exp(log_draws)


def combine_matrix(draws, method: str) -> CombinedDraws:
    """Combine a list of ``(T, dim)`` subset draw matrices with one method."""
    method = Method(method).value
    draws = [_as2d(d) for d in draws]
    if method == Method.PIE.value:
        return pie_combine(draws)
    moments = [subset_moments(d) for d in draws]
    fn = {"amc": amc_combine, "dpmc": dpmc_combine, "wasp": wasp_combine, "cmc": cmc_combine}[method]
    return fn(moments, draws)


# ---------------------------------------------------------------------------
# DrawStore-level driver

POLICIES = ("auto", "joint", "quantity", "point")


@dataclass
class CombinedStore:
    """Combined draws over every column of the subset DrawStores.

    For PIE ``draws`` holds quantiles, one row per level in ``levels``.
    """

    method: str
    policy: str
    draws: np.ndarray
    columns: list[str]
    test_points: np.ndarray
    test_sizes: np.ndarray
    p: int
    levels: np.ndarray | None = None
    mean: np.ndarray | None = None
    info: dict = field(default_factory=dict)

    @property
    def is_quantile(self) -> bool:
        return self.levels is not None

    @property
    def n_test(self) -> int:
        return self.test_points.shape[0]

    def _slices(self):
        nb = self.n_test * self.p
        ny = int(self.test_sizes.sum())
        return slice(0, nb), slice(nb, nb + ny), nb + ny

    def beta_mean(self) -> np.ndarray:
        b, _, _ = self._slices()
        return self.mean[b].reshape(self.n_test, self.p)

    def y_mean(self) -> np.ndarray:
        _, y, _ = self._slices()
        return self.mean[y]

    def interval(self, level: float = 0.95) -> tuple[np.ndarray, np.ndarray]:
        lo, hi = (1 - level) / 2, 1 - (1 - level) / 2
        if self.is_quantile:
            return _grid_quantile(self.levels, self.draws, lo), _grid_quantile(self.levels, self.draws, hi)
        return np.quantile(self.draws, lo, axis=0), np.quantile(self.draws, hi, axis=0)

    def beta_interval(self, level: float = 0.95):
        b, _, _ = self._slices()
        lo, hi = self.interval(level)
        return lo[b].reshape(self.n_test, self.p), hi[b].reshape(self.n_test, self.p)

    def y_interval(self, level: float = 0.95):
        _, y, _ = self._slices()
        lo, hi = self.interval(level)
        return lo[y], hi[y]

    def log_tau2(self) -> np.ndarray:
        """Combined ``log tau2`` draws, or its quantiles for PIE."""
        _, _, t = self._slices()
        return self.draws[:, t]

    def tau2_interval(self, level: float = 0.95):
        _, _, t = self._slices()
        lo, hi = self.interval(level)
        return float(np.exp(lo[t])), float(np.exp(hi[t]))

    def save(self, path) -> None:
        from .io import write_combined

        write_combined(self, path)


def block_columns(n_test: int, p: int, test_sizes, T: int, policy: str = "auto") -> list[np.ndarray]:
    """Column groups that are combined jointly under ``policy``.

    ``joint`` combines all of ``beta`` and ``y`` together and ``log tau2``
    alone. ``quantity`` splits ``beta`` and ``y``. ``point`` uses one block
    per test point. ``auto`` picks ``joint`` when the joint dimension is at most
    half the number of draws and ``point`` otherwise.
    """
    if policy not in POLICIES:
        raise ValueError(f"unknown block policy {policy!r}")
    test_sizes = np.asarray(test_sizes, dtype=np.int64)
    nb, ny = n_test * p, int(test_sizes.sum())
    tau = np.array([nb + ny])
    if policy == "auto":
        policy = "joint" if nb + ny <= T // 2 else "point"
    if policy == "joint":
        return [np.arange(nb + ny), tau]
    if policy == "quantity":
        return [np.arange(nb), np.arange(nb, nb + ny), tau]
    y_off = nb + np.concatenate([[0], np.cumsum(test_sizes)])
    blocks = [
        np.concatenate([np.arange(i * p, (i + 1) * p), np.arange(y_off[i], y_off[i + 1])]) for i in range(n_test)
    ]
    return blocks + [tau]


def resolve_policy(policy: str, dim: int, T: int) -> str:
    if policy == "auto":
        return "joint" if dim <= T // 2 else "point"
    return policy


def combine(stores, method: str, policy: str = "auto") -> CombinedStore:
    """Combine subset DrawStores column block by column block."""
    stores = list(stores)
    if not stores:
        raise ValueError("no subset draws to combine")
    first = stores[0]
    for s in stores[1:]:
        if s.p != first.p or not np.array_equal(s.test_points, first.test_points):
            raise ValueError("subset draws disagree on test points or p")
    method = Method(method).value
    mats = [s.matrix() for s in stores]
    T = min(m.shape[0] for m in mats)
    dim = mats[0].shape[1] - 1
    resolved = resolve_policy(policy, dim, T)
    blocks = block_columns(first.n_test, first.p, first.test_sizes, T, resolved)
    columns = first.column_names()

    if len(stores) == 1:
        # single subset: every method is the identity
        x = mats[0].copy()
        if method == Method.PIE.value:
            q = empirical_quantiles(x)
            return CombinedStore(method, resolved, q, columns, first.test_points, first.test_sizes, first.p,
                                 levels=PIE_LEVELS.copy(), mean=q.mean(axis=0), info={"k": 1})
        return CombinedStore(method, resolved, x, columns, first.test_points, first.test_sizes, first.p,
                             mean=x.mean(axis=0), info={"k": 1})

    n_rows = PIE_LEVELS.size if method == "pie" else (T if method == "cmc" else sum(m.shape[0] for m in mats))
    out = np.empty((n_rows, dim + 1))
    mean = np.empty(dim + 1)
    info = {"k": len(stores), "blocks": len(blocks)}
    for cols in blocks:
        res = combine_matrix([m[:, cols] for m in mats], method)
        out[:, cols] = res.quantiles if method == "pie" else res.draws
        mean[cols] = res.combined_mean
        if "iterations" in res.info:
            info["max_wasp_iterations"] = max(info.get("max_wasp_iterations", 0), res.info["iterations"])
    levels = PIE_LEVELS.copy() if method == "pie" else None
    return CombinedStore(method, resolved, out, columns, first.test_points, first.test_sizes, first.p,
                         levels=levels, mean=mean, info=info)
