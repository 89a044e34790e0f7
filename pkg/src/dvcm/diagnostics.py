"""Accuracy and efficiency metrics for posterior draws."""

from __future__ import annotations

import math
import warnings
from dataclasses import asdict, dataclass

import numpy as np


@dataclass(frozen=True)
class MetricReport:
    mse: float
    mspe: float
    coverage: float
    mean_ci_length: float
    comp_efficiency: float
    ess_total: float
    tau2_lower: float = float("nan")
    tau2_upper: float = float("nan")
    y_coverage: float = float("nan")

    def __post_init__(self):
        if not (0.0 <= self.coverage <= 1.0 or math.isnan(self.coverage)):
            raise ValueError("coverage must lie in [0, 1]")
        if self.mean_ci_length < 0:
            raise ValueError("interval lengths must be non-negative")

    def to_dict(self) -> dict:
        return asdict(self)

    def to_text(self, keys=None) -> str:
        d = self.to_dict()
        keys = keys or list(d)
        return "".join(f"{k}={d[k]!r}\n" for k in keys)


def _pair(a, b):
    a = np.asarray(a, dtype=np.float64)
    b = np.asarray(b, dtype=np.float64)
    if a.shape != b.shape:
        raise ValueError(f"shape mismatch {a.shape} vs {b.shape}")
    return a, b


def mse(beta_hat, beta_true) -> float:
    """``(1/|U*|) sum_i sum_j (beta_hat_j(u_i) - beta_j(u_i))^2`` for ``(n_test, p)`` inputs."""
    a, b = _pair(beta_hat, beta_true)
    a, b = np.atleast_2d(a), np.atleast_2d(b)
    return float(np.sum((a - b) ** 2) / a.shape[0])


def mspe(y_hat, y_true, n_test: int | None = None) -> float:
    """Squared prediction error summed over responses, averaged over test points.

    A 2-D input is read as ``(n_test, s)``. A flat input is one response per
    test point unless ``n_test`` says otherwise.
    """
    a, b = _pair(y_hat, y_true)
    n = n_test if n_test is not None else (a.shape[0] if a.ndim > 1 else a.size)
    return float(np.sum((a - b) ** 2) / n)


def coverage_and_length(draws, truth, level: float = 0.95) -> tuple[float, float]:
    """Equal-tailed interval coverage and mean length over scalar quantities.

    ``draws`` is ``(T, n_quantities)``; ``truth`` has ``n_quantities`` entries.
    """
    x = np.asarray(draws, dtype=np.float64)
    if x.ndim == 1:
        x = x[:, None]
    if x.shape[0] < 2:
        raise ValueError("need at least two draws per quantity")
    truth = np.asarray(truth, dtype=np.float64).ravel()
    if truth.size != x.shape[1]:
        raise ValueError("one truth per quantity required")
    lo = np.quantile(x, (1 - level) / 2, axis=0)
    hi = np.quantile(x, 1 - (1 - level) / 2, axis=0)
    return interval_coverage(lo, hi, truth)


def interval_coverage(lower, upper, truth) -> tuple[float, float]:
    lower, upper, truth = (np.asarray(v, dtype=np.float64).ravel() for v in (lower, upper, truth))
    inside = (truth >= lower) & (truth <= upper)
    return float(inside.mean()), float(np.mean(upper - lower))


def _autocovariance(x) -> np.ndarray:
    n = x.size
    c = x - x.mean()
    size = 1 << (2 * n - 1).bit_length()
    f = np.fft.rfft(c, size)
    return np.fft.irfft(f * np.conj(f), size)[:n] / n


def effective_sample_size(chain) -> float:
    """Effective sample size by Geyer's initial positive sequence estimator.

    Autocorrelations are summed in adjacent pairs until a pair sum turns
    non-positive. The result is clipped to ``(0, T]``; a constant chain gives 0
    with a warning.
    """
    x = np.asarray(chain, dtype=np.float64).ravel()
    T = x.size
    if T < 10:
        raise ValueError("need at least 10 draws")
    acov = _autocovariance(x)
    if not acov[0] > 0:
        warnings.warn("constant chain; effective sample size is 0", RuntimeWarning, stacklevel=2)
        return 0.0
    rho = acov / acov[0]
    tau = -1.0
    for k in range(0, T - 1, 2):
        pair = rho[k] + rho[k + 1]
        if pair <= 0:
            break
        tau += 2.0 * pair
    tau = max(tau, 1.0 / T)
    return float(min(T / tau, T))


def ess_total(draws) -> float:
    """Sum of effective sample sizes over the columns of ``(T, dim)`` draws."""
    x = np.asarray(draws, dtype=np.float64)
    if x.ndim == 1:
        x = x[:, None]
    total = 0.0
    with warnings.catch_warnings():
        warnings.simplefilter("ignore", RuntimeWarning)
        for c in range(x.shape[1]):
            total += effective_sample_size(x[:, c])
    return total


def computational_efficiency(ess_total: float, wall_hours: float) -> float:
    """``log2(ESS) / hours``."""
    if not wall_hours > 0:
        raise ValueError("wall time must be positive")
    if not ess_total > 0:
        raise ValueError("effective sample size must be positive")
    return math.log2(ess_total) / wall_hours


def report_from_combined(combined, beta_true, y_true=None, wall_hours=None, level: float = 0.95) -> MetricReport:
    """Metrics for a :class:`dvcm.combiner.CombinedStore` (or anything with the same accessors)."""
    beta_true = np.asarray(beta_true, dtype=np.float64)
    beta_hat = combined.beta_mean()
    lo, hi = combined.beta_interval(level)
    cov, length = interval_coverage(lo, hi, beta_true)
    y_err = y_cov = float("nan")
    if y_true is not None and np.all(np.isfinite(y_true)):
        y_err = mspe(combined.y_mean(), y_true, n_test=combined.n_test)
        ylo, yhi = combined.y_interval(level)
        y_cov, _ = interval_coverage(ylo, yhi, y_true)
    t_lo, t_hi = combined.tau2_interval(level)
    ess = float("nan") if combined.is_quantile else ess_total(combined.draws)
    eff = float("nan")
    if wall_hours is not None and ess == ess and ess > 0:
        eff = computational_efficiency(ess, wall_hours)
    return MetricReport(mse(beta_hat, beta_true), y_err, cov, length, eff, ess, t_lo, t_hi, y_cov)
