"""Correlation families, parameter transforms and correlation-matrix builders.

Two strictly positive correlation families are supported:

* ``exponential``: ``exp(-phi * ||u - u'||)`` with parameters ``(phi,)``.
* ``gneiting``: nonseparable space-time correlation on ``u = (h, t)``,
  ``(psi |t - t'|^2 + 1)^-kappa * exp(-phi ||h - h'|| / (psi |t - t'|^2 + 1)^(kappa/2))``
  with parameters ``(phi, psi, kappa)``. The last coordinate is time.

Points are passed either as ``(n, d)`` arrays or as sequences of objects with a
``coords`` attribute (see :class:`dvcm.model.IndexPoint`).
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from enum import Enum
from functools import cached_property

import numpy as np
from scipy.linalg import solve_triangular

from . import _backend
from .errors import FactorizationError


class KernelFamily(str, Enum):
    EXPONENTIAL = "exponential"
    GNEITING = "gneiting"

    @property
    def arity(self) -> int:
        return 1 if self is KernelFamily.EXPONENTIAL else 3

    @property
    def param_names(self) -> tuple[str, ...]:
        return ("phi",) if self is KernelFamily.EXPONENTIAL else ("phi", "psi", "kappa")


@dataclass(frozen=True)
class KernelParams:
    """A correlation family together with its parameter values."""

    family: KernelFamily
    values: tuple[float, ...]

    def __post_init__(self):
        family = KernelFamily(self.family)
        values = tuple(float(v) for v in np.atleast_1d(self.values))
        object.__setattr__(self, "family", family)
        object.__setattr__(self, "values", values)
        if len(values) != family.arity:
            raise ValueError(
                f"{family.value} kernel takes {family.arity} parameter(s), got {len(values)}"
            )
        if not all(math.isfinite(v) for v in values):
            raise ValueError("kernel parameters must be finite")
        if values[0] <= 0:
            raise ValueError("phi must be positive")
        if family is KernelFamily.GNEITING:
            if values[1] <= 0:
                raise ValueError("psi must be positive")
            if not 0.0 <= values[2] <= 1.0:
                raise ValueError("kappa must lie in [0, 1]")

    @classmethod
    def exponential(cls, phi: float) -> "KernelParams":
        return cls(KernelFamily.EXPONENTIAL, (phi,))

    @classmethod
    def gneiting(cls, phi: float, psi: float, kappa: float) -> "KernelParams":
        return cls(KernelFamily.GNEITING, (phi, psi, kappa))

    def as_array(self) -> np.ndarray:
        return np.array(self.values)


@dataclass(frozen=True)
class PriorRange:
    """Component-wise bounds of independent uniform priors."""

    lower: tuple[float, ...]
    upper: tuple[float, ...]

    def __post_init__(self):
        lower = tuple(float(v) for v in np.atleast_1d(self.lower))
        upper = tuple(float(v) for v in np.atleast_1d(self.upper))
        object.__setattr__(self, "lower", lower)
        object.__setattr__(self, "upper", upper)
        if len(lower) != len(upper):
            raise ValueError("lower and upper bounds differ in length")
        if not all(lo < hi for lo, hi in zip(lower, upper)):
            raise ValueError("prior range requires lower < upper component-wise")

    @classmethod
    def default(cls, family: KernelFamily | str) -> "PriorRange":
        family = KernelFamily(family)
        if family is KernelFamily.EXPONENTIAL:
            return cls((0.1,), (10.0,))
        return cls((0.1, 0.1, 0.01), (10.0, 10.0, 1.0))

    def check_family(self, family: KernelFamily | str) -> None:
        family = KernelFamily(family)
        if len(self.lower) != family.arity:
            raise ValueError(f"prior range arity does not match {family.value} kernel")
        if self.lower[0] <= 0:
            raise ValueError("phi prior must be supported on positive values")
        if family is KernelFamily.GNEITING:
            if self.lower[1] <= 0:
                raise ValueError("psi prior must be supported on positive values")
            if self.lower[2] <= 0 or self.upper[2] > 1:
                raise ValueError("kappa prior must satisfy 0 < lower < upper <= 1")

    @property
    def lower_array(self) -> np.ndarray:
        return np.array(self.lower)

    @property
    def upper_array(self) -> np.ndarray:
        return np.array(self.upper)

    def midpoint(self) -> np.ndarray:
        return 0.5 * (self.lower_array + self.upper_array)

    def contains(self, values) -> bool:
        v = np.asarray(values, dtype=float)
        return bool(np.all(v > self.lower_array) and np.all(v < self.upper_array))


# ---------------------------------------------------------------------------
# factorization with diagonal jitter


@dataclass(frozen=True)
class JitterPolicy:
    """Escalating diagonal regularization used when a Cholesky factorization fails.

    The first attempt uses no jitter. Jitter then starts at ``start * scale``
    and is multiplied by ``factor`` until ``cap * scale`` is exceeded.
    """

    start: float = 1e-10
    factor: float = 10.0
    cap: float = 1e-4

    def levels(self, scale: float = 1.0):
        level = self.start
        while level <= self.cap * (1 + 1e-9):
            yield level * scale
            level *= self.factor


DEFAULT_JITTER = JitterPolicy()


def cholesky_with_jitter(
    matrix: np.ndarray, policy: JitterPolicy | None = None, scale: float = 1.0
) -> tuple[np.ndarray, float]:
    """Lower Cholesky factor of ``matrix + jitter * I`` and the jitter used."""
    policy = policy or DEFAULT_JITTER
    matrix = np.asarray(matrix, dtype=np.float64)
    if not np.all(np.isfinite(matrix)):
        raise FactorizationError("matrix has non-finite entries")
    try:
        return np.linalg.cholesky(matrix), 0.0
    except np.linalg.LinAlgError:
        pass
    eye = np.eye(matrix.shape[0])
    for jitter in policy.levels(scale):
        try:
            return np.linalg.cholesky(matrix + jitter * eye), jitter
        except np.linalg.LinAlgError:
            continue
    raise FactorizationError(
        f"Cholesky factorization failed at maximum jitter {policy.cap * scale:.3g}"
    )


# ---------------------------------------------------------------------------
# scalar evaluation


def _coords(point) -> np.ndarray:
    return np.asarray(getattr(point, "coords", point), dtype=np.float64)


def as_coords(points) -> np.ndarray:
    """Stack points into a C-contiguous ``(n, d)`` float array."""
    if isinstance(points, np.ndarray):
        arr = points.astype(np.float64, copy=False)
    else:
        arr = np.array([_coords(p) for p in points], dtype=np.float64)
    if arr.ndim == 1:
        arr = arr[:, None]
    return np.ascontiguousarray(arr)


def eval_exponential(u, u2, phi: float) -> float:
    """``exp(-phi * ||u - u2||_2)`` for a single pair of points."""
    a, b = _coords(u), _coords(u2)
    if a.shape != b.shape:
        raise ValueError("dimension mismatch between points")
    if not phi > 0:
        raise ValueError("phi must be positive")
    dist = math.sqrt(sum((x - y) ** 2 for x, y in zip(a.tolist(), b.tolist())))
    return math.exp(-phi * dist)


def eval_gneiting(u, u2, params: KernelParams) -> float:
    """Gneiting space-time correlation for one pair; the last coordinate is time."""
    if params.family is not KernelFamily.GNEITING:
        raise ValueError("eval_gneiting needs Gneiting parameters")
    a, b = _coords(u), _coords(u2)
    if a.shape != b.shape or a.size < 2:
        raise ValueError("Gneiting points need matching dimension d >= 2")
    phi, psi, kappa = params.values
    h = math.sqrt(sum((x - y) ** 2 for x, y in zip(a[:-1].tolist(), b[:-1].tolist())))
    base = psi * (a[-1] - b[-1]) ** 2 + 1.0
    return base ** (-kappa) * math.exp(-phi * h / base ** (kappa / 2.0))


def eval_kernel(u, u2, params: KernelParams) -> float:
    if params.family is KernelFamily.EXPONENTIAL:
        return eval_exponential(u, u2, params.values[0])
    return eval_gneiting(u, u2, params)


# ---------------------------------------------------------------------------
# vectorized construction


class Lags:
    """Lazily computed lag matrices between two point sets.

    Lags do not depend on kernel parameters, so samplers build them once and
    re-evaluate correlations cheaply for every proposed parameter value.
    """

    def __init__(self, a, b=None):
        self.a = as_coords(a)
        self.symmetric = b is None
        self.b = self.a if b is None else as_coords(b)
        if self.a.shape[1] != self.b.shape[1]:
            raise ValueError("dimension mismatch between point sets")

    @property
    def shape(self) -> tuple[int, int]:
        return self.a.shape[0], self.b.shape[0]

    @cached_property
    def dist(self) -> np.ndarray:
        return _backend.pairwise_distance(self.a, self.b)

    @cached_property
    def space_dist(self) -> np.ndarray:
        if self.a.shape[1] < 2:
            raise ValueError("Gneiting kernel needs at least one spatial and one time coordinate")
        return _backend.pairwise_distance(
            np.ascontiguousarray(self.a[:, :-1]), np.ascontiguousarray(self.b[:, :-1])
        )

    @cached_property
    def time_sq(self) -> np.ndarray:
        dt = self.a[:, -1][:, None] - self.b[:, -1][None, :]
        return np.ascontiguousarray(dt * dt)


def corr_from_lags(lags: Lags, kernel: KernelParams) -> np.ndarray:
    if kernel.family is KernelFamily.EXPONENTIAL:
        return _backend.exp_corr(lags.dist, kernel.values[0])
    phi, psi, kappa = kernel.values
    return _backend.gneiting_corr(lags.space_dist, lags.time_sq, phi, psi, kappa)


@dataclass(frozen=True)
class CorrMatrix:
    """Correlation matrix with the jitter its Cholesky factor needed.

    ``entries`` holds the unjittered correlations; ``chol`` factors
    ``entries + jitter * I``.
    """

    entries: np.ndarray
    jitter: float
    chol: np.ndarray = field(repr=False)

    @property
    def dim(self) -> int:
        return self.entries.shape[0]

    @property
    def regularized(self) -> np.ndarray:
        return self.entries + self.jitter * np.eye(self.dim)


def build_corr_matrix(
    points, kernel: KernelParams, jitter_policy: JitterPolicy | None = None, lags: Lags | None = None
) -> CorrMatrix:
    """Correlation matrix of ``points`` under ``kernel``, factorized with jitter if needed."""
    lags = lags if lags is not None else Lags(points)
    if lags.shape[0] == 0:
        raise ValueError("need at least one point")
    entries = corr_from_lags(lags, kernel)
    chol, jitter = cholesky_with_jitter(entries, jitter_policy)
    return CorrMatrix(entries, jitter, chol)


def build_cross_corr(train, test, kernel: KernelParams) -> np.ndarray:
    """Rectangular matrix of ``kernel(train_i, test_j)``."""
    lags = Lags(train, test)
    if 0 in lags.shape:
        raise ValueError("need at least one point in each set")
    return corr_from_lags(lags, kernel)


# ---------------------------------------------------------------------------
# bounded <-> unbounded parameter transforms


def _values(theta) -> np.ndarray:
    if isinstance(theta, KernelParams):
        return theta.as_array()
    return np.atleast_1d(np.asarray(theta, dtype=np.float64))


def to_unconstrained(theta, prior_range: PriorRange) -> np.ndarray:
    """Component-wise ``log((theta - lower) / (upper - theta))``."""
    v = _values(theta)
    lo, hi = prior_range.lower_array, prior_range.upper_array
    if v.shape != lo.shape:
        raise ValueError("parameter and range dimensions differ")
    if not (np.all(v > lo) and np.all(v < hi)):
        raise ValueError("parameter must lie strictly inside its prior range")
    return np.log(v - lo) - np.log(hi - v)


def from_unconstrained(
    z, prior_range: PriorRange, family: KernelFamily | str | None = None
) -> KernelParams:
    """Inverse of :func:`to_unconstrained`; results stay strictly inside the range."""
    z = np.atleast_1d(np.asarray(z, dtype=np.float64))
    if not np.all(np.isfinite(z)):
        raise ValueError("unconstrained parameters must be finite")
    lo, hi = prior_range.lower_array, prior_range.upper_array
    if z.shape != lo.shape:
        raise ValueError("parameter and range dimensions differ")
    if family is None:
        family = KernelFamily.EXPONENTIAL if z.size == 1 else KernelFamily.GNEITING
    # 1/(1+exp(-z)) computed without overflow for large negative z
    sig = np.where(z >= 0, 1.0 / (1.0 + np.exp(-np.abs(z))), np.exp(-np.abs(z)) / (1.0 + np.exp(-np.abs(z))))
    theta = lo + (hi - lo) * sig
    theta = np.minimum(np.maximum(theta, np.nextafter(lo, hi)), np.nextafter(hi, lo))
    return KernelParams(family, tuple(theta))


def log_jacobian(z, prior_range: PriorRange) -> float:
    """``log |d theta / d z|`` summed over components."""
    z = np.atleast_1d(np.asarray(z, dtype=np.float64))
    width = prior_range.upper_array - prior_range.lower_array
    return float(np.sum(np.log(width) + z - 2.0 * np.logaddexp(0.0, z)))


# ---------------------------------------------------------------------------
# FITC low-rank approximation


@dataclass(frozen=True)
class FitcFactor:
    """Inducing-point approximation ``cross K_rr^-1 cross^T + diag(diag_correction)``.

    ``inducing_index`` is set when the inducing points are a subsample of the
    training points; it holds their positions among the training points.
    """

    inducing_points: np.ndarray
    cross: np.ndarray
    inducing_corr: CorrMatrix
    diag_correction: np.ndarray
    inducing_index: np.ndarray | None = None

    @property
    def rank(self) -> int:
        return self.inducing_points.shape[0]

    @cached_property
    def whitened(self) -> np.ndarray:
        """``L^-1 cross^T`` with ``L L^T`` the factorized inducing correlation."""
        return solve_triangular(self.inducing_corr.chol, self.cross.T, lower=True, check_finite=False)

    def nystrom(self) -> np.ndarray:
        a = self.whitened
        return a.T @ a

    def reconstruct(self) -> np.ndarray:
        return self.nystrom() + np.diag(self.diag_correction)


def select_inducing(points, r: int, selection_seed: int, grid: bool = False):
    """Inducing points: a seeded uniform subsample of ``points``, or a regular grid.

    Returns ``(coords, index)`` where ``index`` is ``None`` for the grid.
    """
    coords = as_coords(points)
    n, d = coords.shape
    if not 1 <= r <= n:
        raise ValueError("inducing rank must satisfy 1 <= r <= n")
    if grid:
        per_axis = int(math.ceil(r ** (1.0 / d) - 1e-9))
        axis = (np.arange(per_axis) + 0.5) / per_axis
        mesh = np.stack(np.meshgrid(*([axis] * d), indexing="ij"), axis=-1).reshape(-1, d)
        pick = np.unique(np.linspace(0, mesh.shape[0] - 1, r).round().astype(int))
        return np.ascontiguousarray(mesh[pick]), None
    rng = np.random.default_rng(selection_seed)
    index = np.sort(rng.choice(n, size=r, replace=False))
    return np.ascontiguousarray(coords[index]), index


def fitc_approx(
    points,
    kernel: KernelParams,
    r: int,
    selection_seed: int = 0,
    grid: bool = False,
    jitter_policy: JitterPolicy | None = None,
) -> FitcFactor:
    """FITC factor with exact unit diagonal for ``points`` under ``kernel``."""
    coords = as_coords(points)
    inducing, index = select_inducing(coords, r, selection_seed, grid)
    k_rr = build_corr_matrix(inducing, kernel, jitter_policy)
    cross = corr_from_lags(Lags(coords, inducing), kernel)
    a = solve_triangular(k_rr.chol, cross.T, lower=True, check_finite=False)
    q_diag = np.einsum("ij,ij->j", a, a)
    diag_correction = np.maximum(1.0 - q_diag, 0.0)
    return FitcFactor(inducing, cross, k_rr, diag_correction, index)


__all__ = [
    "KernelFamily",
    "KernelParams",
    "PriorRange",
    "JitterPolicy",
    "DEFAULT_JITTER",
    "cholesky_with_jitter",
    "as_coords",
    "eval_exponential",
    "eval_gneiting",
    "eval_kernel",
    "Lags",
    "corr_from_lags",
    "CorrMatrix",
    "build_corr_matrix",
    "build_cross_corr",
    "to_unconstrained",
    "from_unconstrained",
    "log_jacobian",
    "FitcFactor",
    "select_inducing",
    "fitc_approx",
]
