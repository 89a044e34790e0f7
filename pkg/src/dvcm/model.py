"""Indexed functional data and the mixed-effects form of the varying coefficient model.

The model for observation ``i`` at index ``u_i`` is::

    y(u_i) = X(u_i) alpha + Z(u_i) Gamma nu(u_i) + eps,   eps ~ N(0, tau2 I)

where ``Z`` holds the first ``q`` columns of ``X`` and ``nu`` stacks ``q``
independent unit-variance Gaussian processes. The varying coefficients are
``beta_va(u) = alpha_va + Gamma nu(u)``; the remaining ``p - q`` are constant.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import Sequence

import numpy as np

from . import _backend
from .kernels import KernelFamily, KernelParams, PriorRange


@dataclass(frozen=True)
class IndexPoint:
    coords: tuple[float, ...]

    def __post_init__(self):
        coords = tuple(float(c) for c in np.atleast_1d(self.coords))
        if len(coords) < 1:
            raise ValueError("index points need at least one coordinate")
        if not all(0.0 <= c <= 1.0 for c in coords):
            raise ValueError(f"index coordinates must lie in [0, 1], got {coords}")
        object.__setattr__(self, "coords", coords)

    @property
    def d(self) -> int:
        return len(self.coords)


@dataclass(frozen=True)
class Observation:
    u: IndexPoint
    y: np.ndarray
    X: np.ndarray

    def __post_init__(self):
        y = np.atleast_1d(np.asarray(self.y, dtype=np.float64))
        X = np.atleast_2d(np.asarray(self.X, dtype=np.float64))
        if not isinstance(self.u, IndexPoint):
            object.__setattr__(self, "u", IndexPoint(self.u))
        if y.ndim != 1 or y.size < 1:
            raise ValueError("response must be a non-empty vector")
        if X.shape[0] != y.size:
            raise ValueError("covariate rows must match response length")
        object.__setattr__(self, "y", y)
        object.__setattr__(self, "X", X)

    @property
    def s(self) -> int:
        return self.y.size

    @property
    def p(self) -> int:
        return self.X.shape[1]


class Dataset:
    """Observations packed into contiguous arrays.

    Response rows of one observation are contiguous; ``row_obs[r]`` gives the
    observation a row belongs to. Index points need not be distinct.
    """

    def __init__(self, coords, y, X, sizes, q: int | None = None, ids=None):
        coords = np.ascontiguousarray(np.atleast_2d(np.asarray(coords, dtype=np.float64)))
        y = np.ascontiguousarray(np.asarray(y, dtype=np.float64).ravel())
        X = np.ascontiguousarray(np.atleast_2d(np.asarray(X, dtype=np.float64)))
        sizes = np.asarray(sizes, dtype=np.int64).ravel()
        n, d = coords.shape
        if n < 1:
            raise ValueError("no observations")
        if sizes.size != n or np.any(sizes < 1):
            raise ValueError("every observation needs at least one response row")
        if y.size != sizes.sum() or X.shape[0] != y.size:
            raise ValueError("response rows do not match observation sizes")
        if np.any(coords < 0) or np.any(coords > 1) or not np.all(np.isfinite(coords)):
            raise ValueError("index coordinates must lie in [0, 1]")
        p = X.shape[1]
        q = p if q is None else int(q)
        if not 1 <= q <= p:
            raise ValueError("need 1 <= q <= p")
        self.coords = coords
        self.y = y
        self.X = X
        self.sizes = sizes
        self.offsets = np.concatenate([[0], np.cumsum(sizes)])
        self.row_obs = np.repeat(np.arange(n), sizes)
        self.p, self.q, self.d = p, q, d
        self.ids = np.arange(n) if ids is None else np.asarray(ids, dtype=np.int64)
        if self.ids.size != n:
            raise ValueError("one id per observation required")

    @classmethod
    def from_observations(cls, observations: Sequence[Observation], q: int | None = None, ids=None):
        observations = list(observations)
        if not observations:
            raise ValueError("no observations")
        p, d = observations[0].p, observations[0].u.d
        for ob in observations:
            if ob.p != p or ob.u.d != d:
                raise ValueError("observations disagree on p or d")
        return cls(
            np.array([ob.u.coords for ob in observations]),
            np.concatenate([ob.y for ob in observations]),
            np.vstack([ob.X for ob in observations]),
            [ob.s for ob in observations],
            q=q,
            ids=ids,
        )

    @property
    def n(self) -> int:
        return self.coords.shape[0]

    @property
    def n_rows(self) -> int:
        return self.y.size

    @property
    def Z(self) -> np.ndarray:
        return self.X[:, : self.q]

    @property
    def points(self) -> list[IndexPoint]:
        return [IndexPoint(tuple(c)) for c in self.coords]

    @property
    def observations(self) -> list[Observation]:
        out = []
        for i in range(self.n):
            lo, hi = self.offsets[i], self.offsets[i + 1]
            out.append(Observation(IndexPoint(tuple(self.coords[i])), self.y[lo:hi], self.X[lo:hi]))
        return out

    def rows_of(self, i: int) -> slice:
        return slice(int(self.offsets[i]), int(self.offsets[i + 1]))

    def subset(self, indices) -> "Dataset":
        indices = np.asarray(indices, dtype=np.int64)
        rows = np.concatenate([np.arange(self.offsets[i], self.offsets[i + 1]) for i in indices])
        return Dataset(
            self.coords[indices], self.y[rows], self.X[rows], self.sizes[indices], q=self.q, ids=self.ids[indices]
        )

    def __len__(self) -> int:
        return self.n

    def __repr__(self) -> str:
        return f"Dataset(n={self.n}, rows={self.n_rows}, p={self.p}, q={self.q}, d={self.d})"


@dataclass(frozen=True)
class ModelSpec:
    p: int
    q: int
    d: int
    kernel_families: tuple[KernelFamily, ...]
    prior_ranges: tuple[PriorRange, ...]
    delta: float = 1.0
    fitc_rank: int | None = None
    fitc_grid: bool = False

    def __post_init__(self):
        families = tuple(KernelFamily(f) for f in self.kernel_families)
        object.__setattr__(self, "kernel_families", families)
        object.__setattr__(self, "prior_ranges", tuple(self.prior_ranges))
        if not 1 <= self.q <= self.p:
            raise ValueError("need 1 <= q <= p")
        if self.d < 1:
            raise ValueError("need d >= 1")
        if len(families) != self.q or len(self.prior_ranges) != self.q:
            raise ValueError("one kernel family and prior range per varying coefficient")
        for fam, rng in zip(families, self.prior_ranges):
            rng.check_family(fam)
            if fam is KernelFamily.GNEITING and self.d < 2:
                raise ValueError("Gneiting kernel needs d >= 2")
        if self.delta < 1:
            raise ValueError("tempering power delta must be >= 1")
        if self.fitc_rank is not None and self.fitc_rank < 1:
            raise ValueError("fitc_rank must be positive")

    @classmethod
    def build(cls, p, q, d, family="exponential", prior_ranges=None, **kwargs) -> "ModelSpec":
        families = (family,) * q if isinstance(family, (str, KernelFamily)) else tuple(family)
        if prior_ranges is None:
            prior_ranges = tuple(PriorRange.default(f) for f in families)
        return cls(p, q, d, families, tuple(prior_ranges), **kwargs)

    def midpoint_theta(self) -> list[KernelParams]:
        return [KernelParams(f, tuple(r.midpoint())) for f, r in zip(self.kernel_families, self.prior_ranges)]

    @property
    def n_coef(self) -> int:
        return self.p + self.q * self.q


@dataclass
class ParamState:
    alpha: np.ndarray
    Gamma: np.ndarray
    tau2: float
    theta: list[KernelParams] = field(default_factory=list)

    def __post_init__(self):
        self.alpha = np.asarray(self.alpha, dtype=np.float64).ravel()
        self.Gamma = np.atleast_2d(np.asarray(self.Gamma, dtype=np.float64))
        if self.Gamma.shape[0] != self.Gamma.shape[1] or self.Gamma.shape[0] > self.alpha.size:
            raise ValueError("Gamma must be q x q with q <= p")
        if not self.tau2 > 0:
            raise ValueError("tau2 must be positive")

    @property
    def b(self) -> np.ndarray:
        """``(alpha, vec(Gamma))`` with ``Gamma`` stacked column by column."""
        return np.concatenate([self.alpha, self.Gamma.ravel(order="F")])

    @staticmethod
    def split_b(b, p: int, q: int) -> tuple[np.ndarray, np.ndarray]:
        b = np.asarray(b, dtype=np.float64)
        return b[:p].copy(), b[p:].reshape((q, q), order="F")


@dataclass
class LatentState:
    nu: np.ndarray

    def __post_init__(self):
        self.nu = np.atleast_2d(np.asarray(self.nu, dtype=np.float64))
        if not np.all(np.isfinite(self.nu)):
            raise ValueError("latent values must be finite")


def _packed(observations):
    if isinstance(observations, Dataset):
        return observations
    return Dataset.from_observations(observations)


def build_design_W(observations, nu_at_indices, q: int | None = None) -> np.ndarray:
    """Stack row blocks ``[X(u_i) | nu(u_i)^T kron Z(u_i)]``; shape ``(rows, p + q^2)``."""
    data = _packed(observations)
    nu = np.atleast_2d(np.asarray(nu_at_indices, dtype=np.float64))
    q = data.q if q is None else q
    if nu.shape != (data.n, q):
        raise ValueError(f"latent matrix must be {(data.n, q)}, got {nu.shape}")
    return _backend.kron_design(data.X, np.ascontiguousarray(nu[data.row_obs]), q)


def beta_from_state(alpha, Gamma, nu_at_point) -> np.ndarray:
    """Coefficients at one index: ``alpha_va + Gamma nu(u)`` then ``alpha_nv``."""
    alpha = np.asarray(alpha, dtype=np.float64)
    Gamma = np.atleast_2d(np.asarray(Gamma, dtype=np.float64))
    nu = np.asarray(nu_at_point, dtype=np.float64).ravel()
    q = Gamma.shape[0]
    if Gamma.shape != (q, q) or nu.size != q or alpha.size < q:
        raise ValueError("dimension mismatch between alpha, Gamma and nu")
    beta = alpha.copy()
    beta[:q] += Gamma @ nu
    return beta


def beta_at_points(alpha, Gamma, nu_points) -> np.ndarray:
    """Row-wise :func:`beta_from_state` for an ``(l, q)`` latent matrix."""
    alpha = np.asarray(alpha, dtype=np.float64)
    nu_points = np.atleast_2d(nu_points)
    q = Gamma.shape[0]
    beta = np.tile(alpha, (nu_points.shape[0], 1))
    beta[:, :q] += nu_points @ Gamma.T
    return beta


def mean_response(X_at_point, beta_at_point) -> np.ndarray:
    X = np.atleast_2d(np.asarray(X_at_point, dtype=np.float64))
    beta = np.asarray(beta_at_point, dtype=np.float64).ravel()
    if X.shape[1] != beta.size:
        raise ValueError("covariate columns must match coefficient length")
    return X @ beta
