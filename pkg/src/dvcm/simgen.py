"""Synthetic data with known coefficient surfaces.

Index points are uniform on the unit square, each with a bivariate response.
Three latent processes with exponential kernels of decay 1, 2 and 3 are drawn
jointly over training and test points, so the true coefficients at the test
points are exact rather than re-conditioned.
"""

from __future__ import annotations

import json
from dataclasses import dataclass
from pathlib import Path

import numpy as np

from . import _seeding
from .kernels import KernelParams, Lags, cholesky_with_jitter, corr_from_lags
from .model import Dataset, beta_at_points

DEFAULT_ALPHA = (-2.0, 2.0, -2.0)
DEFAULT_PHI = (1.0, 2.0, 3.0)
DEFAULT_TAU2 = 0.1
DEFAULT_N_TEST = 300
DENSE_CAP = 8000


@dataclass(frozen=True)
class SimTruth:
    """Generating parameters; rows of ``nu0`` and ``beta0`` run over train then test points."""

    alpha0: np.ndarray
    Gamma0: np.ndarray
    tau2_0: float
    nu0: np.ndarray
    beta0: np.ndarray
    seed: int
    n_train: int
    phi: tuple[float, ...] = DEFAULT_PHI

    @property
    def beta_train(self) -> np.ndarray:
        return self.beta0[: self.n_train]

    @property
    def beta_test(self) -> np.ndarray:
        return self.beta0[self.n_train :]

    def to_dict(self) -> dict:
        return {
            "alpha0": self.alpha0.tolist(),
            "Gamma0": self.Gamma0.tolist(),
            "tau2_0": self.tau2_0,
            "nu0": self.nu0.tolist(),
            "beta0": self.beta0.tolist(),
            "seed": self.seed,
            "n_train": self.n_train,
            "phi": list(self.phi),
        }

    @classmethod
    def from_dict(cls, d: dict) -> "SimTruth":
        return cls(
            np.asarray(d["alpha0"], dtype=np.float64),
            np.asarray(d["Gamma0"], dtype=np.float64),
            float(d["tau2_0"]),
            np.asarray(d["nu0"], dtype=np.float64),
            np.asarray(d["beta0"], dtype=np.float64),
            int(d["seed"]),
            int(d["n_train"]),
            tuple(d.get("phi", DEFAULT_PHI)),
        )

    def save(self, path) -> None:
        Path(path).write_text(json.dumps(self.to_dict(), indent=1, sort_keys=True) + "\n")

    @classmethod
    def load(cls, path) -> "SimTruth":
        return cls.from_dict(json.loads(Path(path).read_text()))


def generate_simulation(
    n: int,
    n_test: int = DEFAULT_N_TEST,
    seed: int = 0,
    *,
    s: int = 2,
    alpha0=DEFAULT_ALPHA,
    phi=DEFAULT_PHI,
    tau2: float = DEFAULT_TAU2,
    gamma_high: float = 3.0,
    dense_cap: int = DENSE_CAP,
) -> tuple[Dataset, Dataset, SimTruth]:
    """Draw a training set, a test set and the truth behind both.

    ``p = q = len(alpha0)`` and ``d = 2``. Test responses are drawn from the
    same model so they can score predictions.
    """
    if n < 1 or n_test < 1:
        raise ValueError("need n >= 1 and n_test >= 1")
    total = n + n_test
    if total > dense_cap:
        raise MemoryError(f"{total} index points exceed the dense simulation cap {dense_cap}")
    alpha0 = np.asarray(alpha0, dtype=np.float64)
    p = q = alpha0.size
    if len(phi) != q:
        raise ValueError("one decay per latent process")
    rng = _seeding.derive_rng(seed, _seeding.SIMULATION)

    coords = rng.random((total, 2))
    Gamma0 = rng.uniform(0.0, gamma_high, size=(q, q))
    lags = Lags(coords)
    nu0 = np.empty((total, q))
    for a in range(q):
        chol, _ = cholesky_with_jitter(corr_from_lags(lags, KernelParams.exponential(phi[a])))
        nu0[:, a] = chol @ rng.standard_normal(total)
    beta0 = beta_at_points(alpha0, Gamma0, nu0)

    sizes = np.full(total, s)
    row_obs = np.repeat(np.arange(total), s)
    X = rng.standard_normal((total * s, p))
    y = np.einsum("rj,rj->r", X, beta0[row_obs]) + np.sqrt(tau2) * rng.standard_normal(total * s)

    cut = n * s
    train = Dataset(coords[:n], y[:cut], X[:cut], sizes[:n], q=q)
    test = Dataset(coords[n:], y[cut:], X[cut:], sizes[n:], q=q, ids=np.arange(n, total))
    truth = SimTruth(alpha0, Gamma0, float(tau2), nu0, beta0, int(seed), n, tuple(float(f) for f in phi))
    return train, test, truth


def replicate_runs(config=None, n_replicates: int = 1, base_seed: int = 0) -> list[int]:
    """Distinct deterministic seeds, one per replicate."""
    if n_replicates < 1:
        raise ValueError("n_replicates must be >= 1")
    seeds = [_seeding.derive_seed(base_seed, _seeding.REPLICATE, r) for r in range(n_replicates)]
    if len(set(seeds)) != len(seeds):
        raise RuntimeError("replicate seed collision")
    return seeds
