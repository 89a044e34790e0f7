"""NumPy implementations of the compiled core, used when the extension is absent."""

import numpy as np


def pairwise_distance(a, b):
    a = np.ascontiguousarray(a, dtype=np.float64)
    b = np.ascontiguousarray(b, dtype=np.float64)
    if a.shape[1] != b.shape[1]:
        raise ValueError("dimension mismatch between point sets")
    diff = a[:, None, :] - b[None, :, :]
    return np.sqrt(np.einsum("ijk,ijk->ij", diff, diff))


def exp_corr(dist, phi):
    return np.exp(-phi * np.asarray(dist, dtype=np.float64))


def gneiting_corr(space_dist, time_sq, phi, psi, kappa):
    base = psi * np.asarray(time_sq, dtype=np.float64) + 1.0
    denom = base**kappa
    return np.exp(-phi * np.asarray(space_dist, dtype=np.float64) / np.sqrt(denom)) / denom


def kron_design(X, nu_rows, q):
    X = np.asarray(X, dtype=np.float64)
    nu_rows = np.asarray(nu_rows, dtype=np.float64)
    S, p = X.shape
    if nu_rows.shape != (S, q) or q > p:
        raise ValueError("dimension mismatch in design assembly")
    kron = nu_rows[:, :, None] * X[:, None, :q]
    return np.hstack([X, kron.reshape(S, q * q)])
