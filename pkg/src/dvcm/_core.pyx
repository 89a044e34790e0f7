# cython: boundscheck=False, wraparound=False, cdivision=True, initializedcheck=False
"""Compiled loops for lag matrices, correlation evaluation and design assembly."""
import numpy as np

from libc.math cimport exp, sqrt, pow


def pairwise_distance(const double[:, ::1] a, const double[:, ::1] b):
    cdef Py_ssize_t n1 = a.shape[0], n2 = b.shape[0], d = a.shape[1]
    cdef Py_ssize_t i, j, k
    cdef double acc, diff
    if b.shape[1] != d:
        raise ValueError("dimension mismatch between point sets")
    out = np.empty((n1, n2), dtype=np.float64)
    cdef double[:, ::1] o = out
    for i in range(n1):
        for j in range(n2):
            acc = 0.0
            for k in range(d):
                diff = a[i, k] - b[j, k]
                acc += diff * diff
            o[i, j] = sqrt(acc)
    return out


def exp_corr(const double[:, ::1] dist, double phi):
    cdef Py_ssize_t n1 = dist.shape[0], n2 = dist.shape[1], i, j
    out = np.empty((n1, n2), dtype=np.float64)
    cdef double[:, ::1] o = out
    for i in range(n1):
        for j in range(n2):
            o[i, j] = exp(-phi * dist[i, j])
    return out


def gneiting_corr(const double[:, ::1] space_dist, const double[:, ::1] time_sq,
                  double phi, double psi, double kappa):
    cdef Py_ssize_t n1 = space_dist.shape[0], n2 = space_dist.shape[1], i, j
    cdef double base, denom
    out = np.empty((n1, n2), dtype=np.float64)
    cdef double[:, ::1] o = out
    for i in range(n1):
        for j in range(n2):
            base = psi * time_sq[i, j] + 1.0
            denom = pow(base, kappa)
            o[i, j] = exp(-phi * space_dist[i, j] / sqrt(denom)) / denom
    return out


def kron_design(const double[:, ::1] X, const double[:, ::1] nu_rows, Py_ssize_t q):
    cdef Py_ssize_t S = X.shape[0], p = X.shape[1], r, c, b, k
    if nu_rows.shape[0] != S or nu_rows.shape[1] != q or q > p:
        raise ValueError("dimension mismatch in design assembly")
    out = np.empty((S, p + q * q), dtype=np.float64)
    cdef double[:, ::1] o = out
    for r in range(S):
        for k in range(p):
            o[r, k] = X[r, k]
        for c in range(q):
            for b in range(q):
                o[r, p + c * q + b] = nu_rows[r, c] * X[r, b]
    return out
