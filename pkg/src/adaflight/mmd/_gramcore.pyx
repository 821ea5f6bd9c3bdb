# cython: language_level=3, boundscheck=False, wraparound=False, cdivision=True
"""Compiled Gram kernels: the hot inner loop of every MMD evaluation.

Entry (i, j) is a function of rows i and j only, in a fixed summation
order over the feature dimension, so row permutations permute entries
bit-for-bit (same contract as the numpy fallback).
"""
import numpy as np
cimport numpy as cnp
from libc.math cimport exp

cnp.import_array()

BACKEND_NAME = "cython"


cdef void _gram_fill(double[:, ::1] X, double[:, ::1] Y,
                     double[::1] coef, double[::1] inv2s2,
                     double[:, ::1] out) noexcept nogil:
    cdef Py_ssize_t n = X.shape[0], m = Y.shape[0], d = X.shape[1]
    cdef Py_ssize_t nk = coef.shape[0]
    cdef Py_ssize_t i, j, k, u
    cdef double d2, diff, acc
    for i in range(n):
        for j in range(m):
            d2 = 0.0
            for k in range(d):
                diff = X[i, k] - Y[j, k]
                d2 += diff * diff
            acc = 0.0
            for u in range(nk):
                acc += coef[u] * exp(-d2 * inv2s2[u])
            out[i, j] = acc


def _run(X, Y, sigmas, weights, scaled):
    X = np.ascontiguousarray(X, dtype=np.float64)
    Y = np.ascontiguousarray(Y, dtype=np.float64)
    sig = np.asarray(sigmas, dtype=np.float64)
    w = np.asarray(weights, dtype=np.float64)
    coef = w / (sig * sig) if scaled else w.copy()
    inv2s2 = 1.0 / (2.0 * sig * sig)
    out = np.empty((X.shape[0], Y.shape[0]), dtype=np.float64)
    _gram_fill(X, Y, coef, inv2s2, out)
    return out


def multi_gram(X, Y, sigmas, weights):
    """Weighted sum of Gaussian Gram matrices, one per bandwidth."""
    return _run(X, Y, sigmas, weights, False)


def multi_gram_scaled(X, Y, sigmas, weights):
    """multi_gram with an extra 1/sigma^2 factor per term (gradient weights)."""
    return _run(X, Y, sigmas, weights, True)
