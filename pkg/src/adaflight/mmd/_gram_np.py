"""Pure-numpy Gram kernels. Fallback backend for the compiled core.

Every entry of the returned matrices depends only on the two rows it
compares, never on their position, so permuting input rows permutes
entries exactly (bit-for-bit).
"""
import numpy as np

BACKEND_NAME = "numpy"


def _sqdists(X, Y):
    XX = np.einsum("ij,ij->i", X, X)
    YY = np.einsum("ij,ij->i", Y, Y)
    D2 = XX[:, None] + YY[None, :] - 2.0 * (X @ Y.T)
    np.maximum(D2, 0.0, out=D2)
    return D2


def multi_gram(X, Y, sigmas, weights):
    """Weighted sum of Gaussian Gram matrices, one per bandwidth."""
    D2 = _sqdists(X, Y)
    K = np.zeros_like(D2)
    for s, w in zip(sigmas, weights):
        K += w * np.exp(D2 / (-2.0 * s * s))
    return K


def multi_gram_scaled(X, Y, sigmas, weights):
    """Like multi_gram but each term carries an extra 1/sigma^2 factor.

    This is the weight matrix that appears in the gradient of the squared
    MMD under a Gaussian mixture kernel.
    """
    D2 = _sqdists(X, Y)
    K = np.zeros_like(D2)
    for s, w in zip(sigmas, weights):
        K += (w / (s * s)) * np.exp(D2 / (-2.0 * s * s))
    return K
