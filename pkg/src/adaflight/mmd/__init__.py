"""Gaussian multi-kernel machinery and squared-MMD estimators.

Distances between two sample sets are measured as the RKHS distance
between their kernel mean embeddings, estimated with biased (V-statistic),
unbiased (U-statistic) and linear-time forms, plus analytic gradients and
a permutation two-sample test.

All scalar reductions over Gram matrices use exact summation (math.fsum),
so shuffling the rows of either sample set leaves the biased and unbiased
estimates unchanged bit-for-bit. The linear estimator pairs samples in the
order given and is therefore order-dependent by construction.
"""
import math
from dataclasses import dataclass

import numpy as np
from scipy.spatial.distance import pdist

from ..errors import (
    DegenerateSampleError,
    InsufficientSamplesError,
    InvalidArgumentError,
)
from ._backend import BACKEND_NAME, multi_gram, multi_gram_scaled

__all__ = [
    "BACKEND_NAME",
    "KernelBank",
    "gaussian_kernel",
    "multi_kernel",
    "median_heuristic",
    "default_bank",
    "mmd2_biased",
    "mmd2_unbiased",
    "mmd2_linear",
    "mmd2_biased_grad",
    "permutation_test",
    "heuristic_kernel_weights",
]

_WEIGHT_SUM_TOL = 1e-12
# Negative rounding residue of the biased estimator is clamped to zero.
_CLAMP = 1e-12


@dataclass(frozen=True)
class KernelBank:
    """A convex mixture of Gaussian kernels: sum_u weights[u] * k_{sigma_u}."""

    bandwidths: tuple
    weights: tuple

    def __post_init__(self):
        bw = tuple(float(s) for s in self.bandwidths)
        w = tuple(float(b) for b in self.weights)
        object.__setattr__(self, "bandwidths", bw)
        object.__setattr__(self, "weights", w)
        if len(bw) != len(w) or len(bw) < 1:
            raise InvalidArgumentError("bandwidths and weights must have equal length >= 1")
        if any(s <= 0 or not math.isfinite(s) for s in bw):
            raise InvalidArgumentError("bandwidths must be finite and > 0")
        if any(b2 <= b1 for b1, b2 in zip(bw, bw[1:])):
            raise InvalidArgumentError("bandwidths must be strictly increasing")
        if any(b < 0 for b in w):
            raise InvalidArgumentError("weights must be non-negative")
        if abs(math.fsum(w) - 1.0) > _WEIGHT_SUM_TOL:
            raise InvalidArgumentError("weights must sum to 1")

    @classmethod
    def single(cls, sigma):
        return cls((sigma,), (1.0,))


def as_samples(X, name="samples"):
    """Validate and return an (n, d) float64 sample matrix."""
    X = np.asarray(X, dtype=np.float64)
    if X.ndim != 2 or X.shape[0] < 1 or X.shape[1] < 1:
        raise InvalidArgumentError(f"{name} must be a non-empty (n, d) matrix")
    if not np.all(np.isfinite(X)):
        raise InvalidArgumentError(f"{name} contains non-finite entries")
    return X


def _check_pair(Xs, Xt):
    Xs = as_samples(Xs, "Xs")
    Xt = as_samples(Xt, "Xt")
    if Xs.shape[1] != Xt.shape[1]:
        raise InvalidArgumentError(
            f"feature dimensions differ: {Xs.shape[1]} vs {Xt.shape[1]}"
        )
    return Xs, Xt


def _fsum(a):
    return math.fsum(np.ravel(a).tolist())


def gaussian_kernel(x, y, sigma):
    """Gaussian RBF kernel exp(-||x - y||^2 / (2 sigma^2)) of two vectors."""
    x = np.asarray(x, dtype=np.float64).ravel()
    y = np.asarray(y, dtype=np.float64).ravel()
    if x.shape != y.shape:
        raise InvalidArgumentError(f"dimension mismatch: {x.shape} vs {y.shape}")
    if not sigma > 0:
        raise InvalidArgumentError("sigma must be > 0")
    d = x - y
    return math.exp(-float(d @ d) / (2.0 * sigma * sigma))


def multi_kernel(x, y, bank):
    """Mixture kernel sum_u beta_u * k_{sigma_u}(x, y); equals 1 iff x == y."""
    return math.fsum(
        w * gaussian_kernel(x, y, s) for s, w in zip(bank.bandwidths, bank.weights)
    )


def median_heuristic(pooled):
    """Median of all pairwise Euclidean distances of the pooled samples."""
    pooled = as_samples(pooled, "pooled")
    if pooled.shape[0] < 2:
        raise InvalidArgumentError("median heuristic needs >= 2 samples")
    med = float(np.median(pdist(pooled)))
    if med <= 0.0:
        raise DegenerateSampleError("median pairwise distance is zero")
    return med


def default_bank(pooled):
    """Five-kernel geometric ladder around the median-heuristic bandwidth."""
    sm = median_heuristic(pooled)
    return KernelBank(
        (sm / 4.0, sm / 2.0, sm, 2.0 * sm, 4.0 * sm),
        (0.2, 0.2, 0.2, 0.2, 0.2),
    )


def mmd2_biased(Xs, Xt, bank):
    """Biased (V-statistic) squared MMD; non-negative by construction."""
    Xs, Xt = _check_pair(Xs, Xt)
    ns, nt = Xs.shape[0], Xt.shape[0]
    kss = _fsum(multi_gram(Xs, Xs, bank.bandwidths, bank.weights))
    ktt = _fsum(multi_gram(Xt, Xt, bank.bandwidths, bank.weights))
    kst = _fsum(multi_gram(Xs, Xt, bank.bandwidths, bank.weights))
    v = kss / (ns * ns) + ktt / (nt * nt) - 2.0 * kst / (ns * nt)
    return v if v > 0.0 else 0.0


def mmd2_unbiased(Xs, Xt, bank):
    """Unbiased (U-statistic) squared MMD; may be negative."""
    Xs, Xt = _check_pair(Xs, Xt)
    ns, nt = Xs.shape[0], Xt.shape[0]
    if ns < 2 or nt < 2:
        raise InsufficientSamplesError("unbiased estimator needs >= 2 samples per set")
    Kss = multi_gram(Xs, Xs, bank.bandwidths, bank.weights)
    Ktt = multi_gram(Xt, Xt, bank.bandwidths, bank.weights)
    Kst = multi_gram(Xs, Xt, bank.bandwidths, bank.weights)
    np.fill_diagonal(Kss, 0.0)
    np.fill_diagonal(Ktt, 0.0)
    return (
        _fsum(Kss) / (ns * (ns - 1))
        + _fsum(Ktt) / (nt * (nt - 1))
        - 2.0 * _fsum(Kst) / (ns * nt)
    )


def mmd2_linear(Xs, Xt, bank):
    """Linear-time estimator; unbiased but dependent on sample order."""
    Xs, Xt = _check_pair(Xs, Xt)
    m = min(Xs.shape[0], Xt.shape[0]) // 2
    if m < 1:
        raise InsufficientSamplesError("linear estimator needs >= 2 samples per set")
    terms = []
    for i in range(m):
        x1, x2 = Xs[2 * i], Xs[2 * i + 1]
        y1, y2 = Xt[2 * i], Xt[2 * i + 1]
        terms.append(
            multi_kernel(x1, x2, bank)
            + multi_kernel(y1, y2, bank)
            - multi_kernel(x1, y2, bank)
            - multi_kernel(x2, y1, bank)
        )
    return math.fsum(terms) / m


def mmd2_biased_grad(Xs, Xt, bank):
    """Gradients of mmd2_biased w.r.t. every row of Xs and Xt."""
    Xs, Xt = _check_pair(Xs, Xt)
    ns, nt = Xs.shape[0], Xt.shape[0]
    Wss = multi_gram_scaled(Xs, Xs, bank.bandwidths, bank.weights)
    Wtt = multi_gram_scaled(Xt, Xt, bank.bandwidths, bank.weights)
    Wst = multi_gram_scaled(Xs, Xt, bank.bandwidths, bank.weights)
    rs = Wss.sum(axis=1, keepdims=True)
    rt = Wtt.sum(axis=1, keepdims=True)
    rst = Wst.sum(axis=1, keepdims=True)
    rts = Wst.sum(axis=0)[:, None]
    gs = (2.0 / (ns * ns)) * (Wss @ Xs - rs * Xs)
    gs -= (2.0 / (ns * nt)) * (Wst @ Xt - rst * Xs)
    gt = (2.0 / (nt * nt)) * (Wtt @ Xt - rt * Xt)
    gt -= (2.0 / (ns * nt)) * (Wst.T @ Xs - rts * Xt)
    return gs, gt


def _stat_from_gram(K, idx_s, idx_t):
    ns, nt = len(idx_s), len(idx_t)
    kss = _fsum(K[np.ix_(idx_s, idx_s)])
    ktt = _fsum(K[np.ix_(idx_t, idx_t)])
    kst = _fsum(K[np.ix_(idx_s, idx_t)])
    v = kss / (ns * ns) + ktt / (nt * nt) - 2.0 * kst / (ns * nt)
    return v if v > 0.0 else 0.0


def permutation_test(Xs, Xt, bank, n_perms, seed):
    """Permutation two-sample test on the biased MMD statistic.

    Returns p = (1 + #{permuted >= observed}) / (n_perms + 1).
    """
    Xs, Xt = _check_pair(Xs, Xt)
    ns, nt = Xs.shape[0], Xt.shape[0]
    if ns < 2 or nt < 2:
        raise InsufficientSamplesError("permutation test needs >= 2 samples per set")
    if n_perms < 99:
        raise InvalidArgumentError("n_perms must be >= 99")
    pooled = np.concatenate([Xs, Xt], axis=0)
    K = multi_gram(pooled, pooled, bank.bandwidths, bank.weights)
    idx = np.arange(ns + nt)
    observed = _stat_from_gram(K, idx[:ns], idx[ns:])
    rng = np.random.default_rng(seed)
    hits = 0
    for _ in range(n_perms):
        perm = rng.permutation(ns + nt)
        if _stat_from_gram(K, perm[:ns], perm[ns:]) >= observed:
            hits += 1
    return (1 + hits) / (n_perms + 1)


def heuristic_kernel_weights(Xs, Xt, bandwidths):
    """Weight each bandwidth by its (clipped) per-kernel unbiased MMD^2.

    A cheap stand-in for power-maximizing kernel selection: kernels that
    individually see a larger discrepancy get proportionally more weight;
    uniform weights if no kernel sees any.
    """
    Xs, Xt = _check_pair(Xs, Xt)
    bw = tuple(float(s) for s in bandwidths)
    scores = [
        max(0.0, mmd2_unbiased(Xs, Xt, KernelBank.single(s))) for s in bw
    ]
    total = math.fsum(scores)
    if total <= 0.0:
        w = [1.0 / len(bw)] * len(bw)
    else:
        w = [s / total for s in scores]
    return KernelBank(bw, w)
