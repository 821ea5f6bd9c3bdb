"""Kernel and MMD estimator tests against brute-force oracles."""
import math

import numpy as np
import pytest

from adaflight import mmd
from adaflight.errors import (
    DegenerateSampleError,
    InsufficientSamplesError,
    InvalidArgumentError,
)


def brute_kernel(x, y, bank):
    """Independent multi-kernel evaluation for a single pair of points."""
    d2 = sum((a - b) ** 2 for a, b in zip(x, y))
    return sum(
        w * math.exp(-d2 / (2.0 * s * s))
        for s, w in zip(bank.bandwidths, bank.weights)
    )


def brute_mmd2_biased(X, Y, bank):
    """Plain double-sum V-statistic, no vectorization shortcuts."""
    n, m = len(X), len(Y)
    xx = sum(brute_kernel(a, b, bank) for a in X for b in X) / (n * n)
    yy = sum(brute_kernel(a, b, bank) for a in Y for b in Y) / (m * m)
    xy = sum(brute_kernel(a, b, bank) for a in X for b in Y) / (n * m)
    return xx + yy - 2.0 * xy


def brute_mmd2_unbiased(X, Y, bank):
    n, m = len(X), len(Y)
    xx = sum(
        brute_kernel(X[i], X[j], bank)
        for i in range(n)
        for j in range(n)
        if i != j
    ) / (n * (n - 1))
    yy = sum(
        brute_kernel(Y[i], Y[j], bank)
        for i in range(m)
        for j in range(m)
        if i != j
    ) / (m * (m - 1))
    xy = sum(brute_kernel(a, b, bank) for a in X for b in Y) / (n * m)
    return xx + yy - 2.0 * xy


def brute_mmd2_linear(X, Y, bank):
    n = min(len(X), len(Y)) // 2
    hs = []
    for i in range(n):
        x1, x2 = X[2 * i], X[2 * i + 1]
        y1, y2 = Y[2 * i], Y[2 * i + 1]
        hs.append(
            brute_kernel(x1, x2, bank)
            + brute_kernel(y1, y2, bank)
            - brute_kernel(x1, y2, bank)
            - brute_kernel(x2, y1, bank)
        )
    return sum(hs) / n


def random_instance(rng, max_n=20, max_d=5):
    n = int(rng.integers(2, max_n + 1))
    m = int(rng.integers(2, max_n + 1))
    d = int(rng.integers(1, max_d + 1))
    X = rng.normal(size=(n, d))
    Y = rng.normal(0.3, 1.1, size=(m, d))
    sig = float(rng.uniform(0.5, 2.0))
    bank = mmd.KernelBank((sig / 2, sig, sig * 2), (0.2, 0.5, 0.3))
    return X, Y, bank


class TestEstimatorOracles:
    def test_biased_matches_brute_force(self):
        rng = np.random.default_rng(0)
        for _ in range(100):
            X, Y, bank = random_instance(rng)
            assert mmd.mmd2_biased(X, Y, bank) == pytest.approx(
                brute_mmd2_biased(X, Y, bank), abs=1e-12
            )

    def test_unbiased_matches_brute_force(self):
        rng = np.random.default_rng(1)
        for _ in range(100):
            X, Y, bank = random_instance(rng)
            assert mmd.mmd2_unbiased(X, Y, bank) == pytest.approx(
                brute_mmd2_unbiased(X, Y, bank), abs=1e-12
            )

    def test_linear_matches_brute_force(self):
        rng = np.random.default_rng(2)
        for _ in range(100):
            X, Y, bank = random_instance(rng)
            if min(len(X), len(Y)) < 4:
                continue
            assert mmd.mmd2_linear(X, Y, bank) == pytest.approx(
                brute_mmd2_linear(X, Y, bank), abs=1e-12
            )

    def test_biased_identical_samples_exactly_zero(self):
        rng = np.random.default_rng(3)
        for _ in range(20):
            X = rng.normal(size=(rng.integers(2, 15), rng.integers(1, 5)))
            bank = mmd.default_bank(np.vstack([X, X]))
            assert mmd.mmd2_biased(X, X, bank) == 0.0

    def test_biased_nonnegative(self):
        rng = np.random.default_rng(4)
        for _ in range(50):
            X, Y, bank = random_instance(rng)
            assert mmd.mmd2_biased(X, Y, bank) >= 0.0

    def test_unbiased_near_zero_under_null(self):
        # the U-statistic is unbiased: its mean over draws from one
        # distribution should straddle zero
        rng = np.random.default_rng(5)
        bank = mmd.KernelBank.single(1.0)
        vals = []
        for _ in range(200):
            X = rng.normal(size=(20, 3))
            Y = rng.normal(size=(20, 3))
            vals.append(mmd.mmd2_unbiased(X, Y, bank))
        assert abs(np.mean(vals)) < 5e-3

    def test_estimators_need_two_samples(self):
        bank = mmd.KernelBank.single(1.0)
        one = np.zeros((1, 2))
        two = np.random.default_rng(0).normal(size=(2, 2))
        with pytest.raises(InsufficientSamplesError):
            mmd.mmd2_unbiased(one, two, bank)
        with pytest.raises(InsufficientSamplesError):
            mmd.mmd2_linear(one, two, bank)


class TestPermutationInvariance:
    def test_estimates_bitwise_invariant_to_row_order(self):
        rng = np.random.default_rng(6)
        for _ in range(20):
            X, Y, bank = random_instance(rng)
            bx = mmd.mmd2_biased(X, Y, bank)
            ux = mmd.mmd2_unbiased(X, Y, bank)
            for _ in range(5):
                Xp = X[rng.permutation(len(X))]
                Yp = Y[rng.permutation(len(Y))]
                assert mmd.mmd2_biased(Xp, Yp, bank) == bx
                assert mmd.mmd2_unbiased(Xp, Yp, bank) == ux


class TestKernelBank:
    def test_validation(self):
        with pytest.raises(InvalidArgumentError):
            mmd.KernelBank((1.0, 0.5), (0.5, 0.5))  # not increasing
        with pytest.raises(InvalidArgumentError):
            mmd.KernelBank((0.0, 1.0), (0.5, 0.5))  # bandwidth must be > 0
        with pytest.raises(InvalidArgumentError):
            mmd.KernelBank((1.0, 2.0), (0.7, 0.5))  # weights must sum to 1
        with pytest.raises(InvalidArgumentError):
            mmd.KernelBank((1.0, 2.0), (-0.5, 1.5))  # weights must be >= 0

    def test_single(self):
        bank = mmd.KernelBank.single(2.5)
        assert bank.bandwidths == (2.5,)
        assert bank.weights == (1.0,)

    def test_default_bank_geometry(self):
        rng = np.random.default_rng(7)
        pooled = rng.normal(size=(60, 4))
        bank = mmd.default_bank(pooled)
        med = mmd.median_heuristic(pooled)
        assert len(bank.bandwidths) == 5
        assert bank.bandwidths[0] == pytest.approx(med / 4)
        assert bank.bandwidths[2] == pytest.approx(med)
        assert bank.bandwidths[4] == pytest.approx(med * 4)
        assert all(w == pytest.approx(0.2) for w in bank.weights)

    def test_median_heuristic_against_direct_computation(self):
        rng = np.random.default_rng(8)
        pooled = rng.normal(size=(21, 3))
        dists = [
            math.sqrt(sum((a - b) ** 2 for a, b in zip(pooled[i], pooled[j])))
            for i in range(len(pooled))
            for j in range(i + 1, len(pooled))
        ]
        assert mmd.median_heuristic(pooled) == pytest.approx(
            float(np.median(dists)), rel=1e-12
        )

    def test_median_heuristic_degenerate(self):
        with pytest.raises(DegenerateSampleError):
            mmd.median_heuristic(np.ones((5, 2)))


class TestGradient:
    def test_biased_grad_matches_central_differences(self):
        rng = np.random.default_rng(9)
        eps = 1e-6
        for _ in range(20):
            n, m, d = rng.integers(3, 8), rng.integers(3, 8), rng.integers(1, 4)
            X = rng.normal(size=(n, d))
            Y = rng.normal(0.5, 1.0, size=(m, d))
            bank = mmd.KernelBank((0.7, 1.4), (0.5, 0.5))
            gx, gy = mmd.mmd2_biased_grad(X, Y, bank)
            for _ in range(4):
                i, j = rng.integers(n), rng.integers(d)
                Xp, Xm = X.copy(), X.copy()
                Xp[i, j] += eps
                Xm[i, j] -= eps
                fd = (
                    mmd.mmd2_biased(Xp, Y, bank) - mmd.mmd2_biased(Xm, Y, bank)
                ) / (2 * eps)
                assert gx[i, j] == pytest.approx(fd, rel=1e-4, abs=1e-8)
                i, j = rng.integers(m), rng.integers(d)
                Yp, Ym = Y.copy(), Y.copy()
                Yp[i, j] += eps
                Ym[i, j] -= eps
                fd = (
                    mmd.mmd2_biased(X, Yp, bank) - mmd.mmd2_biased(X, Ym, bank)
                ) / (2 * eps)
                assert gy[i, j] == pytest.approx(fd, rel=1e-4, abs=1e-8)


class TestPermutationTest:
    def _bank(self, X, Y):
        return mmd.default_bank(np.vstack([X, Y]))

    def test_detects_clear_shift(self):
        rng = np.random.default_rng(10)
        X = rng.normal(size=(60, 3))
        Y = rng.normal(2.0, 1.0, size=(60, 3))
        p = mmd.permutation_test(X, Y, self._bank(X, Y), n_perms=200, seed=0)
        assert p < 0.01

    def test_null_rejection_rate_reasonable(self):
        rng = np.random.default_rng(11)
        rejections = 0
        trials = 40
        for t in range(trials):
            X = rng.normal(size=(30, 2))
            Y = rng.normal(size=(30, 2))
            p = mmd.permutation_test(X, Y, self._bank(X, Y), n_perms=99, seed=t)
            rejections += p <= 0.05
        assert rejections <= 8  # generous bound for 40 trials at alpha=.05

    def test_p_value_floor(self):
        # p = (1 + hits) / (n_perms + 1) can never be 0
        rng = np.random.default_rng(12)
        X = rng.normal(size=(40, 2))
        Y = rng.normal(5.0, 1.0, size=(40, 2))
        p = mmd.permutation_test(X, Y, self._bank(X, Y), n_perms=99, seed=3)
        assert p >= 1.0 / 100.0

    def test_deterministic_given_seed(self):
        rng = np.random.default_rng(13)
        X = rng.normal(size=(25, 2))
        Y = rng.normal(0.5, 1.0, size=(25, 2))
        bank = self._bank(X, Y)
        a = mmd.permutation_test(X, Y, bank, n_perms=120, seed=42)
        b = mmd.permutation_test(X, Y, bank, n_perms=120, seed=42)
        assert a == b


class TestHeuristicWeights:
    def test_weights_form_distribution(self):
        rng = np.random.default_rng(14)
        X = rng.normal(size=(40, 3))
        Y = rng.normal(1.0, 1.0, size=(40, 3))
        base = mmd.default_bank(np.vstack([X, Y]))
        tuned = mmd.heuristic_kernel_weights(X, Y, base.bandwidths)
        assert math.fsum(tuned.weights) == pytest.approx(1.0, abs=1e-12)
        assert all(w >= 0 for w in tuned.weights)
        assert tuned.bandwidths == base.bandwidths

    def test_informative_kernel_gets_more_weight(self):
        # mean shift of ~1 with unit scale: the median-scale kernel should
        # outweigh the far-too-wide one
        rng = np.random.default_rng(15)
        X = rng.normal(size=(100, 2))
        Y = rng.normal(1.0, 1.0, size=(100, 2))
        med = mmd.median_heuristic(np.vstack([X, Y]))
        tuned = mmd.heuristic_kernel_weights(X, Y, (med, med * 32))
        assert tuned.weights[0] > tuned.weights[1]
