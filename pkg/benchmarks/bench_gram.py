"""Benchmark the compiled Gram backend against the pure-numpy fallback.

Usage: python benchmarks/bench_gram.py [--sizes 64,128,256,512] [--dim 32]

Times multi_gram (the hot kernel of every MMD evaluation) on square
problems and reports the speed ratio, after checking the two backends
agree numerically.
"""
import argparse
import time

import numpy as np

from adaflight.mmd import _gram_np

try:
    from adaflight.mmd import _gramcore
except ImportError:
    _gramcore = None

BANDWIDTHS = (0.5, 1.0, 2.0, 4.0, 8.0)
WEIGHTS = (0.2, 0.2, 0.2, 0.2, 0.2)


def time_call(fn, *args, repeats=5):
    best = float("inf")
    for _ in range(repeats):
        t0 = time.perf_counter()
        fn(*args)
        best = min(best, time.perf_counter() - t0)
    return best


def main():
    ap = argparse.ArgumentParser(description=__doc__)
    ap.add_argument("--sizes", default="64,128,256,512")
    ap.add_argument("--dim", type=int, default=32)
    args = ap.parse_args()
    sizes = [int(s) for s in args.sizes.split(",")]

    if _gramcore is None:
        print("compiled extension not built; nothing to compare")
        return

    rng = np.random.default_rng(0)
    print(f"{'n':>6} {'numpy (ms)':>12} {'cython (ms)':>12} {'ratio':>7}")
    for n in sizes:
        X = rng.normal(size=(n, args.dim))
        Y = rng.normal(0.5, 1.0, size=(n, args.dim))
        a = _gram_np.multi_gram(X, Y, BANDWIDTHS, WEIGHTS)
        b = _gramcore.multi_gram(X, Y, BANDWIDTHS, WEIGHTS)
        assert np.allclose(a, b, rtol=1e-12, atol=1e-14), "backends disagree"
        t_np = time_call(_gram_np.multi_gram, X, Y, BANDWIDTHS, WEIGHTS)
        t_cy = time_call(_gramcore.multi_gram, X, Y, BANDWIDTHS, WEIGHTS)
        print(f"{n:>6} {t_np * 1e3:>12.3f} {t_cy * 1e3:>12.3f} "
              f"{t_np / t_cy:>7.2f}")


if __name__ == "__main__":
    main()
