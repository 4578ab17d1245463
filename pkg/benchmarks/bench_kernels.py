"""Benchmark the compiled kernels against the pure NumPy fallback.

Usage::

    python benchmarks/bench_kernels.py [--sizes 10000,100000,1000000] [--repeats 5]

Requires the extension to be built (``python setup.py build_ext --inplace``
or a regular install); without it only the NumPy column is reported.
"""

import argparse
import sys
import time
from pathlib import Path

import numpy as np

sys.path.insert(0, str(Path(__file__).resolve().parents[1] / "src"))

from serls.kernels import _numpy  # noqa: E402

try:
    from serls.kernels import _native
except ImportError:
    _native = None


def best_of(repeats, fn, *args):
    best = float("inf")
    for _ in range(repeats):
        start = time.perf_counter()
        fn(*args)
        best = min(best, time.perf_counter() - start)
    return best


def bench_weighted_median(impl, rng, n):
    x = rng.normal(size=n)
    w = rng.uniform(0.0, 1.0, size=n)
    w /= w.sum()
    return lambda: impl.weighted_median(x, w)


def bench_winsorize(impl, rng, n):
    e = rng.normal(scale=2.0, size=n)
    return lambda: impl.winsorize(e, 1.5)


def bench_huber_sum(impl, rng, n):
    e = rng.normal(scale=2.0, size=n)
    w = np.full(n, 1.0 / n)
    return lambda: impl.huber_sum(e, w, 1.5)


def bench_bspline(impl, rng, n):
    t = np.concatenate([np.zeros(4), [0.2, 0.4, 0.6, 0.8], np.ones(4)])
    x = rng.uniform(size=n)
    return lambda: impl.bspline_design(x, t, 3)


KERNELS = [
    ("weighted_median", bench_weighted_median),
    ("winsorize", bench_winsorize),
    ("huber_sum", bench_huber_sum),
    ("bspline_design(deg 3)", bench_bspline),
]


def main():
    parser = argparse.ArgumentParser(description=__doc__)
    parser.add_argument("--sizes", default="10000,100000,1000000")
    parser.add_argument("--repeats", type=int, default=5)
    args = parser.parse_args()
    sizes = [int(s) for s in args.sizes.split(",")]

    if _native is None:
        print("native extension not built; reporting NumPy fallback only\n")

    header = f"{'kernel':<24s} {'n':>9s} {'numpy':>12s}"
    if _native is not None:
        header += f" {'native':>12s} {'speedup':>8s}"
    print(header)
    print("-" * len(header))
    for name, setup in KERNELS:
        for n in sizes:
            rng = np.random.default_rng(12345)
            t_numpy = best_of(args.repeats, setup(_numpy, rng, n))
            line = f"{name:<24s} {n:>9d} {t_numpy * 1e3:>10.3f}ms"
            if _native is not None:
                rng = np.random.default_rng(12345)
                t_native = best_of(args.repeats, setup(_native, rng, n))
                line += f" {t_native * 1e3:>10.3f}ms {t_numpy / t_native:>7.1f}x"
            print(line)
    print()
    print("timings are best-of-%d wall clock" % args.repeats)


if __name__ == "__main__":
    main()
