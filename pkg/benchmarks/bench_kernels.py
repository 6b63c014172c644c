"""Time the compiled kernels against the numpy fallback.

Usage: python3 benchmarks/bench_kernels.py [--repeat N] [--quick]

Each kernel runs on the same inputs under both backends; the table lists
the best-of-N wall time per call and the speedup of the compiled module.
"""

import argparse
import sys
import timeit

import numpy as np

from cyberforecast.kernels import get_backend


def cases(rng, quick):
    n = 400 if quick else 2000
    X = np.ascontiguousarray(rng.normal(size=(n, 5)))
    is_min = (rng.random(n) < 0.1).astype(np.uint8)
    Xm = np.ascontiguousarray(X[is_min == 1])
    init = np.ascontiguousarray(X[:8])
    s = np.sort(rng.integers(0, 50, 20 * n) / 7.0)
    y = rng.integers(0, 2, len(s)).astype(np.int64)
    w = rng.uniform(0.5, 2.0, len(s))
    return {
        "lloyd k=8": lambda k: k.lloyd(X, init.copy(), 100),
        "farthest_first k=32": lambda k: k.farthest_first(X, 0, 32),
        "cluster_search k<40": lambda k: k.minority_cluster_search(
            X, is_min, 0, min(int(is_min.sum()), 40), 100),
        "knn k=5 (minority)": lambda k: k.knn(Xm, Xm, 5, True),
        "auc_sorted": lambda k: k.auc_sorted(s, y, w),
    }


def main(argv=None):
    ap = argparse.ArgumentParser(description=__doc__.split("\n")[0])
    ap.add_argument("--repeat", type=int, default=5)
    ap.add_argument("--quick", action="store_true", help="smaller inputs")
    args = ap.parse_args(argv)
    py = get_backend("python")
    try:
        cy = get_backend("cython")
    except ImportError:
        print("compiled kernels are not built; only the numpy fallback is available")
        cy = None
    rng = np.random.default_rng(0)
    print(f"{'kernel':<26}{'numpy [ms]':>12}{'cython [ms]':>13}{'speedup':>10}")
    for name, fn in cases(rng, args.quick).items():
        t_py = min(timeit.repeat(lambda: fn(py), number=1, repeat=args.repeat)) * 1e3
        if cy is None:
            print(f"{name:<26}{t_py:>12.3f}{'-':>13}{'-':>10}")
            continue
        t_cy = min(timeit.repeat(lambda: fn(cy), number=1, repeat=args.repeat)) * 1e3
        print(f"{name:<26}{t_py:>12.3f}{t_cy:>13.3f}{t_py / t_cy:>9.1f}x")
    return 0


if __name__ == "__main__":
    sys.exit(main())
