"""Time the compiled convolution kernel against the numpy fallback.

Usage::

    python benchmarks/bench_kernels.py [--alpha 0.6] [--dim 2] [--repeat 20]

Prints one row per grid size with the best-of-``repeat`` wall time of each
backend, their ratio and the largest disagreement between them.
"""
import argparse
import timeit

import numpy as np

from fracpont import _kernels_py
from fracpont.ops import product_trap_weights

try:
    from fracpont import _kernels as compiled
except ImportError:  # extension not built
    compiled = None

SIZES = (512, 1024, 2048, 4096, 8192)


def best_time(fn, repeat):
    return min(timeit.repeat(fn, number=1, repeat=repeat))


def main(argv=None):
    ap = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    ap.add_argument("--alpha", type=float, default=0.6)
    ap.add_argument("--dim", type=int, default=2)
    ap.add_argument("--repeat", type=int, default=20)
    args = ap.parse_args(argv)
    if compiled is None:
        print("compiled extension not built; timing the fallback only")
    rng = np.random.default_rng(0)
    print(f"{'n':>6} {'python ms':>10} {'compiled ms':>12} {'speedup':>8} {'max diff':>9}")
    for n in SIZES:
        c, a0, _ = product_trap_weights(n, args.alpha)
        g = rng.standard_normal((n + 1, args.dim))
        t_py = best_time(lambda: _kernels_py.lower_apply(c, a0, g), args.repeat)
        if compiled is None:
            print(f"{n:>6} {1e3 * t_py:>10.3f} {'-':>12} {'-':>8} {'-':>9}")
            continue
        t_c = best_time(lambda: compiled.lower_apply(c, a0, g), args.repeat)
        diff = np.max(np.abs(compiled.lower_apply(c, a0, g) - _kernels_py.lower_apply(c, a0, g)))
        print(f"{n:>6} {1e3 * t_py:>10.3f} {1e3 * t_c:>12.3f} {t_py / t_c:>8.2f} {diff:>9.1e}")


if __name__ == "__main__":
    main()
