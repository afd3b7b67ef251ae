"""Compare the compiled kernels with the numpy fallback.

Usage: ``python3 benchmarks/bench_kernels.py [--repeat N]``
"""

import argparse
import timeit

import numpy as np

from mclr._core import _fallback

try:
    from mclr._core import _kernels
except ImportError:
    _kernels = None

CASES = [
    ("draw_components n=100 k=5 B=10000", "draw_components", (0, 0, 10_000, 100, 5)),
    ("draw_components n=100 k=50 B=10000", "draw_components", (0, 0, 10_000, 100, 50)),
    ("draw_components n=200 k=30 B=1999", "draw_components", (0, 0, 1999, 200, 30)),
    ("stream_normals 400 draws", "stream_normals", (0, 3, 0, 400)),
    ("stream_normals 100000 draws", "stream_normals", (0, 3, 0, 100_000)),
]


def best_time(fn, args, repeat):
    return min(timeit.repeat(lambda: fn(*args), number=1, repeat=repeat))


def max_rel_diff(a, b):
    a, b = np.atleast_1d(a), np.atleast_1d(b)
    return float(np.max(np.abs(a - b) / np.maximum(np.abs(b), 1e-300)))


def main(argv=None):
    parser = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    parser.add_argument("--repeat", type=int, default=5)
    args = parser.parse_args(argv)
    if _kernels is None:
        print("compiled extension not built; only the fallback is available")
    print(f"{'case':40s} {'fallback ms':>12s} {'compiled ms':>12s} {'speed-up':>9s} {'max rel diff':>13s}")
    for label, name, call in CASES:
        slow = best_time(getattr(_fallback, name), call, args.repeat)
        if _kernels is None:
            print(f"{label:40s} {1e3 * slow:12.2f} {'-':>12s} {'-':>9s} {'-':>13s}")
            continue
        fast = best_time(getattr(_kernels, name), call, args.repeat)
        a, b = getattr(_kernels, name)(*call), getattr(_fallback, name)(*call)
        pairs = zip(a, b) if isinstance(a, tuple) else [(a, b)]
        diff = max(max_rel_diff(x, y) for x, y in pairs)
        print(f"{label:40s} {1e3 * slow:12.2f} {1e3 * fast:12.2f} {slow / fast:8.1f}x {diff:13.1e}")


if __name__ == "__main__":
    main()
