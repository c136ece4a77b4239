"""Compare the compiled kernels with the pure-Python fallback.

    python3 benchmarks/bench_kernels.py [--repeat N]
"""

import argparse
import timeit

import numpy as np

from lhasynth import _pykernels

try:
    from lhasynth import _ckernels
except ImportError:
    _ckernels = None


def cases(rng):
    pts = np.column_stack([np.linspace(0, 1, 5000), rng.random((5000, 3)).cumsum(0) / 5000])
    slopes = rng.normal(size=(20_000, 3))
    centers = rng.normal(size=(10, 3))
    dur = rng.uniform(0.1, 1, 12_000)
    lab = rng.integers(0, 15, 12_000)
    return {
        "rdp_mask (5000 pts)": ("rdp_mask", (pts, 0.001)),
        "nearest_centers (20000 x 10)": ("nearest_centers", (slopes, centers)),
        "cumulative_durations (12000)": ("cumulative_durations", (dur, lab, 15)),
    }


def main():
    parser = argparse.ArgumentParser()
    parser.add_argument("--repeat", type=int, default=5)
    args = parser.parse_args()
    rng = np.random.default_rng(0)
    print(f"{'kernel':32s} {'python [ms]':>12s} {'cython [ms]':>12s} {'speedup':>8s}")
    for name, (fn, fargs) in cases(rng).items():
        py = min(timeit.repeat(lambda: getattr(_pykernels, fn)(*fargs), number=1, repeat=args.repeat))
        if _ckernels is None:
            print(f"{name:32s} {py * 1e3:12.2f} {'n/a':>12s}")
            continue
        cy = min(timeit.repeat(lambda: getattr(_ckernels, fn)(*fargs), number=1, repeat=args.repeat))
        print(f"{name:32s} {py * 1e3:12.2f} {cy * 1e3:12.2f} {py / cy:7.1f}x")


if __name__ == "__main__":
    main()
