"""Benchmark the compiled box kernels against the NumPy reference.

Usage: python benchmarks/bench_kernels.py [--repeats N]
"""

import argparse
import time

import numpy as np

from comicdet.kernels import _reference

try:
    from comicdet.kernels import _box_kernels
except ImportError:
    _box_kernels = None


def random_boxes(rng, n):
    xy = rng.uniform(0, 1000, (n, 2))
    wh = rng.uniform(5, 200, (n, 2))
    return np.concatenate([xy, xy + wh], axis=1)


def timeit(fn, repeats):
    fn()  # warm up
    start = time.perf_counter()
    for _ in range(repeats):
        fn()
    return (time.perf_counter() - start) / repeats


def main():
    parser = argparse.ArgumentParser(description=__doc__)
    parser.add_argument("--repeats", type=int, default=20)
    args = parser.parse_args()

    if _box_kernels is None:
        print("compiled backend unavailable; rebuild with `pip install -e . --no-build-isolation`")

    rng = np.random.default_rng(0)
    rows = []
    for n in (100, 1000, 10647):
        boxes = random_boxes(rng, n)
        scores = rng.uniform(0, 1, n)
        other = random_boxes(rng, min(n, 1000))
        cases = [
            (f"iou_matrix {n}x{len(other)}", lambda impl, b=boxes, o=other: impl.iou_matrix(b, o)),
            (f"nms_keep n={n} thr=0.5", lambda impl, b=boxes, s=scores: impl.nms_keep(b, s, 0.5)),
        ]
        for name, call in cases:
            t_ref = timeit(lambda: call(_reference), args.repeats)
            if _box_kernels is not None:
                t_fast = timeit(lambda: call(_box_kernels), args.repeats)
                rows.append((name, t_ref * 1e3, t_fast * 1e3, t_ref / t_fast))
            else:
                rows.append((name, t_ref * 1e3, None, None))

    header = f"{'kernel':<28}{'numpy (ms)':>12}{'cython (ms)':>13}{'speedup':>9}"
    print(header)
    print("-" * len(header))
    for name, ref_ms, fast_ms, speedup in rows:
        if fast_ms is None:
            print(f"{name:<28}{ref_ms:>12.3f}{'n/a':>13}{'n/a':>9}")
        else:
            print(f"{name:<28}{ref_ms:>12.3f}{fast_ms:>13.3f}{speedup:>8.1f}x")


if __name__ == "__main__":
    main()
