#!/usr/bin/env python3
"""Benchmark the numba kernel path against the pure-numpy fallback.

Each kernel is checked for exact agreement between paths, then timed.
Run after forcing a path if you want to benchmark a deployment config:

    ROBOTRIAGE_KERNELS=numba python benchmarks/bench_kernels.py
"""

from __future__ import annotations

import time

import numpy as np

from robotriage import kernels as K

REPEATS = 200


def timeit(fn, *args) -> float:
    fn(*args)  # warm-up (JIT compile on the numba path)
    t0 = time.perf_counter()
    for _ in range(REPEATS):
        fn(*args)
    return (time.perf_counter() - t0) / REPEATS


def main() -> None:
    stream = K.stream_id(42, 0)
    ranges = K.lidar_ranges(stream, 360, 0.12, 3.5)
    pixels = K.image_pixels(stream, 32 * 24 * 3)
    text = ("lidar drop detected on /scan_out after fault injection "
            "with repeated constant values").encode() * 4
    text_arr = np.frombuffer(text, dtype=np.uint8)

    cases = [
        ("lidar_ranges(360)",
         lambda: K.lidar_ranges(stream, 360, 0.12, 3.5),
         lambda: K.NUMPY_IMPLS["lidar_ranges"](stream, 360, 0.12, 3.5)),
        ("image_pixels(2304)",
         lambda: K.image_pixels(stream, 2304),
         lambda: K.NUMPY_IMPLS["image_pixels"](stream, 2304)),
        ("scan_stats(360)",
         lambda: K.scan_stats(ranges, 0.12, 3.5),
         lambda: K.NUMPY_IMPLS["scan_stats"](ranges, 0.12, 3.5)),
        ("pixel_moments(2304)",
         lambda: K.pixel_moments(pixels),
         lambda: K.NUMPY_IMPLS["pixel_moments"](pixels)),
        ("trigram_counts(%d)" % len(text),
         lambda: K.trigram_counts(text, 256),
         lambda: K.NUMPY_IMPLS["trigram_counts"](text_arr, 256)),
    ]

    print(f"active backend: {K.active_backend()}  (repeats: {REPEATS})")
    print(f"{'kernel':24s} {'active':>12s} {'numpy':>12s} {'speedup':>8s}  agree")
    for name, active, reference in cases:
        a = active()
        r = reference()
        if isinstance(a, np.ndarray):
            agree = bool(np.array_equal(a, r))
        else:
            agree = a == r
        t_active = timeit(lambda: active())
        t_ref = timeit(lambda: reference())
        ratio = t_ref / t_active if t_active > 0 else float("inf")
        print(f"{name:24s} {t_active * 1e6:10.1f}us {t_ref * 1e6:10.1f}us "
              f"{ratio:7.2f}x  {agree}")
        assert agree, f"{name}: paths disagree"


if __name__ == "__main__":
    main()
