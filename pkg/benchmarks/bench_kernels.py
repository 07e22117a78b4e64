#!/usr/bin/env python3
"""Benchmark the compiled kernels against the pure-Python fallback.

Times the three hot paths on workloads shaped like the real pipeline
(17 tracks per camera, 4k-pixel coordinates): quad/box clip areas, the
per-frame intersection matrix, and the gated assignment solve. Run:

    python3 benchmarks/bench_kernels.py [--frames 300]
"""

import argparse
import time

import numpy as np

from crossview._kernels import pure

try:
    from crossview._kernels import _core as core
except ImportError:
    core = None


def synth_workload(rng, n_tracks=17):
    quads = rng.uniform(0, 3840, (n_tracks, 4, 2))
    lo = rng.uniform(0, 3500, (n_tracks, 2))
    boxes = np.concatenate([lo, lo + rng.uniform(40, 300, (n_tracks, 2))], axis=1)
    cost = rng.random((n_tracks, n_tracks))
    cost[rng.random((n_tracks, n_tracks)) < 0.8] = np.inf  # gated, mostly sparse
    return quads, boxes, cost


def timeit(fn, frames, *args):
    start = time.perf_counter()
    for _ in range(frames):
        fn(*args)
    return time.perf_counter() - start


def bench(frames):
    rng = np.random.default_rng(0)
    quads, boxes, cost = synth_workload(rng)

    rows = []

    def record(name, pure_fn, core_fn, *args):
        t_pure = timeit(pure_fn, frames, *args)
        if core_fn is not None:
            t_core = timeit(core_fn, frames, *args)
            rows.append((name, t_pure, t_core, t_pure / t_core))
        else:
            rows.append((name, t_pure, None, None))

    record(
        "quad_box_intersection_area (17 pairs)",
        lambda: [pure.quad_box_intersection_area(q, b) for q, b in zip(quads, boxes)],
        (lambda: [core.quad_box_intersection_area(q, b) for q, b in zip(quads, boxes)])
        if core
        else None,
    )
    record(
        "intersection_matrix (17x17)",
        lambda: pure.intersection_matrix(quads, boxes),
        (lambda: core.intersection_matrix(quads, boxes)) if core else None,
    )
    record(
        "solve_assignment (17x17 gated)",
        lambda: pure.solve_assignment(cost),
        (lambda: core.solve_assignment(cost)) if core else None,
    )

    width = max(len(r[0]) for r in rows)
    per_frame = 1000.0 / frames
    print(f"{frames} frame-equivalents per cell; times in ms/frame")
    header = f"{'kernel':<{width}}  {'pure':>10}  {'compiled':>10}  {'speedup':>8}"
    print(header)
    print("-" * len(header))
    for name, t_pure, t_core, speedup in rows:
        pure_ms = t_pure * per_frame
        if t_core is None:
            print(f"{name:<{width}}  {pure_ms:>9.3f}  {'n/a':>10}  {'n/a':>8}")
        else:
            core_ms = t_core * per_frame
            print(f"{name:<{width}}  {pure_ms:>9.3f}  {core_ms:>10.3f}  {speedup:>7.1f}x")
    if core is None:
        print("\ncompiled kernels not built; install with a C toolchain to compare")


def main():
    parser = argparse.ArgumentParser(description=__doc__)
    parser.add_argument("--frames", type=int, default=300, help="repetitions per kernel")
    args = parser.parse_args()
    bench(args.frames)


if __name__ == "__main__":
    main()
