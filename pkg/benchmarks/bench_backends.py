"""Benchmark the compiled scan kernels against the numpy fallback.

Both backends are bit-identical; this script measures the speed difference on
the two hot kernels and on an end-to-end sampler batch.  Run as

    python3 benchmarks/bench_backends.py [--points N] [--boxes B] [--repeats R]
"""

from __future__ import annotations

import argparse
import time

import numpy as np

from extremal import _scan_py
from extremal._kernels import BACKEND
from extremal import BoxDomain, ScalarField
from extremal.sampler import batch_construction_a_interval_mins

try:
    from extremal import _scan
except ImportError:
    _scan = None


def best_of(repeats: int, fn, *args):
    best = np.inf
    out = None
    for _ in range(repeats):
        t0 = time.perf_counter()
        out = fn(*args)
        best = min(best, time.perf_counter() - t0)
    return best, out


def bench_interval_mins(points: int, boxes: int, repeats: int, rng) -> None:
    pos = rng.random(points)
    vals = rng.standard_exponential(points)
    los = np.sort(rng.random(boxes))
    his = np.minimum(los + 0.3, 1.0)
    t_py, ref = best_of(repeats, _scan_py.interval_mins, pos, vals, los, his)
    print(f"interval_mins  n={points} boxes={boxes}")
    print(f"  numpy  : {t_py * 1e3:9.3f} ms")
    if _scan is not None:
        t_cy, got = best_of(repeats, _scan.interval_mins, pos, vals, los, his)
        assert np.array_equal(ref, got), "backend results diverge"
        print(f"  cython : {t_cy * 1e3:9.3f} ms   ({t_py / t_cy:5.1f}x)")


def bench_topk(points: int, k: int, repeats: int, rng) -> None:
    vals = rng.standard_exponential(points)
    ids = np.arange(points, dtype=np.int64)
    t_py, ref = best_of(repeats, _scan_py.topk_smallest, vals, ids, k)
    print(f"topk_smallest  n={points} k={k}")
    print(f"  numpy  : {t_py * 1e3:9.3f} ms")
    if _scan is not None:
        t_cy, got = best_of(repeats, _scan.topk_smallest, vals, ids, k)
        assert np.array_equal(ref, got), "backend results diverge"
        print(f"  cython : {t_cy * 1e3:9.3f} ms   ({t_py / t_cy:5.1f}x)")


def bench_end_to_end(points: int, repeats: int) -> None:
    dom = BoxDomain(dim=1, lower=(0.0,), upper=(1.0,), cells_per_axis=1)
    one = ScalarField.constant(1.0)
    zero = ScalarField.constant(0.0)
    boxes = [(0.0, 1.0), (0.0, 0.5), (0.25, 0.75)]
    args = (dom, one, zero, points, boxes, 200, 42)
    t, _ = best_of(repeats, batch_construction_a_interval_mins, *args)
    print(f"batch interval mins, 200 replicates of n={points}, active backend={BACKEND}")
    print(f"  {t * 1e3:9.3f} ms")


def main() -> None:
    parser = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    parser.add_argument("--points", type=int, default=1_000_000)
    parser.add_argument("--boxes", type=int, default=16)
    parser.add_argument("--k", type=int, default=8)
    parser.add_argument("--repeats", type=int, default=5)
    args = parser.parse_args()

    print(f"active backend: {BACKEND}   compiled extension present: {_scan is not None}")
    rng = np.random.default_rng(0)
    bench_interval_mins(args.points, args.boxes, args.repeats, rng)
    bench_topk(args.points, args.k, args.repeats, rng)
    bench_end_to_end(100_000, args.repeats)


if __name__ == "__main__":
    main()
