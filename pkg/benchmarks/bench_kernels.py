"""Compare the numba and numpy paths of the hot kernels.

Run:  python3 benchmarks/bench_kernels.py [--samples N] [--length T] [--kernels K]
"""

from __future__ import annotations

import argparse
import os
import time

import numpy as np

import softts.kernels as kernels
from softts.representation import _draw_kernels


def time_call(fn, *args, repeats: int = 3) -> float:
    fn(*args)  # warmup (includes jit compilation on the numba path)
    best = float("inf")
    for _ in range(repeats):
        start = time.perf_counter()
        fn(*args)
        best = min(best, time.perf_counter() - start)
    return best


def main() -> int:
    parser = argparse.ArgumentParser(description=__doc__)
    parser.add_argument("--samples", type=int, default=400)
    parser.add_argument("--length", type=int, default=256)
    parser.add_argument("--kernels", type=int, default=512)
    parser.add_argument("--classes", type=int, default=4)
    args = parser.parse_args()

    if not kernels.NUMBA_AVAILABLE:
        print("numba is not installed; nothing to compare")
        return 1

    rng = np.random.default_rng(0)
    series = rng.standard_normal((args.samples, args.length))
    params = _draw_kernels(args.kernels, args.length, seed=1)
    labels = rng.integers(0, args.classes, args.samples)
    labels[: args.classes] = np.arange(args.classes)

    rows = []
    for name, fn, call_args in (
        ("conv_features", kernels.conv_features, (series, *params)),
        ("class_mean_distances", kernels.class_mean_distances, (series, labels, args.classes)),
    ):
        os.environ.pop("SOFTTS_NO_NUMBA", None)
        fast = time_call(fn, *call_args)
        out_fast = fn(*call_args)
        os.environ["SOFTTS_NO_NUMBA"] = "1"
        slow = time_call(fn, *call_args)
        out_slow = fn(*call_args)
        os.environ.pop("SOFTTS_NO_NUMBA", None)
        agree = np.allclose(out_fast, out_slow, rtol=1e-9, atol=1e-12)
        rows.append((name, fast, slow, slow / fast, agree))

    print(f"{'kernel':<24}{'numba':>10}{'numpy':>10}{'speedup':>9}  agree")
    for name, fast, slow, speedup, agree in rows:
        print(f"{name:<24}{fast * 1e3:>8.1f}ms{slow * 1e3:>8.1f}ms{speedup:>8.1f}x  {agree}")
    return 0


if __name__ == "__main__":
    raise SystemExit(main())
