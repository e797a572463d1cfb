#!/usr/bin/env python3
"""Benchmark the numba kernels against the pure-numpy fallback.

Workloads mirror the hot paths: component labeling on a 1080x1920
screenshot-like mask and longest-common-substring on policy-sized
sentences. Run:

    python benchmarks/bench_kernels.py
"""

import sys
import time
from pathlib import Path

import numpy as np

sys.path.insert(0, str(Path(__file__).resolve().parents[1] / "src"))

from cppgen import kernels  # noqa: E402


def bench(fn, *args, warmup=1, repeat=5):
    for _ in range(warmup):
        fn(*args)
    best = float("inf")
    for _ in range(repeat):
        t0 = time.perf_counter()
        fn(*args)
        best = min(best, time.perf_counter() - t0)
    return best


def screenshot_mask(rng):
    mask = np.zeros((1920, 1080), dtype=bool)
    for _ in range(60):
        y = int(rng.integers(0, 1880))
        x = int(rng.integers(0, 1040))
        s = int(rng.integers(8, 40))
        mask[y : y + s, x : x + s] = True
    return mask


def sentence_pairs(rng, n=200, length=120):
    alphabet = np.array(list("abcdefghij klmnopqrst"))
    return [
        (
            "".join(rng.choice(alphabet, size=length)),
            "".join(rng.choice(alphabet, size=length)),
        )
        for _ in range(n)
    ]


def main():
    rng = np.random.default_rng(0)
    mask = screenshot_mask(rng)
    pairs = sentence_pairs(rng)

    backends = ["numpy"]
    try:
        kernels.implementations("numba")
        backends.append("numba")
    except ImportError:
        print("numba unavailable; benchmarking numpy only")

    results = {}
    for backend in backends:
        t_label = bench(lambda: kernels.component_boxes(mask, backend))
        t_lcs = bench(
            lambda: [kernels.lcs_length(a, b, backend) for a, b in pairs]
        )
        results[backend] = (t_label, t_lcs)

    print(f"{'workload':<38} " + "".join(f"{b:>12}" for b in backends) + "   speedup")
    rows = [
        ("component_boxes 1080x1920, 60 blobs", 0),
        ("lcs_length 200 pairs of 120 chars", 1),
    ]
    for name, idx in rows:
        times = [results[b][idx] for b in backends]
        speedup = times[0] / times[-1] if len(times) > 1 else 1.0
        cells = "".join(f"{t * 1000:>10.1f}ms" for t in times)
        print(f"{name:<38} {cells}   x{speedup:.1f}")


if __name__ == "__main__":
    main()
