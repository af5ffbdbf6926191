#!/usr/bin/env python3
"""Benchmark the numba kernels against the pure-numpy fallback.

Runs conv3d forward/backward and the full STS layer on a few problem
sizes with each backend and reports wall-clock medians plus the max
absolute cross-backend difference (expected ~1e-15 in f64).

Usage: python3 benchmarks/bench_backends.py [--repeats N] [--seed S]
"""

from __future__ import annotations

import argparse
import time

import numpy as np

from stsconv import (
    ConvSpec,
    STSConfig,
    conv3d,
    conv_backward,
    init_sts_random,
    numba_available,
    sts_forward,
    use_backend,
)
from stsconv.convops import same_padding

CASES = [
    ("small", (2, 8, 4, 16, 16), 8),
    ("medium", (2, 16, 8, 32, 32), 16),
    ("large", (1, 32, 8, 56, 56), 32),
]


def _median_time(fn, repeats):
    times = []
    for _ in range(repeats):
        t0 = time.perf_counter()
        fn()
        times.append(time.perf_counter() - t0)
    return sorted(times)[len(times) // 2]


def bench_case(label, in_shape, c_out, repeats, rng):
    n, c_in, t, h, w = in_shape
    x = rng.standard_normal(in_shape)
    kernel = (3, 3, 3)
    weights = rng.standard_normal((c_out, c_in) + kernel) / np.sqrt(c_in * 27)
    spec = ConvSpec(kernel=kernel, padding=same_padding(kernel))
    grad = rng.standard_normal((n, c_out, t, h, w))

    cfg = STSConfig(c_in=c_in, c_out=c_out, kernel=kernel)
    params = init_sts_random(cfg, rng)

    results = {}
    for backend in ("numpy", "numba"):
        if backend == "numba" and not numba_available():
            continue
        with use_backend(backend):
            conv3d(x, weights, spec)  # warm-up (JIT compile on first call)
            results[backend] = {
                "forward": _median_time(lambda: conv3d(x, weights, spec), repeats),
                "backward": _median_time(
                    lambda: conv_backward(x, weights, spec, grad), repeats
                ),
                "sts": _median_time(lambda: sts_forward(x, params, cfg), repeats),
                "out": conv3d(x, weights, spec),
            }

    print(f"\n== {label}: input {in_shape}, {c_out} output channels ==")
    header = f"{'op':<10}" + "".join(f"{b:>12}" for b in results)
    if len(results) == 2:
        header += f"{'speedup':>10}"
    print(header)
    for op in ("forward", "backward", "sts"):
        row = f"{op:<10}" + "".join(f"{results[b][op] * 1e3:>10.2f}ms" for b in results)
        if len(results) == 2:
            row += f"{results['numpy'][op] / results['numba'][op]:>9.1f}x"
        print(row)
    if len(results) == 2:
        diff = np.max(np.abs(results["numpy"]["out"] - results["numba"]["out"]))
        print(f"max |numpy - numba| on forward output: {diff:.3e}")


def main():
    parser = argparse.ArgumentParser(description=__doc__)
    parser.add_argument("--repeats", type=int, default=5)
    parser.add_argument("--seed", type=int, default=0)
    args = parser.parse_args()
    rng = np.random.default_rng(args.seed)
    if not numba_available():
        print("numba unavailable; timing the numpy fallback only")
    for label, in_shape, c_out in CASES:
        bench_case(label, in_shape, c_out, args.repeats, rng)


if __name__ == "__main__":
    main()
