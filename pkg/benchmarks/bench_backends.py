#!/usr/bin/env python3
"""Benchmark the compiled kernel core against the numpy fallback.

The five implicit solvers are the hot scalar loops of the library (they run
in 1e5-point batches inside the operator bound checks and per element in the
diagnostics).  Both backends execute the same bisection+Newton scheme; this
script reports wall time per batch, per-point cost, and the max relative
disagreement.

Usage: python benchmarks/bench_backends.py [n_points] [repeats]
"""

import sys
import time

import numpy as np

from expdist import _kernels_py

try:
    from expdist import _kernels_fast
except ImportError:
    _kernels_fast = None


def time_fn(fn, repeats):
    best = float("inf")
    out = None
    for _ in range(repeats):
        t0 = time.perf_counter()
        out = fn()
        best = min(best, time.perf_counter() - t0)
    return best, out


def main(n=200000, repeats=3):
    rng = np.random.default_rng(0)
    y = np.exp(rng.uniform(-30, 30, n))
    x = np.exp(rng.uniform(-2, 2, n))
    k = np.exp(rng.uniform(-8, 8, n))
    cases = [
        ("ap_inverse(p=1)", lambda m: m.ap_inverse(y, 1.0)),
        ("ap_inverse(p=5)", lambda m: m.ap_inverse(y, 5.0)),
        ("atilde_inverse", lambda m: m.atilde_inverse(y, 1.0)),
        ("ap_lambda_inverse", lambda m: m.ap_lambda_inverse(y, 1.0, 0.7)),
        ("v_solve(lam=0.7)", lambda m: m.v_solve(x, k, 1.0, 0.7)),
        ("v_solve(lam=1.0)", lambda m: m.v_solve(x, k, 1.0, 1.0)),
        ("t_solve", lambda m: m.t_solve(k, 1.0)),
    ]
    print(f"batch {n} points, best of {repeats}")
    header = f"{'kernel':<20}{'numpy':>12}{'compiled':>12}{'speedup':>9}{'ns/pt':>9}{'max rel gap':>14}"
    print(header)
    print("-" * len(header))
    for name, fn in cases:
        t_py, ref = time_fn(lambda: fn(_kernels_py), repeats)
        if _kernels_fast is None:
            print(f"{name:<20}{t_py * 1e3:>10.1f}ms{'n/a':>12}{'-':>9}{'-':>9}{'-':>14}")
            continue
        t_cy, fast = time_fn(lambda: fn(_kernels_fast), repeats)
        gap = float(np.max(np.abs(ref - fast) / np.maximum(np.abs(ref), 1e-300)))
        print(
            f"{name:<20}{t_py * 1e3:>10.1f}ms{t_cy * 1e3:>10.1f}ms"
            f"{t_py / t_cy:>8.1f}x{t_cy / n * 1e9:>9.0f}{gap:>14.2e}"
        )
    if _kernels_fast is None:
        print("\ncompiled core unavailable; build with `python setup.py build_ext --inplace`")


if __name__ == "__main__":
    n = int(sys.argv[1]) if len(sys.argv) > 1 else 200000
    repeats = int(sys.argv[2]) if len(sys.argv) > 2 else 3
    main(n, repeats)
