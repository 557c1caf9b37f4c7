"""Benchmark the compiled Hawkes thinning kernel against the pure-Python
fallback and confirm both produce identical streams.

Usage: python3 benchmarks/bench_kernels.py [--repeats N]
"""
from __future__ import annotations

import argparse
import time

import numpy as np

from tppattack.kernels import HAS_COMPILED, thinning, thinning_py


def run(fn, mu, alpha, beta, horizon, seeds):
    start = time.perf_counter()
    total = 0
    for seed in seeds:
        times, _ = fn(mu, alpha, beta, horizon, seed)
        total += len(times)
    return time.perf_counter() - start, total


def main():
    parser = argparse.ArgumentParser(description=__doc__)
    parser.add_argument("--repeats", type=int, default=50)
    parser.add_argument("--marks", type=int, default=4)
    parser.add_argument("--horizon", type=float, default=200.0)
    args = parser.parse_args()

    marks = args.marks
    mu = np.full(marks, 0.4)
    alpha = np.full((marks, marks), 0.6 / marks)
    beta = 1.5
    seeds = list(range(args.repeats))

    print(f"compiled kernel available: {HAS_COMPILED}")
    t_py, n_py = run(thinning_py, mu, alpha, beta, args.horizon, seeds)
    print(f"pure python : {t_py:8.3f}s  ({n_py} events, "
          f"{n_py / t_py:,.0f} events/s)")
    if HAS_COMPILED and thinning is not thinning_py:
        t_c, n_c = run(thinning, mu, alpha, beta, args.horizon, seeds)
        print(f"compiled    : {t_c:8.3f}s  ({n_c} events, "
              f"{n_c / t_c:,.0f} events/s)")
        print(f"speedup     : {t_py / t_c:8.2f}x")
        ta, ma = thinning(mu, alpha, beta, args.horizon, 12345)
        tb, mb = thinning_py(mu, alpha, beta, args.horizon, 12345)
        identical = list(ta) == list(tb) and list(ma) == list(mb)
        print(f"bit-identical output: {identical}")
        if not identical:
            raise SystemExit("kernel implementations disagree")
    else:
        print("compiled kernel not built; skipping comparison")


if __name__ == "__main__":
    main()
