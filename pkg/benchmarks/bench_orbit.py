"""Compare the numba and pure-numpy kernels on orbit + scan workloads.

Run:  python3 benchmarks/bench_orbit.py [--n 2000000] [--repeats 5]
"""

import argparse
import time

import numpy as np

from evtlab.kernels import USE_NUMBA, digit_positions, exceedance_scan


def bench(fn, repeats):
    fn()                                   # warm-up / JIT compile
    best = float("inf")
    for _ in range(repeats):
        t0 = time.perf_counter()
        fn()
        best = min(best, time.perf_counter() - t0)
    return best


def main():
    ap = argparse.ArgumentParser()
    ap.add_argument("--n", type=int, default=2_000_000)
    ap.add_argument("--repeats", type=int, default=5)
    args = ap.parse_args()

    rng = np.random.default_rng(0)
    window = 62
    digits = rng.integers(0, 2, size=args.n + window, dtype=np.int64)
    x = digit_positions(digits, 2, window, args.n, backend="numpy")

    centers = np.array([0.0883883476483184, 0.1767766952966369,
                        0.7071067811865475])
    radii = np.array([2e-6, 1.5e-3, 1.5e-3])
    codes = np.array([0, 1, 1], dtype=np.int64)
    p1 = np.array([0.0, 0.5, 0.5])
    p2 = np.zeros(3)

    jobs = {
        "digit_positions": lambda b: digit_positions(digits, 2, window,
                                                     args.n, backend=b),
        "exceedance_scan": lambda b: exceedance_scan(x, centers, radii, codes,
                                                     p1, p2, 1e-12, backend=b),
    }
    backends = ["numpy"] + (["numba"] if USE_NUMBA else [])
    print(f"n = {args.n:,}   numba available: {USE_NUMBA}")
    for name, job in jobs.items():
        times = {b: bench(lambda b=b: job(b), args.repeats) for b in backends}
        line = "   ".join(f"{b}: {t * 1000:8.2f} ms" for b, t in times.items())
        if len(times) == 2:
            line += f"   speedup: {times['numpy'] / times['numba']:.1f}x"
        print(f"{name:18s} {line}")


if __name__ == "__main__":
    main()
