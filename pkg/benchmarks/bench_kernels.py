"""Compare the numba and numpy kernel backends on representative inputs.

    python3 benchmarks/bench_kernels.py [--repeat 5]

The first numba call (JIT or cache load) is excluded from the timings.
"""

import argparse
import time

import numpy as np

from steinbounds import kernels


def best_of(fn, repeat):
    times = []
    for _ in range(repeat):
        t0 = time.perf_counter()
        fn()
        times.append(time.perf_counter() - t0)
    return min(times)


def cases(rng):
    n_atoms = 2_000_000
    values = np.sort(rng.integers(0, n_atoms // 4, n_atoms).astype(float) * 1e-3)
    masses = rng.random(n_atoms)
    masses /= masses.sum()
    p = rng.random(n_atoms)
    p /= p.sum()
    q = rng.random(n_atoms)
    q /= q.sum()
    return {
        "merge_sorted (2e6 atoms)": ("merge_sorted", (values, masses)),
        "compositions (n=40, k=5)": ("compositions", (40, 5)),
        "first_exceeding (2e6)": ("first_exceeding", (p, 0.3)),
        "np_fill (2e6)": ("np_fill", (p, q, 0.3)),
    }


def main():
    ap = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    ap.add_argument("--repeat", type=int, default=5)
    args = ap.parse_args()
    if not kernels.HAVE_NUMBA:
        raise SystemExit("numba is not installed; nothing to compare")
    rng = np.random.default_rng(0)
    print(f"{'kernel':<28}{'numpy [ms]':>12}{'numba [ms]':>12}{'speedup':>10}")
    for label, (name, inputs) in cases(rng).items():
        f_np = getattr(kernels, f"{name}_np")
        f_nb = getattr(kernels, f"{name}_nb")
        f_nb(*inputs)  # warm up
        t_np = best_of(lambda: f_np(*inputs), args.repeat)
        t_nb = best_of(lambda: f_nb(*inputs), args.repeat)
        print(f"{label:<28}{t_np * 1e3:>12.2f}{t_nb * 1e3:>12.2f}{t_np / t_nb:>9.1f}x")


if __name__ == "__main__":
    main()
