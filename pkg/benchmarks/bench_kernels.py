"""Benchmark the compiled kernel backend against the numpy fallback.

Runs the three hot kernels on representative desk-scale workloads,
checks that both backends agree bitwise on each input, then reports
best-of-N wall times and the speedup ratio.

Usage: python benchmarks/bench_kernels.py [--repeats N]
"""

import argparse
import time

import numpy as np

from ccfsim.kernels import py_impl

try:
    from ccfsim.kernels import _core
except ImportError:
    _core = None


def _seed_matrix(rng, m):
    mat = np.zeros((m, m), dtype=np.uint64)
    for a in range(m):
        for b in range(a + 1, m):
            mat[a, b] = np.uint64(int(rng.integers(0, 2**63)))
    return mat


def workloads():
    rng = np.random.default_rng(7)
    mat16 = _seed_matrix(rng, 16)
    mat48 = _seed_matrix(rng, 48)
    x_small = rng.normal(size=(50, 13))
    x_large = rng.normal(size=(200, 64))
    return [
        ("prg_values 64k", "prg_values", (12345, 9, 1 << 16)),
        ("pair_masks 16x13", "pair_masks", (mat16, 9, 13)),
        ("pair_masks 48x64", "pair_masks", (mat48, 9, 64)),
        ("pairwise_sq_sum 50x13", "pairwise_sq_sum", (x_small,)),
        ("pairwise_sq_sum 200x64", "pairwise_sq_sum", (x_large,)),
    ]


def best_of(fn, args, repeats):
    best = float("inf")
    for _ in range(repeats):
        t0 = time.perf_counter()
        fn(*args)
        best = min(best, time.perf_counter() - t0)
    return best


def check_parity(name, args):
    a = getattr(py_impl, name)(*args)
    b = getattr(_core, name)(*args)
    if isinstance(a, np.ndarray):
        # integer kernels must agree bitwise
        assert np.array_equal(a, b), f"{name}: backend mismatch"
    else:
        # float reduction: summation order may differ between backends
        assert abs(a - b) <= 1e-9 * max(1.0, abs(a)), \
            f"{name}: backend mismatch"


def main():
    parser = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    parser.add_argument("--repeats", type=int, default=7,
                        help="timing repeats per workload (best is kept)")
    args = parser.parse_args()

    if _core is None:
        print("compiled backend not built; timing the numpy fallback only")
    header = f"{'workload':<24}{'python':>12}{'compiled':>12}{'speedup':>10}"
    print(header)
    print("-" * len(header))
    for label, fn_name, fn_args in workloads():
        py_fn = getattr(py_impl, fn_name)
        py_t = best_of(py_fn, fn_args, args.repeats)
        if _core is None:
            print(f"{label:<24}{py_t * 1e3:>10.3f}ms{'-':>12}{'-':>10}")
            continue
        check_parity(fn_name, fn_args)
        c_t = best_of(getattr(_core, fn_name), fn_args, args.repeats)
        print(f"{label:<24}{py_t * 1e3:>10.3f}ms{c_t * 1e3:>10.3f}ms"
              f"{py_t / c_t:>9.1f}x")


if __name__ == "__main__":
    main()
