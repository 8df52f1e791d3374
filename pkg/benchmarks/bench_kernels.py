"""Time the compiled kernels against the pure-Python fallback.

    python benchmarks/bench_kernels.py [--repeat 5]

Workloads are sized like real runs: synthetic-LM hashing for a CNN/DM-length
pair, threshold sweeps over a SUMMAC validation split, the 66-combo weight
grid, and tau-b over a SummEval-sized rating set.
"""

import argparse
import importlib
import timeit

import numpy as np

from fflm._kernels import _fallback

try:
    _core = importlib.import_module("fflm._kernels._core")
except ImportError:
    _core = None


def workloads(impl, rng):
    blobs = [rng.bytes(int(rng.integers(40, 90))) for _ in range(5000)]
    scores = rng.normal(size=1281)
    labels = rng.integers(0, 2, 1281)
    deltas = rng.normal(size=(1281, 3))
    grid = [(a / 10, b / 10, (10 - a - b) / 10) for a in range(11) for b in range(11 - a)]
    x = rng.normal(size=1600).round(2)
    y = rng.integers(1, 6, 1600).astype(float)

    def hashing():
        for blob in blobs:
            impl.fnv1a64(blob)

    def sweep():
        impl.sweep_threshold(scores, labels)

    def grid_search():
        for a, b, c in grid:
            impl.sweep_threshold(deltas @ np.array([a, b, c]), labels)

    def kendall():
        impl.kendall_counts(x, y)

    return {
        "fnv1a64 x5000 (synthetic pair)": hashing,
        "sweep_threshold n=1281": sweep,
        "weight grid 66 x n=1281": grid_search,
        "kendall_counts n=1600": kendall,
    }


def main():
    parser = argparse.ArgumentParser(description=__doc__.split("\n\n")[0])
    parser.add_argument("--repeat", type=int, default=5)
    args = parser.parse_args()

    impls = {"python": _fallback}
    if _core is not None:
        impls["cython"] = _core
    else:
        print("compiled kernels not built; timing the fallback only")

    timings = {}
    for name, impl in impls.items():
        for label, fn in workloads(impl, np.random.default_rng(0)).items():
            best = min(timeit.repeat(fn, number=1, repeat=args.repeat))
            timings.setdefault(label, {})[name] = best

    header = f"{'workload':34s} {'python':>10s} {'cython':>10s} {'speedup':>8s}"
    print(header)
    print("-" * len(header))
    for label, t in timings.items():
        py = t["python"]
        cy = t.get("cython")
        if cy is None:
            print(f"{label:34s} {py * 1e3:8.2f}ms {'-':>10s} {'-':>8s}")
        else:
            print(f"{label:34s} {py * 1e3:8.2f}ms {cy * 1e3:8.2f}ms {py / cy:7.1f}x")


if __name__ == "__main__":
    main()
