"""Benchmark the numba hot kernels against the pure-numpy fallback.

Times sparse Gram assembly and full EP fits at a few training sizes
under both backends and prints a comparison table.

Run: python benchmarks/bench_backends.py [--sizes 100,200,330] [--repeats 3]
"""

import argparse
import time

import numpy as np

from stancekit import backend
from stancekit.inference import BinaryDataset, FitConfig, ep_fit
from stancekit.kernels import LinearKernelParams, feature_gram
from stancekit.synthetic import make_binary_dataset


def timed(fn, repeats):
    best = np.inf
    for _ in range(repeats):
        t0 = time.perf_counter()
        fn()
        best = min(best, time.perf_counter() - t0)
    return best


def main():
    parser = argparse.ArgumentParser(description=__doc__)
    parser.add_argument("--sizes", default="100,200,330")
    parser.add_argument("--repeats", type=int, default=3)
    args = parser.parse_args()
    sizes = [int(s) for s in args.sizes.split(",")]

    lanes = ["numpy"] + (["numba"] if backend.HAS_NUMBA else [])
    if "numba" in lanes:
        # trigger JIT compilation outside the timed region
        backend.set_backend("numba")
        inputs, labels = make_binary_dataset(seed=0, n=20, dim=50, nnz=8)
        ep_fit(BinaryDataset(inputs, labels), LinearKernelParams(0.3), FitConfig())

    cfg = FitConfig(ep_tolerance=1e-5, ep_max_sweeps=50)
    print(f"{'task':<16}{'n':>6}" + "".join(f"{lane:>12}" for lane in lanes) + f"{'speedup':>10}")
    for n in sizes:
        inputs, labels = make_binary_dataset(seed=1, n=n, dim=400, nnz=8)
        data = BinaryDataset(inputs, labels)
        kern = LinearKernelParams(0.3)
        rows = {"gram": {}, "ep_fit": {}}
        for lane in lanes:
            backend.set_backend(lane)
            rows["gram"][lane] = timed(lambda: feature_gram(inputs), args.repeats)
            rows["ep_fit"][lane] = timed(lambda: ep_fit(data, kern, cfg), args.repeats)
        for task, by_lane in rows.items():
            line = f"{task:<16}{n:>6}"
            for lane in lanes:
                line += f"{by_lane[lane] * 1000:>10.1f}ms"
            if len(lanes) == 2:
                line += f"{by_lane['numpy'] / by_lane['numba']:>9.1f}x"
            print(line)
    backend.set_backend(backend.default_backend_name())


if __name__ == "__main__":
    main()
