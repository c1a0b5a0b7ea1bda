"""Compare the compiled and pure-Python kernel backends.

Times `pava_kernel` and the full `em_pava_run` loop on synthetic problems of
increasing size and verifies both backends agree to machine precision.

Usage: python benchmarks/bench_backends.py
"""

import time

import numpy as np

from isomix import simulation as sim
from isomix._kernels import BACKEND, reference
from isomix.core import TimeGrid, even_grid
from isomix.estimators import _group_layout, _initial_curve

try:
    from isomix._kernels import _speedups
except ImportError:
    _speedups = None


def timeit(fn, repeat=5):
    best = float("inf")
    for _ in range(repeat):
        t0 = time.perf_counter()
        out = fn()
        best = min(best, time.perf_counter() - t0)
    return best, out


def bench_pava(rng):
    print(f"{'pava n':>10} {'python (ms)':>12} {'cython (ms)':>12} {'speedup':>8}")
    for n in (100, 1_000, 10_000, 100_000):
        y = rng.normal(size=n)
        w = rng.uniform(0.1, 2.0, size=n)
        tp, a = timeit(lambda: reference.pava_kernel(y, w))
        if _speedups is None:
            print(f"{n:>10} {tp * 1e3:>12.3f} {'n/a':>12}")
            continue
        tc, b = timeit(lambda: _speedups.pava_kernel(y, w))
        assert np.max(np.abs(np.asarray(a) - np.asarray(b))) < 1e-12
        print(f"{n:>10} {tp * 1e3:>12.3f} {tc * 1e3:>12.3f} {tp / tc:>8.1f}x")


def bench_em(rng):
    print(f"\n{'em n':>10} {'python (ms)':>12} {'cython (ms)':>12} {'speedup':>8}")
    for n in (200, 500, 2_000):
        spec = sim.experiment(1, n=n, censoring=0.4, seed=3)
        sample, _ = sim.sample_experiment(spec, (3, 0))
        grid = TimeGrid(even_grid(50, 0.0, 10.0))
        layout = _group_layout(sample, grid)
        f0 = _initial_curve(sample, grid, "pooled_km")

        def run(kern):
            return kern.em_pava_run(*layout, f0.copy(), f0.copy(),
                                    1e-8, 500, 1e-12)

        tp, a = timeit(lambda: run(reference), repeat=3)
        if _speedups is None:
            print(f"{n:>10} {tp * 1e3:>12.2f} {'n/a':>12}")
            continue
        tc, b = timeit(lambda: run(_speedups), repeat=3)
        assert np.max(np.abs(a[0] - b[0])) < 1e-12
        assert np.max(np.abs(a[1] - b[1])) < 1e-12
        print(f"{n:>10} {tp * 1e3:>12.2f} {tc * 1e3:>12.2f} {tp / tc:>8.1f}x")


def main():
    print(f"active backend: {BACKEND}")
    rng = np.random.default_rng(0)
    bench_pava(rng)
    bench_em(rng)


if __name__ == "__main__":
    main()
