#!/usr/bin/env python3
"""Benchmark: compiled reward kernel vs the NumPy fallback.

The batched nested-aggregator reward is the hot kernel of the package:
every rollout batch, optimizer candidate, and lattice point funnels through
it.  This script times both backends on representative shapes and prints a
speedup table.

Run after building the extension in place:

    python setup.py build_ext --inplace
    python benchmarks/bench_kernels.py
"""

import time

import numpy as np

from hetgain._kernels import FAMILY_CODES, numpy_backend
from hetgain.aggregators import Family

try:
    from hetgain._kernels import _reward_ext
except ImportError:
    _reward_ext = None

SHAPES = [
    (512, 2, 2),      # one training batch of the small matrix game
    (512, 4, 4),      # the 4x4 game
    (4096, 3, 3),     # optimizer candidate sweep
    (200_000, 2, 3),  # grid-oracle scale
]

PAIRS = [
    ("min/max", Family.MAX, 0.0, Family.MIN, 0.0),
    ("mean/mean", Family.MEAN, 0.0, Family.MEAN, 0.0),
    ("softmax 5/-5", Family.SOFTMAX, 5.0, Family.SOFTMAX, -5.0),
    ("power-sum 2/0.5", Family.POWER_SUM, 2.0, Family.POWER_SUM, 0.5),
]


def timeit(fn, *args, repeats=7):
    best = float("inf")
    for _ in range(repeats):
        t0 = time.perf_counter()
        fn(*args)
        best = min(best, time.perf_counter() - t0)
    return best


def main():
    rng = np.random.default_rng(0)
    print(f"{'shape':>16} {'pair':>18} {'numpy':>10} {'compiled':>10} {'speedup':>8}")
    for shape in SHAPES:
        b, n, m = shape
        batch = np.ascontiguousarray(rng.dirichlet(np.ones(m), size=(b, n)))
        for label, inner, t_in, outer, t_out in PAIRS:
            ci, co = FAMILY_CODES[inner], FAMILY_CODES[outer]
            t_np = timeit(numpy_backend.batch_reward, batch, ci, t_in, co, t_out)
            if _reward_ext is None:
                print(f"{str(shape):>16} {label:>18} {t_np * 1e3:9.2f}ms {'n/a':>10} {'n/a':>8}")
                continue
            t_cy = timeit(_reward_ext.batch_reward, batch, ci, t_in, co, t_out)
            ref = numpy_backend.batch_reward(batch, ci, t_in, co, t_out)
            fast = _reward_ext.batch_reward(batch, ci, t_in, co, t_out)
            assert np.allclose(ref, fast, rtol=1e-12, atol=1e-12)
            print(
                f"{str(shape):>16} {label:>18} {t_np * 1e3:9.2f}ms "
                f"{t_cy * 1e3:9.2f}ms {t_np / t_cy:7.1f}x"
            )
    if _reward_ext is None:
        print("\ncompiled extension not available; showing numpy fallback only")


if __name__ == "__main__":
    main()
