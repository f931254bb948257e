#!/usr/bin/env python3
"""Time the numba and numpy backends on one study replication.

Usage: python benchmarks/bench_backends.py [--sizes 100,200,400,800] [--repeat 5]

Each timing covers the counterfactual CDF, the Rothe comparator and the
inference context (the three kernel-heavy steps) on a fresh draw. The first
numba call per size is excluded so JIT compilation is not counted. The
script also checks that both backends agree to 1e-12.
"""

import argparse
import time

import numpy as np

from cfkm import _accel
from cfkm.counterfactual import counterfactual_cdf, rothe_cdf
from cfkm.inference import build_context, effect_variances
from cfkm.kernels import KernelSpec, default_bandwidth
from cfkm.simulation import PAPER_GRID, derive_seed, generate_draw

SPEC = KernelSpec(2)
INFERENCE_GRID = [5.0, 6.0, 7.0]


def one_pass(draw):
    h = default_bandwidth(draw.sample.n)
    cf = counterfactual_cdf(draw.sample, draw.xstar, h, SPEC, PAPER_GRID).values
    ro = rothe_cdf(draw.sample, draw.xstar, h, SPEC, PAPER_GRID).values
    ctx = build_context(draw.sample, draw.xstar, h, SPEC, INFERENCE_GRID)
    var = effect_variances(ctx)["f_star"]
    return np.concatenate((cf, ro, var))


def best_of(draw, repeat):
    times = []
    out = None
    for _ in range(repeat):
        t0 = time.perf_counter()
        out = one_pass(draw)
        times.append(time.perf_counter() - t0)
    return min(times), out


def main():
    parser = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    parser.add_argument("--sizes", default="100,200,400,800")
    parser.add_argument("--repeat", type=int, default=5)
    args = parser.parse_args()
    sizes = [int(v) for v in args.sizes.split(",")]

    print(f"{'n':>6} {'numpy [s]':>11} {'numba [s]':>11} {'speedup':>8} {'max |diff|':>11}")
    for n in sizes:
        draw = generate_draw(n, derive_seed(1, n, 0))
        with _accel.use_backend("numba"):
            one_pass(draw)  # warm-up / compile
            t_numba, out_numba = best_of(draw, args.repeat)
        with _accel.use_backend("numpy"):
            t_numpy, out_numpy = best_of(draw, args.repeat)
        diff = float(np.max(np.abs(out_numba - out_numpy)))
        flag = "" if diff <= 1e-12 else "  MISMATCH"
        print(f"{n:>6} {t_numpy:>11.4f} {t_numba:>11.4f} {t_numpy / t_numba:>7.1f}x {diff:>11.2e}{flag}")


if __name__ == "__main__":
    main()
