#!/usr/bin/env python3
"""Benchmark the compiled stepping kernel against the pure-Python fallback.

Runs the same workloads through both backends, checks the outputs are
bit-identical, and reports steps/second plus the speedup.

    python benchmarks/bench_kernels.py [--steps N]
"""

import argparse
import math
import time

import numpy as np

from doublewell.kernels import get_impl
from doublewell.model import Constant, LinearAtRoot, Oscillatory
from doublewell.sde import path_generator


def run(impl, d, x0, n_steps, dt, milstein, seed):
    kind, par = d.pack()
    gen = path_generator(seed, 0)
    sqrt_dt = math.sqrt(dt)
    x = x0
    done = 0
    t0 = time.perf_counter()
    while done < n_steps:
        m = min(1 << 16, n_steps - done)
        noise = gen.standard_normal(m)
        x, k, code, _ = impl.run_path_chunk(
            x, noise, dt, sqrt_dt, 1.0, 1.0, 1.0, kind, par, milstein,
            0, 0.0, 0.0, 0.0, 50.0, 0.0, 0.0, 1.0, None,
        )
        done += k
        if code:
            raise RuntimeError(f"unexpected stop code {code}")
    return x, time.perf_counter() - t0


def main():
    ap = argparse.ArgumentParser(description=__doc__)
    ap.add_argument("--steps", type=int, default=2_000_000,
                    help="steps per workload (default 2e6)")
    args = ap.parse_args()

    workloads = [
        ("constant sigma, Euler-Maruyama", Constant(1.0), False),
        ("linear-at-root sigma, Milstein", LinearAtRoot(0.0, 2.0, 10.0), True),
        ("oscillatory sigma, Euler-Maruyama", Oscillatory(0.0, 1.0, 3.0), False),
    ]
    compiled = None
    try:
        compiled = get_impl("compiled")
    except ImportError:
        print("compiled kernel not available; showing fallback only")
    fallback = get_impl("python")

    for label, d, milstein in workloads:
        print(f"\n{label}  ({args.steps} steps, dt=1e-3)")
        x_py, t_py = run(fallback, d, 0.3, args.steps, 1e-3, milstein, 42)
        print(f"  python   : {args.steps / t_py:12.0f} steps/s  ({t_py:.3f} s)")
        if compiled is not None:
            x_cy, t_cy = run(compiled, d, 0.3, args.steps, 1e-3, milstein, 42)
            print(f"  compiled : {args.steps / t_cy:12.0f} steps/s  ({t_cy:.3f} s)")
            print(f"  speedup  : {t_py / t_cy:8.1f}x   bit-identical: {x_py == x_cy}")


if __name__ == "__main__":
    main()
