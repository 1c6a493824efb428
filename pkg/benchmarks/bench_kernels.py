"""Time the numba kernels against the pure-numpy fallback on the same workloads.

    python benchmarks/bench_kernels.py [--paths N] [--repeat R]

Both backends see identical random streams, so the printed estimates should
agree to rounding.
"""

import argparse
import time

import numpy as np

from skewstop import OperatorContext, SkewParams, shifted_call, solve
from skewstop.simulator import WalkConfig, exact_sample, skew_walk_stop
from skewstop.stopping_solver import stopping_set


def best_of(fn, repeat):
    times, result = [], None
    for _ in range(repeat):
        t0 = time.perf_counter()
        result = fn()
        times.append(time.perf_counter() - t0)
    return min(times), result


def main():
    ap = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    ap.add_argument("--paths", type=int, default=5_000)
    ap.add_argument("--repeat", type=int, default=3)
    args = ap.parse_args()

    # single-boundary regime: from the origin every path has to wander before it stops
    params = SkewParams(0.55, 0.3)
    payoff = shifted_call(1.0)
    sol = solve(OperatorContext(params, payoff))
    region = stopping_set(sol)

    workloads = {
        "stopped walk, jump scheme": lambda be: skew_walk_stop(
            0.0, region, params.r, payoff, WalkConfig(n_paths=args.paths, backend=be), params
        ).mean,
        "stopped walk, step scheme": lambda be: skew_walk_stop(
            # the literal walk is far slower in numpy, so it runs on a coarse grid
            0.0, region, params.r, payoff, WalkConfig(n_paths=args.paths // 25, dx=2e-2, scheme="step", backend=be), params
        ).mean,
        "exact marginal sampler": lambda be: float(np.mean(exact_sample(0.0, 1.0, params, 10 * args.paths, seed=1, backend=be))),
    }

    for name, work in workloads.items():
        work("numba")  # compile or load cached machine code outside the timing
        t_np, v_np = best_of(lambda: work("numpy"), args.repeat)
        t_nb, v_nb = best_of(lambda: work("numba"), args.repeat)
        print(f"{name}: Python: {t_np:.3f}s, Numba: {t_nb:.3f}s, speedup {t_np / t_nb:.1f}x  (estimates {v_np:.10f} / {v_nb:.10f})")


if __name__ == "__main__":
    main()
