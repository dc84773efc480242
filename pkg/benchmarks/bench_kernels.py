#!/usr/bin/env python3
"""Benchmark the compiled profit kernels against the NumPy fallback.

Times the three hot paths on a representative market: batched envelope
profit (the tariff-search workload), per-customer envelope stats, and the
Monte Carlo evaluator.  Also runs one full five-segment tariff search per
backend.

Usage: python benchmarks/bench_kernels.py [--customers N] [--grid S]
"""

import argparse
import time

import numpy as np

import tariffkit as tk
from tariffkit import _kernels_numpy
from tariffkit.dist import sample
from tariffkit.optimize import optimize_schedule
from tariffkit.profit import ProfitEvaluator

try:
    from tariffkit import _kernels_c
except ImportError:
    _kernels_c = None


def build_market(n, seed=7):
    rng = np.random.default_rng(seed)
    model = tk.ValueModel(
        beta={"const": 2260.56, "x": 150.0},
        year_effects={2021: 0.0},
        size_effects={(1, 20): 0.0, (20, 50): -657.4, (50, None): -835.73},
        sigma=385.44,
    )
    sizes = rng.choice([3, 6, 12, 16, 25, 40, 60, 90, 130, 170], size=n)
    customers = tuple(
        tk.CustomerRecord(
            id=f"b{i}",
            year=2021,
            covariates={"const": 1.0, "x": float(rng.normal(3.0, 1.0))},
            size=int(sizes[i]),
            success=1,
            observed_unit_price=2500.0,
        )
        for i in range(n)
    )
    return tk.Market(customers, model, tk.CostParams(3630.0, 760.0))


def timeit(fn, repeats=3):
    best = float("inf")
    for _ in range(repeats):
        t0 = time.perf_counter()
        fn()
        best = min(best, time.perf_counter() - t0)
    return best


def main():
    parser = argparse.ArgumentParser()
    parser.add_argument("--customers", type=int, default=1000)
    parser.add_argument("--grid", type=int, default=3125, help="schedules per batch call")
    parser.add_argument("--draws", type=int, default=20000)
    args = parser.parse_args()

    market = build_market(args.customers)
    ev = ProfitEvaluator(market, "via_origin")
    rng = np.random.default_rng(0)
    grid = rng.uniform(0, 5000, (args.grid, ev.n_rates))
    pay_batch = ev.payment_matrix(grid)
    pay_one = ev.payments(grid[0])
    eps = sample(rng, "logistic", (args.draws, len(ev.mu_sorted)))

    backends = [("numpy", _kernels_numpy)]
    if _kernels_c is not None:
        backends.append(("cython", _kernels_c))

    print(f"market: {args.customers} customers, grid batch {args.grid}, {args.draws} MC draws")
    print(f"{'kernel':28s}" + "".join(f"{name:>12s}" for name, _ in backends) + f"{'speedup':>10s}")

    rows = [
        (
            "envelope_profit_batch",
            lambda mod: mod.envelope_profit_batch(
                ev.cls_ptr, ev.slope, ev.qty, pay_batch, ev.mem_ptr, ev.mu_sorted,
                ev.sigma, ev.family, ev.c1, ev.c2,
            ),
            1,
        ),
        (
            "envelope_customer_stats",
            lambda mod: mod.envelope_customer_stats(
                ev.cls_ptr, ev.slope, ev.qty, pay_one, ev.mem_ptr, ev.mu_sorted,
                ev.sigma, ev.family, ev.c1, ev.c2,
            ),
            20,
        ),
        (
            "mc_totals",
            lambda mod: mod.mc_totals(
                ev.cls_ptr, ev.slope, ev.qty, pay_one, ev.mem_ptr, ev.mu_sorted,
                ev.sigma, eps, ev.c1, ev.c2,
            ),
            1,
        ),
    ]
    for label, call, reps in rows:
        times = []
        for _, mod in backends:
            times.append(timeit(lambda: [call(mod) for _ in range(reps)]))
        speedup = times[0] / times[-1] if len(times) > 1 else 1.0
        print(
            f"{label:28s}"
            + "".join(f"{t * 1000:11.1f}ms" for t in times)
            + f"{speedup:9.1f}x"
        )

    import os

    results = {}
    for name, _ in backends:
        os.environ["TARIFFKIT_KERNELS"] = "pure" if name == "numpy" else "c"
        import importlib

        import tariffkit.kernels as kernels_mod

        importlib.reload(kernels_mod)
        import tariffkit.profit as profit_mod

        importlib.reload(profit_mod)
        import tariffkit.optimize as optimize_mod

        importlib.reload(optimize_mod)
        t0 = time.perf_counter()
        search = optimize_mod.optimize_schedule(market, "via_origin")
        dt = time.perf_counter() - t0
        results[name] = (dt, search.value)
        print(f"optimize_schedule(via_origin) [{name:6s}]: {dt:7.2f}s  profit {search.value:,.0f}")
    os.environ.pop("TARIFFKIT_KERNELS", None)
    if len(results) == 2:
        vals = [results[n][1] for n in results]
        assert abs(vals[0] - vals[1]) <= 1e-6 * max(abs(v) for v in vals), "backends disagree"
        print(f"end-to-end speedup: {results['numpy'][0] / results['cython'][0]:.1f}x (identical optima)")


if __name__ == "__main__":
    main()
