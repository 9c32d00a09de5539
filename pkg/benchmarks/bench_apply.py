"""Timing of the hierarchical kernel apply against the dense Galerkin route.

The dense route assembles the full N x N cylinder-pair matrix and multiplies;
the hierarchical route walks prefix-tree partial sums in O(N depth).  Both
agree to machine precision (asserted), the point here is the cost crossover.
"""

import argparse
import time

import numpy as np

from treeboundary import CylinderFunction, LogGromov, TreeModel, fast_apply, galerkin
from treeboundary.cylfun import n_cylinders


def bench(model, depth, repeats):
    rng = np.random.Generator(np.random.Philox(key=7))
    f = CylinderFunction(model, depth, rng.normal(size=n_cylinders(model, depth)))
    t0 = time.perf_counter()
    for _ in range(repeats):
        fast = fast_apply(model, LogGromov(), f)
    t_fast = (time.perf_counter() - t0) / repeats
    t_dense = float("nan")
    if n_cylinders(model, depth) <= model.dense_cap:
        t0 = time.perf_counter()
        form = galerkin(model, LogGromov(), depth)
        t_build = time.perf_counter() - t0
        t0 = time.perf_counter()
        for _ in range(repeats):
            dense = form.apply(f)
        t_dense = (time.perf_counter() - t0) / repeats
        err = np.max(np.abs(dense.values - fast.values)) / np.max(np.abs(dense.values))
        assert err <= 1e-12, f"routes disagree: {err}"
        return n_cylinders(model, depth), t_fast, t_dense, t_build
    return n_cylinders(model, depth), t_fast, t_dense, float("nan")


def main():
    parser = argparse.ArgumentParser(description=__doc__)
    parser.add_argument("--k", type=int, default=2)
    parser.add_argument("--max-depth", type=int, default=10)
    parser.add_argument("--repeats", type=int, default=5)
    args = parser.parse_args()
    model = TreeModel(args.k)
    print(f"{'depth':>5} {'cells':>8} {'fast (s)':>12} {'dense mul (s)':>14} {'dense build (s)':>16}")
    for depth in range(1, args.max_depth + 1):
        cells, t_fast, t_dense, t_build = bench(model, depth, args.repeats)
        print(f"{depth:>5} {cells:>8} {t_fast:>12.2e} {t_dense:>14.2e} {t_build:>16.2e}")


if __name__ == "__main__":
    main()
