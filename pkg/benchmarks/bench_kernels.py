"""Benchmark the compiled training kernels against the numpy fallback.

Times the three hot kernels on realistic shapes and a full training run on
a synthetic dataset, printing per-backend timings and the speedup. Usage:

    python benchmarks/bench_kernels.py [--users N] [--items M]
        [--density D] [--scores S] [--factors K] [--iterations IT]
        [--repeats R]
"""

import argparse
import os
import sys
import time

import numpy as np

from bemf import backend
from bemf import _kernels_py
from bemf.model import Hyperparams, fit
from bemf.synthetic import make_synthetic_dataset


def best_of(fn, repeats):
    """Minimum wall time of several calls; the least noisy point estimate."""
    samples = []
    for _ in range(repeats):
        t0 = time.perf_counter()
        fn()
        samples.append(time.perf_counter() - t0)
    return min(samples)


def bench_row(name, py_time, c_time):
    if c_time is None:
        print(f"{name:<24} numpy {py_time * 1000:9.2f} ms   compiled      "
              f"n/a        speedup   n/a")
    else:
        print(f"{name:<24} numpy {py_time * 1000:9.2f} ms   compiled "
              f"{c_time * 1000:9.2f} ms   speedup {py_time / c_time:5.1f}x")


def main(argv=None):
    parser = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    parser.add_argument("--users", type=int, default=2000)
    parser.add_argument("--items", type=int, default=500)
    parser.add_argument("--density", type=float, default=0.05)
    parser.add_argument("--scores", type=int, default=5)
    parser.add_argument("--factors", type=int, default=6)
    parser.add_argument("--iterations", type=int, default=20)
    parser.add_argument("--repeats", type=int, default=5)
    args = parser.parse_args(argv)

    compiled = None
    if backend.compiled_available():
        from bemf import _kernels as compiled  # noqa: N813
    else:
        print("compiled kernels not built; timing the numpy backend only\n")

    ds = make_synthetic_dataset(num_users=args.users, num_items=args.items,
                                num_scores=args.scores, density=args.density,
                                seed=99)
    print(f"dataset: {ds.num_users} users x {ds.num_items} items, "
          f"{ds.num_ratings} ratings, {args.scores} scores, "
          f"k={args.factors}\n")

    rng = np.random.default_rng(0)
    k = args.factors
    target0 = rng.random((ds.num_users, k))
    other = rng.random((ds.num_items, k))
    is_match = (ds.user_scores == 0).astype(np.uint8)

    def run_update(kern):
        target = target0.copy()
        kern.update_factors(target, other, ds.user_indptr, ds.user_items,
                            is_match, 0.05, 0.1)

    py = best_of(lambda: run_update(_kernels_py), args.repeats)
    ct = (best_of(lambda: run_update(compiled), args.repeats)
          if compiled else None)
    bench_row("update_factors", py, ct)

    def run_cost(kern):
        kern.data_cost(target0, other, ds.users, ds.items, is_match)

    py = best_of(lambda: run_cost(_kernels_py), args.repeats)
    ct = (best_of(lambda: run_cost(compiled), args.repeats)
          if compiled else None)
    bench_row("data_cost", py, ct)

    values = np.asarray(ds.score_set.values)[ds.score_idx]
    order = rng.permutation(ds.num_ratings).astype(np.int64)
    P0 = rng.random((ds.num_users, k))
    Q0 = rng.random((ds.num_items, k))

    def run_sgd(kern):
        P, Q = P0.copy(), Q0.copy()
        bu, bi = np.zeros(ds.num_users), np.zeros(ds.num_items)
        kern.sgd_epoch(P, Q, bu, bi, ds.users, ds.items, values, order,
                       float(values.mean()), 0.01, 0.05, True)

    py = best_of(lambda: run_sgd(_kernels_py), args.repeats)
    ct = (best_of(lambda: run_sgd(compiled), args.repeats)
          if compiled else None)
    bench_row("sgd_epoch", py, ct)

    hp = Hyperparams(factors=k, learning_rate=0.05, regularization=0.1,
                     iterations=args.iterations, seed=0)

    def run_fit(which):
        os.environ["BEMF_BACKEND"] = which
        try:
            fit(ds, hp)
        finally:
            os.environ.pop("BEMF_BACKEND", None)

    py = best_of(lambda: run_fit("python"), max(1, args.repeats // 2))
    ct = (best_of(lambda: run_fit("compiled"), max(1, args.repeats // 2))
          if compiled else None)
    bench_row(f"fit ({args.iterations} iterations)", py, ct)
    return 0


if __name__ == "__main__":
    sys.exit(main())
