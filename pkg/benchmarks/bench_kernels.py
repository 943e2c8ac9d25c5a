#!/usr/bin/env python3
"""Timing comparison of the compiled split/routing kernels against the
pure-numpy fallback, plus end-to-end training, with a bit-identity check
on every measured result.

    python3 benchmarks/bench_kernels.py [--rows 4000] [--trees 20]
"""

import argparse
import time

import numpy as np

from forestflow import _kernels
from forestflow.rf_core import Dataset, RFConfig, train_forest


def _dataset(n_rows, n_covariates, n_classes, seed=0):
    rng = np.random.default_rng(seed)
    X = np.ascontiguousarray(rng.normal(size=(n_rows, n_covariates)))
    y = rng.integers(0, n_classes, n_rows)
    labels = [f"c{k}" for k in y]
    names = tuple(f"x.{j + 1}" for j in range(n_covariates))
    return Dataset.from_labels(names, X, labels)


def _time(fn, repeats):
    best = float("inf")
    for _ in range(repeats):
        start = time.perf_counter()
        out = fn()
        best = min(best, time.perf_counter() - start)
    return best, out


def bench_best_split(data, repeats=5):
    node_rows = np.arange(data.n_rows, dtype=np.int64)
    candidates = np.arange(data.n_covariates, dtype=np.int64)
    n_classes = len(data.class_names)
    results = {}
    for name in ("compiled", "python"):
        mod = _kernels.backend_module(name)
        results[name] = _time(
            lambda: mod.best_split(
                data.rows, node_rows, data.response_codes, candidates, n_classes
            ),
            repeats,
        )
    return results


def bench_route_rows(data, forest, repeats=5):
    node_rows = np.arange(data.n_rows, dtype=np.int64)
    results = {}
    for name in ("compiled", "python"):
        mod = _kernels.backend_module(name)

        def run():
            return [
                np.asarray(
                    mod.route_rows(
                        data.rows, node_rows,
                        t.feature, t.threshold, t.left, t.right,
                    )
                ).copy()
                for t in forest.trees
            ]

        results[name] = _time(run, repeats)
    return results


def bench_train(data, config, repeats=3):
    results = {}
    for name in ("compiled", "python"):
        previous = _kernels.use_backend(name)
        try:
            results[name] = _time(lambda: train_forest(data, config), repeats)
        finally:
            _kernels.use_backend(previous)
    return results


def _report(label, results, same):
    tc, _ = results["compiled"]
    tp, _ = results["python"]
    flag = "identical" if same else "DIFFER"
    print(
        f"{label:<12} compiled {tc * 1e3:9.2f} ms   python {tp * 1e3:9.2f} ms"
        f"   speedup {tp / tc:5.1f}x   results {flag}"
    )
    if not same:
        raise SystemExit(f"{label}: backends disagree")


def main():
    ap = argparse.ArgumentParser(description=__doc__)
    ap.add_argument("--rows", type=int, default=4000)
    ap.add_argument("--covariates", type=int, default=36)
    ap.add_argument("--classes", type=int, default=6)
    ap.add_argument("--trees", type=int, default=20)
    args = ap.parse_args()

    if _kernels.BACKEND != "compiled":
        raise SystemExit(
            "compiled backend not available; build the extension first "
            "(pip install -e . --no-build-isolation)"
        )

    data = _dataset(args.rows, args.covariates, args.classes)
    config = RFConfig(n_trees=args.trees, mtry=8, seed=0)
    print(
        f"dataset {args.rows} x {args.covariates}, {args.classes} classes, "
        f"{args.trees} trees"
    )

    res = bench_best_split(data)
    _report("best_split", res, res["compiled"][1] == res["python"][1])

    forest = train_forest(data, config)
    res = bench_route_rows(data, forest)
    same = all(
        np.array_equal(a, b)
        for a, b in zip(res["compiled"][1], res["python"][1])
    )
    _report("route_rows", res, same)

    res = bench_train(data, config)
    same = all(
        np.array_equal(a.threshold, b.threshold, equal_nan=True)
        and np.array_equal(a.feature, b.feature)
        for a, b in zip(res["compiled"][1].trees, res["python"][1].trees)
    )
    _report("train", res, same)


if __name__ == "__main__":
    main()
