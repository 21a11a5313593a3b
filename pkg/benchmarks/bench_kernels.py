"""Compare the compiled and pure-Python kernel backends on full-episode workloads.

Usage: python benchmarks/bench_kernels.py [--T 100000] [--repeat 3]
"""

from __future__ import annotations

import argparse
import math
import time

import numpy as np

from bayescp.core import Prior
from bayescp.datagen import make_rng
from bayescp.kernels import available_backends

LEVELS = [0.1, 0.5, 0.9]


def workloads(mod, scores, prior):
    T = len(scores)
    lams = 1.0 / np.sqrt(np.arange(1, T + 1))
    m = max(2, math.ceil(math.sqrt(T)))
    thr = np.full(T, 0.5)
    return {
        "exact run": lambda: mod.ExactKernel(prior).run(scores, LEVELS, lams),
        "erm run": lambda: mod.ExactKernel(prior).run_erm(scores, LEVELS),
        "quantized run": lambda: mod.GridKernel(prior, m).run(scores, LEVELS, lams),
        "discounted run": lambda: mod.DiscountedKernel(prior, m, 0.99).run(scores, LEVELS, 0.1),
        "regret curve": lambda: mod.regret_curve(scores, thr, 0.5),
    }


def best_of(fn, repeat: int) -> tuple[float, np.ndarray]:
    best, out = math.inf, None
    for _ in range(repeat):
        start = time.perf_counter()
        out = fn()
        best = min(best, time.perf_counter() - start)
    return best, out


def main(argv=None) -> int:
    parser = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    parser.add_argument("--T", type=int, default=100_000)
    parser.add_argument("--repeat", type=int, default=3)
    parser.add_argument("--seed", type=int, default=0)
    args = parser.parse_args(argv)

    backends = available_backends()
    scores = make_rng(args.seed).random(args.T)
    prior = Prior([(0.0, 0.0), (0.5, 0.7), (1.0, 1.0)])
    names = sorted(backends)
    results = {n: {} for n in names}
    outputs = {n: {} for n in names}
    for n in names:
        for label, fn in workloads(backends[n], scores, prior).items():
            results[n][label], outputs[n][label] = best_of(fn, args.repeat)

    print(f"T = {args.T}, {len(LEVELS)} levels, best of {args.repeat}")
    header = f"{'workload':<16}" + "".join(f"{n:>12}" for n in names)
    if len(names) == 2:
        header += f"{'speedup':>10}{'identical':>11}"
    print(header)
    for label in results[names[0]]:
        row = f"{label:<16}" + "".join(f"{results[n][label]:>11.3f}s" for n in names)
        if len(names) == 2:
            a, b = names
            row += f"{results['python'][label] / results['cython'][label]:>9.1f}x"
            row += f"{str(np.array_equal(outputs[a][label], outputs[b][label])):>11}"
        print(row)
    if len(names) < 2:
        print("compiled kernels are not built; only the Python fallback was timed")
    return 0


if __name__ == "__main__":
    raise SystemExit(main())
