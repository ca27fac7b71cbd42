"""Time the compiled kernels against the numpy fallback.

    python3 benchmarks/bench_kernels.py [--repeat N]
"""
import argparse
import timeit

import numpy as np

from fairbell import kernels
from fairbell.sampling import random_efficiency_table, random_psd, random_pure


def cases(rng):
    t = random_efficiency_table(rng, 4)
    pair = np.array([[t.pair_efficiency(a, b) for b in range(2)] for a in range(2)])
    trials = np.full((2, 2), 10_000)
    succ = rng.binomial(trials, np.outer([0.9, 0.8], [0.95, 0.7]) * np.array([[1, 1], [1, 0.9]]))
    D = np.array([random_psd(rng, 4, -1, 1) for _ in range(4)])
    M = np.array([random_psd(rng, 4) for _ in range(4)])
    psi = random_pure(rng, 4)
    signs = np.array([1.0, 1.0, 1.0, -1.0])
    return {
        "lhv_extremal_bounds (n=4)": ("lhv_extremal_bounds", (t.weights, t.eff[0], t.eff[1], pair)),
        "fit_product_binomial": ("fit_product_binomial", (succ, trials)),
        "pure_ratio_value_grad (d=4)": ("pure_ratio_value_grad", (psi, D, M, signs)),
    }


def main():
    parser = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    parser.add_argument("--repeat", type=int, default=5)
    args = parser.parse_args()
    if kernels.compiled_backend is None:
        print("compiled kernels not built; only the fallback is timed")
    backends = [("python", kernels.python_backend)]
    if kernels.compiled_backend is not None:
        backends.append(("cython", kernels.compiled_backend))

    print(f"{'kernel':32s} " + " ".join(f"{name + ' us':>12s}" for name, _ in backends) + "   speedup")
    for label, (fn, argv) in cases(np.random.default_rng(0)).items():
        times = []
        for _, mod in backends:
            f = getattr(mod, fn)
            timer = timeit.Timer(lambda: f(*argv))
            n, _ = timer.autorange()
            best = min(timer.repeat(args.repeat, n)) / n
            times.append(best * 1e6)
        speed = f"{times[0] / times[1]:8.1f}x" if len(times) > 1 else ""
        print(f"{label:32s} " + " ".join(f"{t:12.1f}" for t in times) + "   " + speed)


if __name__ == "__main__":
    main()
