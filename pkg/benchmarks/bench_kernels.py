"""Time the compiled and pure-Python fold kernels on the same inputs.

    python benchmarks/bench_kernels.py --scans 50 5000 --repeat 20
"""
import argparse
import time

import numpy as np

from snfilter.kernels import available_backends, spsa_fold


def make_inputs(n_scans, n_bins, seed):
    rng = np.random.default_rng(seed)
    intensities = 1.0 + 0.9 * rng.choice([-1.0, 1.0], n_scans)
    currents = rng.uniform(0.0, 3.0, (n_scans, n_bins))
    means = np.full(n_scans, 1.0)
    dispersions = np.full(n_scans, 0.81)
    controls = np.linspace(0, n_bins - 1, 12).astype(np.intp)
    return np.zeros(n_bins), intensities, means, dispersions, currents, controls


def best_time(backend, inputs, repeat):
    theta0, intensities, means, dispersions, currents, controls = inputs
    best = float("inf")
    for _ in range(repeat):
        start = time.perf_counter()
        out = spsa_fold(theta0, intensities, means, dispersions, currents, 0, controls, backend=backend)
        best = min(best, time.perf_counter() - start)
    return best, out[0]


def main(argv=None):
    parser = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    parser.add_argument("--scans", type=int, nargs="+", default=[50, 5000])
    parser.add_argument("--bins", type=int, default=241)
    parser.add_argument("--repeat", type=int, default=20)
    parser.add_argument("--seed", type=int, default=0)
    args = parser.parse_args(argv)

    backends = available_backends()
    print(f"backends: {', '.join(backends)}")
    print(f"{'scans':>7} {'bins':>5} " + " ".join(f"{b + ' ms':>12}" for b in backends) + f" {'speedup':>8} {'equal':>6}")
    for n in args.scans:
        inputs = make_inputs(n, args.bins, args.seed)
        runs = {b: best_time(b, inputs, args.repeat) for b in backends}
        row = f"{n:>7} {args.bins:>5} " + " ".join(f"{runs[b][0] * 1e3:>12.3f}" for b in backends)
        if len(backends) == 2:
            speedup = runs["python"][0] / runs["cython"][0]
            equal = np.array_equal(runs["python"][1], runs["cython"][1])
            row += f" {speedup:>7.1f}x {str(equal):>6}"
        print(row)


if __name__ == "__main__":
    main()
