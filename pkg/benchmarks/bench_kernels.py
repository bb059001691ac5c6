"""Compare the compiled and numpy kernel backends.

    python benchmarks/bench_kernels.py [--repeat N]

Prints best-of-N wall times for the two hot kernels and for the end-to-end
stages that call them, once per available backend, plus the speed-up.
"""
import argparse
import timeit

import numpy as np

from gaugecvt import correlation, cvt, kernels
from gaugecvt.grf import FieldSpec, generate_grf
from gaugecvt.grid import Grid


def cases():
    rng = np.random.default_rng(0)
    pts = Grid(160, 160).cell_centers()
    w = rng.uniform(0.1, 1.0, len(pts))
    gens = rng.random((20, 2)) * 160
    z, _ = correlation.standardize(rng.standard_normal((1600, 1000)))
    rows = rng.integers(0, 1600, 160_000)
    cols = rng.integers(0, 1600, 160_000)
    obs = generate_grf(FieldSpec(Grid(40, 40), 1000, 1.0, 9.0, 1.0, seed=7))
    prob = cvt.DiscreteProblem(pts, w)
    init = cvt.initial_generators(prob, 20, seed=1)
    return {
        "assign_accumulate 25600 pts x 20 gens": lambda: kernels.assign_accumulate(pts, w, gens),
        "pair_correlations 160k pairs x 1000 steps": lambda: kernels.pair_correlations(z, rows, cols),
        "correlogram 40x40, lags 1..10": lambda: correlation.correlogram(obs, 10),
        "tn_solve 160x160, k=20": lambda: cvt.tn_solve(prob, init),
    }


def main(argv=None):
    ap = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    ap.add_argument("--repeat", type=int, default=3)
    args = ap.parse_args(argv)
    original = kernels.backend()
    work = cases()
    timings = {}
    for name in kernels.BACKENDS:
        kernels.set_backend(name)
        for label, fn in work.items():
            fn()  # warm-up
            timings[(name, label)] = min(timeit.repeat(fn, number=1, repeat=args.repeat))
    kernels.set_backend(original)

    width = max(map(len, work))
    print(f"{'case':<{width}}  " + "  ".join(f"{b:>9}" for b in kernels.BACKENDS) + "  speed-up")
    for label in work:
        row = [timings[(b, label)] for b in kernels.BACKENDS]
        ratio = row[-1] / row[0] if len(row) == 2 else float("nan")
        print(f"{label:<{width}}  " + "  ".join(f"{t:8.3f}s" for t in row) + f"  {ratio:7.1f}x")


if __name__ == "__main__":
    main()
