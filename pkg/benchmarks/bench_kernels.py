"""Time the compiled kernels against the pure-Python fallback.

Usage::

    python benchmarks/bench_kernels.py [--repeat 5]

Each kernel runs on the same inputs under both backends. The outputs are
compared before timing so a speedup never hides a wrong answer.
"""

import argparse
import timeit

import numpy as np

from twistk import kernels


def workloads(rng):
    masks = np.arange(1 << 10, dtype=np.int64)
    overlap = rng.random((60, 60))
    va, vb = rng.normal(size=60), rng.normal(size=60)
    pairs = rng.integers(0, 1 << 12, size=(2000, 2)).tolist()
    return {
        "reorder_sign x2000": lambda: [kernels.reorder_sign(a, b) for a, b in pairs],
        "wedge_sign_table 256x256": lambda: kernels.wedge_sign_table(masks[:256], masks[:256]),
        "fermion_ladder 1024 masks": lambda: kernels.fermion_ladder(masks, 4, True),
        "greedy_match 60x60": lambda: kernels.greedy_match(overlap, va, vb),
    }


def same(a, b):
    if isinstance(a, tuple):
        return all(same(x, y) for x, y in zip(a, b))
    return np.array_equal(np.asarray(a), np.asarray(b))


def main(argv=None):
    parser = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    parser.add_argument("--repeat", type=int, default=5)
    args = parser.parse_args(argv)

    if "compiled" not in kernels.available_backends():
        print("compiled backend not built; only the Python fallback is available")
        return 1
    jobs = workloads(np.random.default_rng(0))
    previous = kernels.backend()
    print(f"{'kernel':<28}{'python (ms)':>14}{'compiled (ms)':>16}{'speedup':>10}")
    try:
        for name, job in jobs.items():
            results, times = {}, {}
            for backend in ("python", "compiled"):
                kernels.use_backend(backend)
                results[backend] = job()
                times[backend] = min(timeit.repeat(job, number=1, repeat=args.repeat)) * 1e3
            if not same(results["python"], results["compiled"]):
                raise SystemExit(f"backends disagree on {name}")
            ratio = times["python"] / times["compiled"]
            print(f"{name:<28}{times['python']:>14.3f}{times['compiled']:>16.3f}{ratio:>9.1f}x")
    finally:
        kernels.use_backend(previous)
    return 0


if __name__ == "__main__":
    raise SystemExit(main())
