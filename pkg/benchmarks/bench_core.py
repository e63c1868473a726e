"""Compiled core against the numpy fallback on the hot kernels.

    python3 benchmarks/bench_core.py [--sizes 1000,100000] [--repeat 5]

Prints per-kernel timings, the speedup and the largest difference between
the two backends (relative above 1, absolute below), then an end-to-end
estimate sweep run once per backend in a fresh interpreter.
"""
import argparse
import os
import subprocess
import sys
import timeit

import numpy as np

from bessel_harmonics import _fallback

try:
    from bessel_harmonics import _core
except ImportError:  # pragma: no cover
    sys.exit("compiled core not built; run `pip install -e . --no-build-isolation` first")


def _inputs(n, rng):
    t = 10 ** rng.uniform(-3, 3, n)
    x = 10 ** rng.uniform(-2, 2, n)
    y = 10 ** rng.uniform(-2, 2, n)
    return t, x, y


def _cases(n, rng):
    t, x, y = _inputs(n, rng)
    z = x * y / (2 * t)
    return {
        "log_ive": lambda m: m.log_ive(0.2, z),
        "ratio_defect": lambda m: m.ratio_defect(0.2, z),
        "scaled_defect": lambda m: m.scaled_defect(0.2, z),
        "kernel_parts": lambda m: m.kernel_parts(0.7, t, x, y),
    }


def _max_diff(a, b):
    # relative above 1, absolute below: the defects and kernel slopes cross zero
    a, b = (np.atleast_1d(np.asarray(v)) for v in (a, b))
    return float(np.max(np.abs(a - b) / np.maximum(1.0, np.maximum(np.abs(a), np.abs(b)))))


SWEEP = "from bessel_harmonics import estimates as e; e.verify_estimate('A6', 0.7, e.SampleSpec(points_per_decade=16))"


def _sweep(backend, repeat):
    env = {**os.environ, "BESSEL_HARMONICS_BACKEND": backend}
    code = f"import timeit; print(min(timeit.repeat({SWEEP!r}, number=1, repeat={repeat})))"
    out = subprocess.run([sys.executable, "-c", code], env=env, check=True, capture_output=True, text=True)
    return float(out.stdout.strip())


def main(argv=None):
    ap = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    ap.add_argument("--sizes", default="1000,100000")
    ap.add_argument("--repeat", type=int, default=5)
    args = ap.parse_args(argv)
    rng = np.random.default_rng(0)
    print(f"{'kernel':<14}{'n':>8}{'compiled ms':>14}{'python ms':>12}{'speedup':>9}{'max diff':>14}")
    for n in (int(s) for s in args.sizes.split(",")):
        for name, fn in _cases(n, rng).items():
            tc = min(timeit.repeat(lambda: fn(_core), number=1, repeat=args.repeat))
            tp = min(timeit.repeat(lambda: fn(_fallback), number=1, repeat=args.repeat))
            a, b = fn(_core), fn(_fallback)
            pairs = zip(a, b) if isinstance(a, tuple) else [(a, b)]
            diff = max(_max_diff(u, v) for u, v in pairs)
            print(f"{name:<14}{n:>8}{tc * 1e3:>14.3f}{tp * 1e3:>12.3f}{tp / tc:>9.1f}{diff:>14.2e}")
    tc, tp = _sweep("compiled", 3), _sweep("python", 3)
    print(f"\nestimate sweep (A6, 16 points/decade): compiled {tc:.2f} s, python {tp:.2f} s, speedup {tp / tc:.1f}")


if __name__ == "__main__":
    main()
