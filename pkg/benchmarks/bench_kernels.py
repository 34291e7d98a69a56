"""Time the compiled and NumPy backends of the phasor-sum kernel.

Usage::

    python3 benchmarks/bench_kernels.py [--count 100000] [--repeat 3]

Prints one line per (backend, measure, rows) case with the best wall time and
the largest deviation from the NumPy result.
"""
import argparse
import time

import numpy as np

from waveops.kernels import available_backends, get_backend
from waveops.measure import make_cantor, make_random, make_uniform


def _case(mu, rows, rng):
    coef = rng.standard_normal((rows, mu.size)) + 1j * rng.standard_normal((rows, mu.size))
    return coef, mu.thetas, mu.numerators, mu.denominator


def _best(fn, repeat):
    best, out = float("inf"), None
    for _ in range(repeat):
        t0 = time.perf_counter()
        out = fn()
        best = min(best, time.perf_counter() - t0)
    return best, out


def main(argv=None):
    p = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    p.add_argument("--count", type=int, default=100_000, help="frequencies per call")
    p.add_argument("--repeat", type=int, default=3)
    args = p.parse_args(argv)
    rng = np.random.default_rng(0)
    measures = [make_uniform(64), make_cantor(8), make_random(256, seed=1)]
    backends = available_backends()
    print(f"backends: {', '.join(backends)}; count={args.count}")
    print(f"{'measure':<24}{'rows':>5}" + "".join(f"{b + ' [s]':>16}" for b in backends)
          + f"{'speedup':>10}{'max dev':>12}")
    for mu in measures:
        for rows in (1, 4, 16):
            coef, th, nums, den = _case(mu, rows, rng)
            times, outs = {}, {}
            for b in backends:
                impl = get_backend(b)
                times[b], outs[b] = _best(
                    lambda: impl.phasor_sums(coef, th, nums, den, 0, args.count, -1), args.repeat)
            dev = max(float(np.abs(outs[b] - outs["python"]).max()) for b in backends)
            speed = times["python"] / times["compiled"] if "compiled" in times else 1.0
            print(f"{mu.label:<24}{rows:>5}" + "".join(f"{times[b]:>16.4f}" for b in backends)
                  + f"{speed:>10.2f}{dev:>12.2e}")


if __name__ == "__main__":
    main()
