"""Timing of the compiled special-function kernels against the numpy fallback.

Run with ``python3 benchmarks/bench_kernels.py``.  Prints one line per kernel
and size, plus the maximum disagreement between the two backends.
"""
from __future__ import annotations

import argparse
import timeit

import numpy as np

from polaron_bound import kernels


def _time(fn, repeat: int) -> float:
    return min(timeit.repeat(fn, number=1, repeat=repeat))


def main(argv=None) -> int:
    ap = argparse.ArgumentParser(description=__doc__)
    ap.add_argument("--sizes", default="1000,10000,100000")
    ap.add_argument("--lmax", type=int, default=40)
    ap.add_argument("--repeat", type=int, default=5)
    args = ap.parse_args(argv)
    if kernels._compiled is None:
        print("compiled backend unavailable; only the python backend can be timed")
    rng = np.random.default_rng(0)
    print(f"{'kernel':<20}{'size':>9}{'python [s]':>14}{'compiled [s]':>14}{'speedup':>10}{'max diff':>12}")
    for n in (int(s) for s in args.sizes.split(",")):
        x = rng.uniform(0.0, 200.0, n)
        chi = 1.0 + rng.exponential(1.0, n) + 1e-6
        for name, fn, arg in (("spherical_jn_table", kernels.spherical_jn_table, x),
                              ("legendre_q_table", kernels.legendre_q_table, chi)):
            t_py = _time(lambda: fn(arg, args.lmax, backend="python"), args.repeat)
            if kernels._compiled is None:
                print(f"{name:<20}{n:>9}{t_py:>14.4g}{'-':>14}{'-':>10}{'-':>12}")
                continue
            t_c = _time(lambda: fn(arg, args.lmax, backend="compiled"), args.repeat)
            a = fn(arg, args.lmax, backend="python")
            b = fn(arg, args.lmax, backend="compiled")
            diff = float(np.max(np.abs(a - b) / np.maximum(np.abs(a), 1e-300)))
            print(f"{name:<20}{n:>9}{t_py:>14.4g}{t_c:>14.4g}{t_py / t_c:>10.2f}{diff:>12.2e}")
    return 0


if __name__ == "__main__":
    raise SystemExit(main())
