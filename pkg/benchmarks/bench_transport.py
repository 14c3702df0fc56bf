"""Benchmark the RK4 lift kernel: JIT-compiled versus pure numpy.

Times the raw kernel on a pre-sampled coefficient grid (the hot loop of
parallel transport) and the end-to-end lift including coefficient sampling.

Usage::

    python3 benchmarks/bench_transport.py [--steps 20000] [--fiber 4] [--repeat 5]

Set ``GEOCONN_NUMBA=0`` to check that the fallback selection works; this
script imports both paths explicitly regardless.
"""

import argparse
import time

import numpy as np

from geoconn import AdmissibleCurve, AnchorBundle, CoordDomain, LinearConnection, lift_curve
from geoconn._kernels import HAVE_NUMBA, rk4_linear_jit, rk4_linear_numpy


def time_fn(fn, repeat):
    best = np.inf
    for _ in range(repeat):
        start = time.perf_counter()
        fn()
        best = min(best, time.perf_counter() - start)
    return best


def main():
    parser = argparse.ArgumentParser(description=__doc__)
    parser.add_argument("--steps", type=int, default=20000)
    parser.add_argument("--fiber", type=int, default=4)
    parser.add_argument("--repeat", type=int, default=5)
    args = parser.parse_args()

    rng = np.random.default_rng(0)
    amats = rng.standard_normal((2 * args.steps + 1, args.fiber, args.fiber)) * 0.1
    y0 = rng.standard_normal(args.fiber)
    h = 1.0 / args.steps

    t_numpy = time_fn(lambda: rk4_linear_numpy(amats, h, y0), args.repeat)
    print(f"kernel steps={args.steps} fiber={args.fiber}")
    print(f"  numpy : {t_numpy * 1e3:9.2f} ms")
    if HAVE_NUMBA:
        rk4_linear_jit(amats, h, y0)  # compile outside the timing loop
        t_jit = time_fn(lambda: rk4_linear_jit(amats, h, y0), args.repeat)
        print(f"  numba : {t_jit * 1e3:9.2f} ms   ({t_numpy / t_jit:5.1f}x)")
        drift = np.max(np.abs(rk4_linear_jit(amats, h, y0) - rk4_linear_numpy(amats, h, y0)))
        print(f"  paths agree to {drift:.2e}")
    else:
        print("  numba : unavailable or disabled (GEOCONN_NUMBA=0)")

    # End to end: coefficient sampling plus basis lifts.
    dom = CoordDomain.cube(1, -0.5, 1.5)
    bundle = AnchorBundle.identity(dom)
    coeff = rng.standard_normal((1, args.fiber, args.fiber)) * 0.2
    conn = LinearConnection.from_array(bundle, coeff)
    curve = AdmissibleCurve.from_exprs(["t"], ["1"], (0.0, 1.0))
    t_total = time_fn(lambda: lift_curve(conn, curve, y0, steps=args.steps), max(1, args.repeat // 2))
    print(f"  end-to-end lift_curve: {t_total * 1e3:9.2f} ms")


if __name__ == "__main__":
    main()
