#!/usr/bin/env python3
"""Compare the L2 slice of the second-order region with the single-user dispersion rate.

The first input takes one letter, so the region at the top of the boundary
should collapse to ``sqrt(V) * Phi^{-1}(eps)``.
"""
import argparse

import numpy as np

from macdisp import Channel, boundary, single_user_rate, theorem1_region


def main(argv=None):
    ap = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    ap.add_argument("--crossover", type=float, nargs=2, default=[0.11, 0.11], metavar=("P01", "P10"),
                    help="P(y=1 | x=0) and P(y=0 | x=1)")
    ap.add_argument("--eps", type=float, nargs="+", default=[0.01, 0.1, 0.3, 0.5, 0.7, 0.9])
    args = ap.parse_args(argv)

    a, b = args.crossover
    ch = Channel(np.array([[[1 - a, a], [b, 1 - b]]]))
    bd = boundary(ch)
    print(f"capacity {bd.sum_capacity:.6f} nats")
    print(f"{'eps':>6} {'region sup L2':>14} {'single user':>12} {'|diff|':>9}")
    for eps in args.eps:
        got = theorem1_region(ch, 0.0, bd.sum_capacity, eps, bd=bd).sup_l2(0.0)
        want = single_user_rate(ch, eps)
        print(f"{eps:6.3f} {got:14.8f} {want:12.8f} {abs(got - want):9.1e}")


if __name__ == "__main__":
    main()
