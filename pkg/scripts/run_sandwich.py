#!/usr/bin/env python3
"""Simulated error and sampled converse at Gaussian-approximation rates, across blocklengths.

Example::

    python3 scripts/run_sandwich.py --channel data/f2.json --n 100 200 400 --trials 100000
"""
import argparse
import math
from pathlib import Path

from macdisp import JointInput, load_channel
from macdisp.fbl_sim import (CodebookSpec, build_codebook, gaussian_approx_rates, message_counts,
                             simulate_error, verdu_han_bound)


def main(argv=None):
    ap = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    ap.add_argument("--channel", type=Path, required=True)
    ap.add_argument("--n", type=int, nargs="+", default=[100, 200, 400])
    ap.add_argument("--eps", type=float, default=0.1)
    ap.add_argument("--trials", type=int, default=100_000)
    ap.add_argument("--samples", type=int, default=100_000)
    ap.add_argument("--seed", type=int, default=0)
    args = ap.parse_args(argv)

    ch = load_channel(args.channel.read_text())
    p = JointInput.uniform(ch.x1_size, ch.x2_size)
    print(f"{'n':>5} {'R1':>8} {'R2':>8} {'log M1':>7} {'log M2':>7} {'eps_hat':>8} "
          f"{'95% CI':>17} {'converse':>9} {'se':>7}")
    for n in args.n:
        g = gaussian_approx_rates(ch, p, n, args.eps)
        m1, m2 = message_counts(n, *g.achievable)
        rep = simulate_error(build_codebook(CodebookSpec(n, m1, m2, p, seed=args.seed + n), ch), ch, args.trials)
        vh = verdu_han_bound(JointInput(p.p, n=n), ch, n, *g.achievable, samples=args.samples,
                             seed=args.seed + n)
        print(f"{n:>5} {g.achievable[0]:8.4f} {g.achievable[1]:8.4f} {math.log(m1):7.2f} {math.log(m2):7.2f} "
              f"{rep.eps_hat:8.4f} [{rep.ci_low:.4f}, {rep.ci_high:.4f}] {vh.value:9.4f} {vh.stderr:7.4f}")


if __name__ == "__main__":
    main()
