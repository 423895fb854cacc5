"""Conditional characteristic function of the Levy area phase.

Closed form against Monte Carlo with endpoint conditioning on a ball of
shrinking radius; the ball shift is printed next to the observed gap.
"""
import argparse
import math

import numpy as np

from stochtaylor.heat import levy_area_cf, levy_area_cf_mc

J = np.array([[0.0, -1.0], [1.0, 0.0]])


def main():
    p = argparse.ArgumentParser(description=__doc__)
    p.add_argument("--a", type=float, default=1.0)
    p.add_argument("--t", type=float, default=1.0)
    p.add_argument("--radii", default="0.6,0.3,0.15")
    p.add_argument("--samples", type=int, default=400_000)
    p.add_argument("--level", type=int, default=8)
    p.add_argument("--seed", type=int, default=0)
    args = p.parse_args()

    A, t = args.a * J, args.t
    exact = levy_area_cf(A, t, [0.0, 0.0]).real
    s = args.a * t
    c = s / math.tanh(s) - 1
    print(f"closed form {exact:.6f} (ta/sinh ta = {s / math.sinh(s):.6f})")
    print(f"{'radius':>8} {'mc':>10} {'se':>9} {'gap':>10} {'ball shift':>11} {'paths':>8}")
    for r in map(float, args.radii.split(",")):
        res = levy_area_cf_mc(A, t, [0.0, 0.0], r, args.samples, args.level, args.seed)
        u = r * r / (2 * t)
        ball = exact * (-math.expm1(-(1 + c) * u)) / ((1 + c) * -math.expm1(-u))
        print(f"{r:8.3f} {res.real:10.5f} {res.stderr:9.5f} {res.real - exact:10.5f} "
              f"{ball - exact:11.5f} {res.accepted:8d}")


if __name__ == "__main__":
    main()
