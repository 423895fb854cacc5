"""Small-time diagonal of the tangent-variable density.

Quadrature curve (2 pi t)^{d/2} q_t(0) with its fitted slope against
-(1/16) sum omega^2, and optionally the Monte Carlo (KDE) values at a few t.
"""
import argparse
import math

import numpy as np

from stochtaylor.heat import (StructureConstants, a1_expansion_check, kde_density_at,
                              sample_tangent_variables)


def main():
    p = argparse.ArgumentParser(description=__doc__)
    p.add_argument("--omega", default="su2-epsilon", help="'su2-epsilon', 'zero' or a file")
    p.add_argument("--scale", type=float, default=1.0, help="multiply omega by this factor")
    p.add_argument("--tmin", type=float, default=1e-3)
    p.add_argument("--tmax", type=float, default=1e-2)
    p.add_argument("--points", type=int, default=8)
    p.add_argument("--mc-samples", type=int, default=0)
    p.add_argument("--level", type=int, default=4)
    p.add_argument("--bandwidth-factor", type=float, default=1.0)
    p.add_argument("--seed", type=int, default=0)
    args = p.parse_args()

    try:
        omega = StructureConstants.preset(args.omega)
    except ValueError:
        omega = StructureConstants.from_text(open(args.omega).read())
    omega = omega.scaled(args.scale) if args.scale != 1 else omega
    res = a1_expansion_check(omega, np.linspace(args.tmin, args.tmax, args.points))
    print(f"{'t':>10} {'normalized':>14} {'fit':>14}" + (f" {'mc':>10} {'se':>9}" if args.mc_samples else ""))
    for t, v in zip(res.t_grid, res.normalized):
        line = f"{t:10.4g} {v:14.10f} {res.intercept + res.slope * t:14.10f}"
        if args.mc_samples:
            theta = sample_tangent_variables(omega, t, args.mc_samples, args.level, args.seed)
            kde = kde_density_at(theta, np.zeros(omega.d), factor=args.bandwidth_factor)
            scale = (2 * math.pi * t) ** (omega.d / 2)
            line += f" {kde.value * scale:10.5f} {kde.stderr * scale:9.5f}"
        print(line)
    print(f"slope {res.slope:.6f}  expected {res.expected_slope:.6f}  rel dev {res.rel_deviation:.4%}")


if __name__ == "__main__":
    main()
