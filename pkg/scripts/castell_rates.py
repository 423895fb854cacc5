"""Strong and weak error of the Castell scheme against the Heun reference.

Prints one table per truncation depth and the fitted log-log slopes.
"""
import argparse

from stochtaylor.flows import (parse_system, quartic_observable, rotation_benchmark,
                               strong_error_experiment, weak_error_experiment)


def main():
    p = argparse.ArgumentParser(description=__doc__)
    p.add_argument("--system", help="system file (default: rotation benchmark)")
    p.add_argument("--depths", default="1,2,3")
    p.add_argument("--kmin", type=int, default=4, help="largest t is 2^-kmin")
    p.add_argument("--kmax", type=int, default=9, help="smallest t is 2^-kmax")
    p.add_argument("--samples", type=int, default=2000)
    p.add_argument("--level", type=int, default=6)
    p.add_argument("--substeps", type=int, default=4)
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--workers", type=int, default=1)
    args = p.parse_args()

    system = parse_system(open(args.system).read()) if args.system else rotation_benchmark()
    grid = [2.0 ** -k for k in range(args.kmin, args.kmax + 1)]
    f = quartic_observable(system.n)
    common = dict(samples=args.samples, level=args.level, seed=args.seed,
                  substeps=args.substeps, workers=args.workers)
    for depth in map(int, args.depths.split(",")):
        strong = strong_error_experiment(system, depth, grid, **common)
        weak = weak_error_experiment(system, f, depth, grid, **common)
        print(f"N = {depth}")
        print(f"{'t':>12} {'strong':>12} {'se':>10} {'weak':>12} {'se':>10}")
        for s, w in zip(strong.rows, weak.rows):
            print(f"{s['t']:12.6g} {s['error']:12.4e} {s['stderr']:10.2e} {w['error']:12.4e} {w['stderr']:10.2e}")
        lo, hi = strong.slope_ci
        print(f"strong slope {strong.slope:.4f} [{lo:.3f}, {hi:.3f}]  theory {(depth + 1) / 2}")
        print(f"weak slope   {weak.slope:.4f}\n")


if __name__ == "__main__":
    main()
