"""Euler characteristics of the model spaces and the local supertrace identity
on random curvature tensors (exact rationals and floats)."""
import argparse

import numpy as np

from stochtaylor.clifford import CurvatureTensor, gauss_bonnet_model, local_chern_identity_check


def main():
    p = argparse.ArgumentParser(description=__doc__)
    p.add_argument("--radius", type=float, default=1.0)
    p.add_argument("--tensors", type=int, default=20)
    p.add_argument("--seed", type=int, default=0)
    args = p.parse_args()

    for model in ("sphere_d2", "sphere_d4", "flat_torus_d2"):
        r = gauss_bonnet_model(model, args.radius)
        print(f"{model:14s} omega {r.omega:.10f}  volume {r.volume:.8f}  chi {r.chi:.12f}"
              f"  (quadrature volume: {r.chi_quadrature:.12f})")
    rng = np.random.default_rng(args.seed)
    for d in (2, 4):
        exact = sum(local_chern_identity_check(CurvatureTensor.random(d, rng)).residual == 0
                    for _ in range(args.tensors))
        worst = max(local_chern_identity_check(CurvatureTensor.random(d, rng, exact=False)).as_floats(d)[2]
                    for _ in range(args.tensors))
        print(f"d = {d}: exact matches {exact}/{args.tensors}, float max residual {worst:.2e}")


if __name__ == "__main__":
    main()
