"""Resolvent growth on the circle and the torus for sharp damping.

On the circle the norm falls like 1/lambda; on the torus it grows like
lambda**(1/(2+beta)).  Prints the fitted log-log slopes next to the targets.

    python3 scripts/resolvent_scaling.py --betas -0.5 0
"""

import argparse

from singdamp.damping import sharp_damping
from singdamp.resolvent import geometric_lambdas, sweep_1d, sweep_torus


def main():
    parser = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    parser.add_argument("--betas", type=float, nargs="+", default=[-0.5, 0.0])
    parser.add_argument("--circle-n", type=int, default=4096)
    parser.add_argument("--torus-n", type=int, default=512)
    parser.add_argument("--workers", type=int, default=1)
    args = parser.parse_args()

    for beta in args.betas:
        spec = sharp_damping(beta)
        circle = sweep_1d(spec, geometric_lambdas(20.0, 200.0), args.circle_n, workers=args.workers).fit
        torus = sweep_torus(spec, geometric_lambdas(20.0, 120.0), args.torus_n, workers=args.workers).fit
        print(
            f"beta={beta:g}  circle slope {circle.slope:.3f} (target -1)  "
            f"torus slope {torus.slope:.3f} (target {1 / (2 + beta):.3f}, rms {torus.fit_residual:.3f})"
        )


if __name__ == "__main__":
    main()
