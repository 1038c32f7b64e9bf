"""Calibrate the two constants pinned inside the acceptance suite.

Part 1: the subspace-embedding tolerance.  For a random 5-dimensional
orthonormal basis in R^1000 and degree-2 graph sketches at m=1000, this
measures the distortion distribution and reports its 90th percentile.
The acceptance check pins that value as eps and requires at least 85 of
100 fresh trials to satisfy the squared-spectrum embedding condition, and
it also checks that quadrupling m roughly halves the median distortion.

Part 2: the sampling constant for the moment-based embedding example.
Parameter presets with c_m = 1 give a failure rate near 0.2 for a single
vector at eps = 0.5, delta = 0.1, which is above delta.  The table below
shows how the rate falls as c_m grows; c_m = 3 is the smallest integer
whose rate sits comfortably below delta, and that is the value used in
the module tests.

Run from the repo root after installing the package:

    python3 scripts/calibrate_embedding_eps.py
"""

import argparse

import numpy as np

from sketchbench.linalg import thin_qr
from sketchbench.matrices import gen_gaussian
from sketchbench.metrics import distortion_via_basis, jlt_failure_rate
from sketchbench.rng import Prng
from sketchbench.sketch import expander_sketch_params, graph_sketch_new


def _distortions(u, n, m, s, master, trials, base):
    out = []
    for t in range(trials):
        op = graph_sketch_new(n, m, s, master.split(base + t))
        out.append(distortion_via_basis(u, op).eta)
    return np.array(out)


def main() -> None:
    ap = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    ap.add_argument("--n", type=int, default=1000)
    ap.add_argument("--k", type=int, default=5)
    ap.add_argument("--s", type=int, default=2)
    ap.add_argument("--m", type=int, default=1000)
    ap.add_argument("--trials", type=int, default=200)
    args = ap.parse_args()

    master = Prng(0xCA11B)
    u, _ = thin_qr(gen_gaussian(args.n, args.k, master.split(0)))

    etas = _distortions(u, args.n, args.m, args.s, master, args.trials, 1000)
    print(f"distortion at m={args.m}: median={np.median(etas):.4f} "
          f"p90={np.percentile(etas, 90):.4f} max={etas.max():.4f}")
    etas4 = _distortions(u, args.n, 4 * args.m, args.s, master, args.trials, 5000)
    print(f"distortion at m={4 * args.m}: median={np.median(etas4):.4f}")
    print(f"median ratio (4m vs m): {np.median(etas4) / np.median(etas):.4f}")
    print(f"pinned eps: {np.percentile(etas, 90):.3f}")

    print()
    x = Prng(0xBEEF).normal(256)
    x /= np.sqrt(np.sum(x * x))
    for c_m in (1.0, 2.0, 3.0, 4.0):
        s, m = expander_sketch_params(1, 0.5, 0.1, c_m=c_m)

        def factory(rng, s=s, m=m):
            return graph_sketch_new(x.size, m, s, rng)

        rate = jlt_failure_rate(factory, x, 0.5, 400, Prng(0xFACE))
        print(f"c_m={c_m:.0f}: s={s} m={m} failure_rate={rate:.4f}")


if __name__ == "__main__":
    main()
