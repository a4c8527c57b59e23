"""Track E[v(t, 0)] for Riesz noise as the mollifier width shrinks dyadically.

For alpha < 1 in d = 1 the limit exists; the successive differences should
shrink until they fall under the Monte Carlo error.
"""

import argparse

from stratowave.feynman_kac import fk_mean
from stratowave.noise_model import Riesz, mollified_variance


def main():
    ap = argparse.ArgumentParser(description=__doc__)
    ap.add_argument("--alpha", type=float, default=0.5)
    ap.add_argument("--t", type=float, default=1.0)
    ap.add_argument("--n-paths", type=int, default=200_000)
    ap.add_argument("--max-jumps", type=int, default=12)
    ap.add_argument("--seed", type=int, default=1)
    ap.add_argument("--ks", type=int, nargs="+", default=[4, 8, 12, 16, 20, 24])
    args = ap.parse_args()

    m = Riesz(args.alpha, 1)
    prev = None
    print(f"{'eps':>12} {'var W_eps':>12} {'E v':>10} {'stderr':>9} {'diff':>10}")
    for k in args.ks:
        eps = 2.0**-k
        res = fk_mean(m, eps, args.t, 0.0, args.n_paths, args.max_jumps, seed=args.seed, stratified=True)
        diff = "" if prev is None else f"{res.mean - prev:10.2e}"
        print(f"{eps:12.3e} {mollified_variance(m, eps):12.4e} {res.mean:10.5f} {res.stderr:9.1e} {diff}")
        prev = res.mean


if __name__ == "__main__":
    main()
