"""Sweep the semigroup ratio lhs / (t^2 G_{t-r}(x-z)) over the cone interior.

The largest observed ratio per dimension is what SEMIGROUP_CONSTANT in
stratowave.wave_kernel was pinned from (rounded up with a margin).
"""

import argparse
import itertools

import numpy as np

from stratowave.wave_kernel import g_eval, semigroup_check


def sweep(dim, ts=(0.5, 1.0, 2.0, 3.0), fracs=(0.0, 0.25, 0.5, 0.75), offsets=(0.0, 0.2, 0.5, 0.8, 0.95)):
    rows = []
    for t, fr, off in itertools.product(ts, fracs, offsets):
        r = fr * t
        w = off * (t - r)
        x = np.array([w] if dim == 1 else [w, 0.0])
        z = np.zeros(dim)
        lhs, _ = semigroup_check(r, t, x, z, dim)
        ratio = lhs / (t * t * g_eval(t - r, x - z, dim))
        rows.append((t, r, w, lhs, ratio))
    return rows


def main():
    ap = argparse.ArgumentParser(description=__doc__)
    ap.add_argument("--dim", type=int, choices=(1, 2), default=None)
    args = ap.parse_args()
    for dim in (args.dim,) if args.dim else (1, 2):
        rows = sweep(dim)
        worst = max(rows, key=lambda row: row[-1])
        print(f"d={dim}: max ratio {worst[-1]:.6f} at t={worst[0]}, r={worst[1]}, |x-z|={worst[2]:.3f}")


if __name__ == "__main__":
    main()
