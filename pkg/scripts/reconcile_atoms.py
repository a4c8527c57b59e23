"""Reconcile the three estimates of E[v(t, x)] and E[v(t, x)^2] for the two-atom noise.

Prints one line per method and the pairwise z-scores.  The same comparison
is what ``stratowave compare`` writes as CSV; this script is the quick look.
"""

import argparse
import time

from stratowave.chaos_engine import stratonovich_mean_series
from stratowave.feynman_kac import fk_mean, fk_second_moment
from stratowave.noise_model import ATOM_FIXTURE
from stratowave.picard_solver import GridSpec, moment_estimate


def main():
    ap = argparse.ArgumentParser(description=__doc__)
    ap.add_argument("--t", type=float, default=1.0)
    ap.add_argument("--seed", type=int, default=1)
    ap.add_argument("--n-paths", type=int, default=400_000)
    ap.add_argument("--n-realizations", type=int, default=20_000)
    ap.add_argument("--n-t", type=int, default=50)
    ap.add_argument("--threads", type=int, default=1)
    args = ap.parse_args()

    start = time.perf_counter()
    spec = GridSpec.matched(args.t, 0.0, args.n_t)
    fk1 = fk_mean(ATOM_FIXTURE, 0.0, args.t, 0.0, args.n_paths, seed=args.seed, stratified=True, threads=args.threads)
    fk2 = fk_second_moment(ATOM_FIXTURE, 0.0, args.t, 0.0, args.n_paths, seed=args.seed, threads=args.threads)
    series = stratonovich_mean_series(args.t, ATOM_FIXTURE, 0.0, 8)
    p1, p2 = moment_estimate(ATOM_FIXTURE, 0.0, spec, 12, args.n_realizations, seed=args.seed, threads=args.threads)

    print(f"{'method':<10} {'E v':>12} {'stderr':>9} {'E v^2':>10} {'stderr':>9}")
    print(f"{'fk':<10} {fk1.mean:12.6f} {fk1.stderr:9.1e} {fk2.mean:10.5f} {fk2.stderr:9.1e}")
    print(f"{'series':<10} {series.value:12.6f} {series.stderr:9.1e}")
    print(f"{'picard':<10} {p1.mean:12.6f} {p1.stderr:9.1e} {p2.mean:10.5f} {p2.stderr:9.1e}")
    print(f"z(fk, series) = {fk1.z_score(series.value, series.stderr):.2f}")
    print(f"z(fk, picard) = {fk1.z_score(p1):.2f}")
    print(f"z(picard, series) = {p1.z_score(series.value, series.stderr):.2f}")
    print(f"z(fk2, picard2) = {fk2.z_score(p2):.2f}")
    print(f"elapsed {time.perf_counter() - start:.1f}s")


if __name__ == "__main__":
    main()
