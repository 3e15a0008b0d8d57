"""One desk step from the starting scenario for several lambda.

Writes a CSV with ||R1||_L1, the per-term L1 norms, the L2 check and the
NSR cross-check for each lambda.  Desk exponents: kappa ~ lambda^4,
omega ~ lambda^3, nu ~ lambda, mu1 and mu2 fixed.
"""

import argparse
import time

from torus_ci import step as S
from torus_ci.io import write_csv


def main() -> None:
    ap = argparse.ArgumentParser(description=__doc__)
    ap.add_argument("--lams", default="4,8,16")
    ap.add_argument("--n", type=int, default=512)
    ap.add_argument("--out", default="lambda_sweep.csv")
    args = ap.parse_args()

    sc = S.initial_scenario()
    ring = S.ring_l1(sc, args.n)
    header = ["lam", "R1_l1", "u_diff_l2", "l2_bound", "cross_check", "seconds"] + list(S.TERM_NAMES)
    rows = []
    for lam in (int(x) for x in args.lams.split(",")):
        t0 = time.perf_counter()
        _, rep = S.step(sc, S.StepParams.desk(lam), S.StepConfig(n=args.n), R0_ring_l1=ring)
        dt = time.perf_counter() - t0
        rows.append([lam, rep.R1_l1, rep.u_diff_l2, rep.l2_bound, rep.cross_check_max, round(dt, 1)] + [rep.terms_l1[k] for k in S.TERM_NAMES])
        print(f"lambda {lam:3d}  ||R1|| {rep.R1_l1:.4g}  cross-check {rep.cross_check_max:.2g}  {dt:.0f} s", flush=True)
    write_csv(args.out, header, rows)


if __name__ == "__main__":
    main()
