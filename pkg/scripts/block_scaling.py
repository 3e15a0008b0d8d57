"""Fitted log-log slopes of the six block norms against lambda, mu1 and mu2.

Reruns each sweep at n and 2n so the grid dependence of the fit is visible.
"""

import argparse

from torus_ci import blocks as B
from torus_ci.io import write_csv

SWEEPS = [
    ("lam", [1, 2, 4, 8], B.BlockParams(1, 2, 4, 16)),
    ("mu1", [1, 2, 4, 8], B.BlockParams(2, 1, 8, 16)),
    ("mu2", [4, 8, 16, 32], B.BlockParams(1, 2, 4, 16)),
]


def main() -> None:
    ap = argparse.ArgumentParser(description=__doc__)
    ap.add_argument("--n", type=int, default=512)
    ap.add_argument("--t", type=float, default=0.1)
    ap.add_argument("--out", default="block_scaling.csv")
    args = ap.parse_args()

    prof = B.make_phi(B.ProfileSpec())
    rows = []
    for s in (1.0, 2.0):
        for name, vals, base in SWEEPS:
            for n in (args.n, 2 * args.n):
                for r in B.measure_scaling(prof, base, name, vals, n, 0, s, t=args.t)["rows"]:
                    rows.append([name, s, n, r["quantity"], r["theoretical"], r["fitted"], r["error"]])
            worst = max(row[-1] for row in rows if row[0] == name and row[1] == s and row[2] == args.n)
            print(f"s={s:g} {name:4s} max error at n={args.n}: {worst:.3g}", flush=True)
    write_csv(args.out, ["parameter", "s", "n", "quantity", "theory", "fitted", "error"], rows)


if __name__ == "__main__":
    main()
