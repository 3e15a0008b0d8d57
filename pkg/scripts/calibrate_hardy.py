"""Measure the Hardy-suite constants on the calibration seed family.

The printed values (times the margin) are frozen in hardy.CALIBRATION.
"""

import argparse
import json

import numpy as np

from torus_ci import hardy as H


def nonvanishing_ratios(p: float, n: int, seed: int, count: int) -> list[float]:
    rng = np.random.default_rng(seed)
    out = []
    for _ in range(count):
        c = rng.uniform(-0.5, 0.5, 2)
        r = float(rng.uniform(0.02, 0.17))
        f = H.random_bump(n, c, r, int(rng.integers(0, 2**31 - 1)))
        measured = H.hp_power(f, p)
        out.append(measured / H.hp_upper_bound_nonvanishing(f, p, c, r, C=1.0))
    return out


def main() -> None:
    ap = argparse.ArgumentParser(description=__doc__)
    ap.add_argument("--n", type=int, default=256)
    ap.add_argument("--seed", type=int, default=1000)
    ap.add_argument("--count", type=int, default=30)
    ap.add_argument("--margin", type=float, default=2.0)
    args = ap.parse_args()

    out = {"atom_linf_constant": {}, "nonvanishing_constant": {}}
    for p in (0.8, 0.5):
        r = H.atom_linf_ratios(H.random_atom_family(args.count, args.seed, p), args.n)
        out["atom_linf_constant"][f"{p:.1f}"] = args.margin * max(r)
    for p in (0.8, 1.0):
        r = nonvanishing_ratios(p, args.n, args.seed, args.count)
        out["nonvanishing_constant"][f"{p:.1f}"] = args.margin * max(r)
    lr = H.leray_hp_check(H.random_atom_family(20, args.seed, 0.8), args.n)
    out["leray_max_absolute"] = lr["max_absolute"]
    out["leray_max_relative"] = lr["max_relative"]
    out["leray_cap"] = args.margin * lr["max_relative"]
    print(json.dumps(out, indent=2, sort_keys=True))


if __name__ == "__main__":
    main()
