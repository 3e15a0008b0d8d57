"""Print the lambda-exponent ledger and the feasible alpha for given (p, sigma)."""

import argparse

from torus_ci import exponents as ex


def main() -> None:
    ap = argparse.ArgumentParser(description=__doc__)
    ap.add_argument("--p", default="1/2")
    ap.add_argument("--sigma", default="1/2")
    ap.add_argument("--alpha", help="defaults to the feasible pick")
    ap.add_argument("--s")
    args = ap.parse_args()

    p, sigma = ex.Q(args.p), ex.Q(args.sigma)
    feas = ex.feasibility(p, sigma)
    alpha, s = feas.pick()
    alpha = ex.Q(args.alpha) if args.alpha else alpha
    s = ex.Q(args.s) if args.s else s
    width = max(map(len, feas.constraints))
    for name, bound in feas.constraints.items():
        print(f"{name:{width}s}  alpha > {ex.fmt(bound)}")
    print(f"alpha_min = {ex.fmt(feas.alpha_min)}; using alpha = {ex.fmt(alpha)}, s = {ex.fmt(s)}\n")
    led = ex.ledger(p, sigma, alpha, s=s)
    print(led.table())
    ok, bad = ex.assert_all_negative(led)
    print("\nall exponents negative" if ok else "\npositive exponents: " + ", ".join(bad))


if __name__ == "__main__":
    main()
