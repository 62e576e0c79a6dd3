"""KKT permutation residuals on the builtin cases and random instances."""
import argparse

from price_of_uncertainty import cli


def main():
    ap = argparse.ArgumentParser(description=__doc__)
    ap.add_argument("--random", type=int, default=200, help="number of random instances")
    ap.add_argument("--seed", type=int, default=0)
    args = ap.parse_args()
    res = cli.equivalence_suite(args.random, args.seed)
    gated = max(max(r["solution_residual"], r["rhs_residual"], r["matrix_residual"]) for r in res.values())
    transposed = max(r["transposed_form_residual"] for r in res.values())
    print(f"{len(res)} instances")
    print(f"max residual, z_s = M z_h / b_s = M b_h / A_s = M A_h M': {gated:.3e}")
    print(f"max residual of the transposed form M' A_h M:          {transposed:.3e}")


if __name__ == "__main__":
    main()
