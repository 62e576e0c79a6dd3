"""Print the policy-coefficient and TVD tables for the builtin cases (analytic path only)."""
import argparse

from price_of_uncertainty import cli


def main():
    ap = argparse.ArgumentParser(description=__doc__)
    ap.add_argument("--delta", type=float, action="append", help="tightening factor (repeatable)")
    args = ap.parse_args()
    for name in ("c1", "c2"):
        s = cli.builtin_scenarios()[name]
        if args.delta:
            s = cli.Scenario(s.name, s.cases, s.demand, tuple(args.delta), s.n_samples, s.seed, s.outputs)
        print(cli.format_tables(cli.run_scenario(s, sample=False)))
        print()


if __name__ == "__main__":
    main()
