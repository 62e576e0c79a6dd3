"""Write density CSVs for both builtin scenarios, ready for plotting."""
import argparse
from dataclasses import replace
from pathlib import Path

from price_of_uncertainty import cli


def main():
    ap = argparse.ArgumentParser(description=__doc__)
    ap.add_argument("--out", default="out", help="root output directory")
    ap.add_argument("--samples", type=int, default=cli.DEFAULT_SAMPLES)
    ap.add_argument("--seed", type=int, default=cli.DEFAULT_SEED)
    args = ap.parse_args()
    for name, s in cli.builtin_scenarios().items():
        s = replace(s, n_samples=args.samples, seed=args.seed, outputs=str(Path(args.out) / name))
        files = cli.emit_figure_data(cli.run_scenario(s))
        print(f"{name}: {len(files)} files in {s.outputs}")


if __name__ == "__main__":
    main()
