#!/usr/bin/env python3
"""Monte Carlo prediction accuracy: coarse-to-fine model vs plain GLM.

Writes per-trial and quantile-summary CSVs via the benchmark CLI. Full-size
runs: --sizes 500,1000,2000,3000,6000,12000,20000 --trials 200 (slow).
"""

import argparse
import sys

from cfglmm.cli import main as cli_main


def main() -> int:
    ap = argparse.ArgumentParser(description=__doc__)
    ap.add_argument("--suite", default="prediction", choices=("prediction", "binomial"))
    ap.add_argument("--trials", type=int, default=20)
    ap.add_argument("--sizes", default="500,1000,2000")
    ap.add_argument("--beta0", type=float, default=0.5)
    ap.add_argument("--seed", type=int, default=2026)
    ap.add_argument("--out", default="results/prediction")
    args = ap.parse_args()
    return cli_main(
        ["benchmark", "--suite", args.suite, "--trials", str(args.trials),
         "--sizes", args.sizes, "--beta0", str(args.beta0),
         "--seed", str(args.seed), "--out", args.out]
    )


if __name__ == "__main__":
    sys.exit(main())
