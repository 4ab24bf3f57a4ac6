#!/usr/bin/env python3
"""Fit-time scaling curve (median of 3 fits per size)."""

import argparse
import sys

from cfglmm.cli import main as cli_main


def main() -> int:
    ap = argparse.ArgumentParser(description=__doc__)
    ap.add_argument("--sizes", default="500,2000,5000,10000")
    ap.add_argument("--beta0", type=float, default=0.5)
    ap.add_argument("--seed", type=int, default=2026)
    ap.add_argument("--out", default="results/timing")
    args = ap.parse_args()
    return cli_main(
        ["benchmark", "--suite", "timing", "--sizes", args.sizes,
         "--beta0", str(args.beta0), "--seed", str(args.seed), "--out", args.out]
    )


if __name__ == "__main__":
    sys.exit(main())
