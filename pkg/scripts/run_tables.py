#!/usr/bin/env python3
"""Desk-scale reproduction of the benchmark tables.

Runs the (500, 5000, 100) cells for both problem variants with the default
tolerance/metric settings and writes one CSV per variant.  The box cells
sweep the regularization weight; the ball cells sweep the noise factor.

    python3 scripts/run_tables.py --out results/ [--reps 10] [--seed 0]

Larger sweeps from the original experiments, e.g. (100i, 1000i, 20i) for
i in 5..25, can be requested with --sizes.
"""

import argparse
import sys
from pathlib import Path

from ratioprox.cli import main as cli_main


def main():
    ap = argparse.ArgumentParser(description=__doc__)
    ap.add_argument("--out", default="results")
    ap.add_argument("--reps", type=int, default=10)
    ap.add_argument("--seed", type=int, default=0)
    ap.add_argument(
        "--sizes", nargs="+", default=["500,5000,100"], metavar="M,N,S"
    )
    args = ap.parse_args()
    out = Path(args.out)
    out.mkdir(parents=True, exist_ok=True)

    rc = cli_main(
        [
            "bench", "--variant", "box_lasso",
            "--sizes", *args.sizes,
            "--lambdas", "0.01,0.1",
            "--reps", str(args.reps), "--seed", str(args.seed),
            "--schedule", "paper",
            "--out", str(out / "table_box.csv"),
        ]
    )
    if rc != 0:
        return rc
    return cli_main(
        [
            "bench", "--variant", "ball_constrained",
            "--sizes", *args.sizes,
            "--nf", "1.2,2",
            "--reps", str(args.reps), "--seed", str(args.seed),
            "--schedule", "paper",
            "--out", str(out / "table_ball.csv"),
        ]
    )


if __name__ == "__main__":
    sys.exit(main())
