#!/usr/bin/env python3
"""Generate a solve trace and its predicted-vs-fitted decay report.

    python3 scripts/rate_report.py --out results/ [--seed 1] [--theta-f 0.5]
"""

import argparse
import sys
from pathlib import Path

from ratioprox.cli import main as cli_main


def main():
    ap = argparse.ArgumentParser(description=__doc__)
    ap.add_argument("--out", default="results")
    ap.add_argument("--seed", type=int, default=1)
    ap.add_argument("--theta-f", type=float, default=0.5)
    ap.add_argument("--schedule", default="exp:1,0.9")
    args = ap.parse_args()
    out = Path(args.out)
    out.mkdir(parents=True, exist_ok=True)
    inst_dir = out / "rate_instance"

    rc = cli_main(
        [
            "gen", "--m", "50", "--n", "200", "--s", "10",
            "--seed", str(args.seed), "--out", str(inst_dir),
        ]
    )
    if rc != 0:
        return rc
    trace = out / "rate_trace.csv"
    rc = cli_main(
        [
            "solve", "--instance", str(inst_dir),
            "--schedule", args.schedule,
            "--trace-out", str(trace),
            "--seed", str(args.seed),
        ]
    )
    if rc != 0:
        return rc
    return cli_main(
        [
            "rates", "--trace", str(trace),
            "--schedule", args.schedule,
            "--theta-f", str(args.theta_f),
            "--out", str(out / "rate_report.json"),
        ]
    )


if __name__ == "__main__":
    sys.exit(main())
