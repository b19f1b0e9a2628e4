#!/usr/bin/env python3
"""Throughput of the joint scheme versus the false-alarm bound beta.

Sweeps beta at a fixed interference limit; tighter false-alarm bounds
force higher sensing thresholds and shrink the achievable throughput.
"""

import argparse
import logging

from crsim.schemes import SchemeId
from crsim.simharness import Scenario, sweep


def main():
    parser = argparse.ArgumentParser(description=__doc__)
    parser.add_argument("--trials", type=int, default=200)
    parser.add_argument("--seed", type=int, default=0)
    parser.add_argument(
        "--grid", type=float, nargs="+",
        default=[0.05, 0.1, 0.15, 0.2, 0.25, 0.3061],
    )
    parser.add_argument("--interference-limit", type=float, default=1e-3)
    parser.add_argument("--workers", type=int, default=1)
    parser.add_argument("--out", default="beta_trend.csv")
    args = parser.parse_args()
    logging.basicConfig(level=logging.INFO, format="%(message)s")

    scenario = Scenario(
        n=8, l_total=24, pu_block_sizes=(10, 6, 8),
        interference_limit=args.interference_limit,
        seed=args.seed, trials=args.trials,
    )
    agg = sweep(
        scenario, "beta", args.grid,
        schemes=(SchemeId.PROPOSED,), workers=args.workers,
    )
    agg.to_csv(
        args.out,
        header_lines=(
            f"beta trend | seed={args.seed} trials={args.trials} "
            f"th={args.interference_limit:g}",
        ),
    )
    logging.info("wrote %s", args.out)


if __name__ == "__main__":
    main()
