#!/usr/bin/env python3
"""Cross-validate the pipeline simulator against the closed forms at a
few operating points and print the deviation tables."""

import argparse
import os
import sys

sys.path.insert(0, os.path.join(os.path.dirname(__file__), "..", "src"))

from rcchain.pipeline_des import BLOCK_FEED, STAGE_FEED, deviation_table, simulate_pipeline
from rcchain.queueing import QueueNetworkConfig

POINTS = [
    (100.0, 10, STAGE_FEED),   # oracle feed: per-station laws
    (37.29, 10, BLOCK_FEED),   # physical feed near the measured operating point
    (40.0, 10, BLOCK_FEED),
    (40.0, 50, BLOCK_FEED),
]


def main():
    ap = argparse.ArgumentParser(description=__doc__)
    ap.add_argument("--n-tx", type=int, default=200_000)
    ap.add_argument("--seed", type=int, default=0)
    args = ap.parse_args()

    for lam, m, feed in POINTS:
        cfg = QueueNetworkConfig(lambda0=lam, batch_size=m)
        stats = simulate_pipeline(cfg, args.n_tx, args.seed, commit_feed=feed)
        print(f"\nlambda0={lam} M={m} feed={feed}  "
              f"confirmation={stats.confirmation_mean:.4f}s  "
              f"throughput={stats.throughput_valid:.2f} tx/s")
        print(f"  {'metric':8} {'closed':>12} {'simulated':>12} {'rel dev':>9}")
        for row in deviation_table(cfg, stats):
            print(f"  {row['metric']:8} {row['closed_form']:12.5f} "
                  f"{row['simulated']:12.5f} {row['rel_deviation']:9.3%}")


if __name__ == "__main__":
    main()
