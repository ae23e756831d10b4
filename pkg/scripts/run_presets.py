#!/usr/bin/env python3
"""Run every canned experiment and write its outputs plus the pass/fail
summary of its built-in assertions."""

import argparse
import os
import sys

sys.path.insert(0, os.path.join(os.path.dirname(__file__), "..", "src"))

from rcchain.presets import PRESETS, run_preset


def main():
    ap = argparse.ArgumentParser(description=__doc__)
    ap.add_argument("--out", default="out/presets")
    ap.add_argument("--seed", type=int, default=None)
    args = ap.parse_args()

    failures = 0
    for name in sorted(PRESETS):
        result = run_preset(name, seed=args.seed)
        out_dir = os.path.join(args.out, name)
        result.write_outputs(out_dir)
        status = "ok" if result.all_passed else "FAILED"
        print(f"{name}: {status} ({len(result.assertions)} assertions) -> {out_dir}")
        for a in result.assertions:
            print(f"  [{'PASS' if a.passed else 'FAIL'}] {a.name}: {a.detail}")
        if not result.all_passed:
            failures += 1
    return 1 if failures else 0


if __name__ == "__main__":
    sys.exit(main())
