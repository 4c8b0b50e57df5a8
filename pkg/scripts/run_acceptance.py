#!/usr/bin/env python3
"""Run the acceptance configs through the suite runner and print a rate table.

usage: python scripts/run_acceptance.py [--out DIR] [--jobs N]
"""
import argparse
import json
import os
import sys

from balancewaves.cli import main as cli_main


def main():
    ap = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    here = os.path.dirname(os.path.abspath(__file__))
    ap.add_argument("--config", default=os.path.join(here, "..", "configs", "acceptance"))
    ap.add_argument("--out", default="results/acceptance")
    ap.add_argument("--jobs", type=int, default=1)
    args = ap.parse_args()
    rc = cli_main(["suite", "--config", args.config, "--out", args.out, "--jobs", str(args.jobs)])
    # rate table across runs
    print(f"\n{'run':<32} {'rate id':<22} {'omega':>10} {'pred':>10} {'R2':>8}")
    for entry in sorted(os.listdir(args.out)):
        path = os.path.join(args.out, entry, "summary.json")
        if not os.path.exists(path):
            continue
        with open(path, encoding="utf-8") as fh:
            s = json.load(fh)
        for r in s.get("rates", []):
            pred = r.get("prediction")
            ps = f"{pred:10.4g}" if isinstance(pred, (int, float)) else f"{'-':>10}"
            print(f"{entry:<32} {r['id']:<22} {r['omega']:10.4g} {ps} {r['r2']:8.4f}")
    return rc


if __name__ == "__main__":
    sys.exit(main())
