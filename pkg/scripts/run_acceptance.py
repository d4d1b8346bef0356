"""Run the acceptance criteria and print one line per criterion.

usage: python3 scripts/run_acceptance.py [--seed N] [--only 3 5] [--json out.json]
"""
import argparse
import json
import sys

from sectorcalc.acceptance import run_all


def main():
    p = argparse.ArgumentParser()
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--only", type=int, nargs="*")
    p.add_argument("--json")
    args = p.parse_args()
    crits = run_all(seed=args.seed, only=args.only)
    total = sum(c.runtime or 0.0 for c in crits)
    print(f"{sum(c.passed for c in crits)}/{len(crits)} passed in {total:.1f}s")
    if args.json:
        with open(args.json, "w") as fh:
            json.dump([c.to_dict() for c in crits], fh, indent=2, default=str)
    return 0 if all(c.passed for c in crits) else 1


if __name__ == "__main__":
    sys.exit(main())
