"""Shared driver for the convergence-study scripts."""

import argparse
import logging
import sys
import time

from cgbiot.config import RunConfig
from cgbiot.diagnostics import emit_table
from cgbiot.reference import compare_with_reference
from cgbiot.runner import run_convergence


def study(description: str, **defaults) -> int:
    parser = argparse.ArgumentParser(description=description)
    parser.add_argument("--levels", type=int, default=defaults.pop("levels"))
    parser.add_argument("--format", choices=["md", "csv"], default="md")
    parser.add_argument("--out", help="write the tables here")
    parser.add_argument("--raw", help="write full-precision CSV of every error here")
    args = parser.parse_args()
    logging.basicConfig(level=logging.INFO, format="%(message)s")
    config = RunConfig(levels=args.levels, format=args.format, **defaults)
    start = time.perf_counter()
    report = run_convergence(config)
    print(emit_table(report, args.format, path=args.out))
    if args.raw:
        with open(args.raw, "w") as fh:
            fh.write(report.to_csv())
    checks = compare_with_reference(report)
    for c in checks:
        print(c.line())
    print(f"total {time.perf_counter() - start:.1f}s")
    return 0 if all(c.passed for c in checks) else 3


if __name__ == "__main__":
    sys.exit("run one of the run_*.py scripts instead")
