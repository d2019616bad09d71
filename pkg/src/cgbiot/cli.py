"""Command-line front end: ``convergence``, ``verify`` and ``run``."""

from __future__ import annotations

import argparse
import logging
import sys

from .config import ConfigError, load_config
from .diagnostics import emit_table
from .reference import compare_with_reference
from .slab_solver import SolverError

EXIT_OK, EXIT_CONFIG, EXIT_SOLVER, EXIT_CHECK = 0, 1, 2, 3


def _add_common(p: argparse.ArgumentParser):
    p.add_argument("--config", help="flat key = value configuration file")
    p.add_argument("--k", type=int)
    p.add_argument("--r", type=int)
    p.add_argument("--levels", type=int)
    p.add_argument("--tau0", type=float)
    p.add_argument("--n0", type=int)
    p.add_argument("--alpha", type=float)
    p.add_argument("--c0", type=float)
    p.add_argument("--rho", type=float)
    p.add_argument("--E", type=float)
    p.add_argument("--nu", type=float)
    p.add_argument("--M", type=int)
    p.add_argument("--solver", choices=["lu", "gmres"])
    p.add_argument("--initial-data", dest="initial_data", choices=["ritz", "nodal"])
    p.add_argument("--displacement-mode", dest="displacement_mode", choices=["diagonal", "first"])
    p.add_argument("--threads", type=int)
    p.add_argument("--out")
    p.add_argument("--format", choices=["csv", "md"])
    p.add_argument("-v", "--verbose", action="store_true")


CONFIG_KEYS = ("k", "r", "levels", "tau0", "n0", "alpha", "c0", "rho", "E", "nu", "M",
               "solver", "initial_data", "displacement_mode", "threads", "out", "format")


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="cgbiot", description=__doc__)
    sub = parser.add_subparsers(dest="command", required=True)
    conv = sub.add_parser("convergence", help="manufactured-solution convergence study")
    _add_common(conv)
    conv.add_argument("--check", action="store_true",
                      help="compare against the embedded reference tables")
    ver = sub.add_parser("verify", help="run the property suite")
    _add_common(ver)
    run = sub.add_parser("run", help="single simulation with trajectory dump")
    _add_common(run)
    run.add_argument("--level", type=int, default=0)
    return parser


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING,
                        format="%(levelname)s %(name)s: %(message)s")
    try:
        config = load_config(args.config, **{k: getattr(args, k) for k in CONFIG_KEYS})
    except (ConfigError, OSError) as exc:
        print(f"configuration error: {exc}", file=sys.stderr)
        return EXIT_CONFIG
    # imported late: heavy numerics are not needed for --help or config errors
    from . import runner

    try:
        if args.command == "convergence":
            report = runner.run_convergence(config)
            text = emit_table(report, config.format, path=config.out or None)
            print(text)
            if args.check:
                checks = compare_with_reference(report)
                if not checks:
                    print(f"no reference table for k={config.k}, r={config.r}", file=sys.stderr)
                    return EXIT_CHECK
                for c in checks:
                    print(c.line())
                if not all(c.passed for c in checks):
                    return EXIT_CHECK
            return EXIT_OK
        if args.command == "verify":
            checks = runner.verify_properties(config)
            for c in checks:
                print(c.line())
            return EXIT_OK if all(c.passed for c in checks) else EXIT_CHECK
        if args.command == "run":
            if args.level < 0:
                print("configuration error: level must be >= 0", file=sys.stderr)
                return EXIT_CONFIG
            result = runner.run_level(config, args.level)
            errs = runner.level_errors(config, result, args.level)
            for key, val in errs.errors.items():
                print(f"{key:16s} {val:.10e}")
            if config.out:
                fmt = "csv" if config.out.endswith(".csv") else "npz"
                result.trajectory.save(config.out, fmt)
            return EXIT_OK
    except SolverError as exc:
        print(f"solver error: {exc}", file=sys.stderr)
        return EXIT_SOLVER
    return EXIT_CONFIG


if __name__ == "__main__":
    sys.exit(main())
