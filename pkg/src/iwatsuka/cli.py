"""Command line entry point: ``iwsk <experiment> [--config PATH] [--out DIR] ...``."""
from __future__ import annotations

import argparse
import json
import logging
import sys

from .coupling import EvalError
from .harness import COMMANDS, ConfigError, load_config, resolve_config
from .solvers import NumericalAbort

EXIT_OK, EXIT_CONFIG, EXIT_NUMERICAL = 0, 2, 3


def build_parser():
    parser = argparse.ArgumentParser(
        prog="iwsk", description="Strong-field magnetic NLS simulations and averaging checks")
    parser.add_argument("command", choices=sorted(COMMANDS))
    parser.add_argument("--config", help="flat JSON config file")
    parser.add_argument("--out", help="output directory (overrides config 'output')")
    parser.add_argument("--seed", type=int, help="random seed (overrides config 'seed')")
    parser.add_argument("--snapshots", action="store_true", help="write binary IWSK snapshots")
    parser.add_argument("-v", "--verbose", action="store_true")
    return parser


def main(argv=None):
    args = build_parser().parse_args(argv)
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING,
                        format="%(levelname)s %(name)s: %(message)s")
    overrides = {"output": args.out, "seed": args.seed, "experiment": args.command,
                 "snapshots": True if args.snapshots else None}
    try:
        cfg = load_config(args.config, **overrides) if args.config else resolve_config(**overrides)
        summary = COMMANDS[args.command](cfg)
    except ConfigError as exc:
        print(f"config error: {exc}", file=sys.stderr)
        return EXIT_CONFIG
    except (NumericalAbort, EvalError, FloatingPointError) as exc:
        print(f"numerical abort: {exc}", file=sys.stderr)
        return EXIT_NUMERICAL
    except ValueError as exc:
        print(f"invalid input: {exc}", file=sys.stderr)
        return EXIT_CONFIG
    brief = {k: v for k, v in summary.items() if k not in ("config", "runs", "deviations")}
    print(json.dumps(brief, indent=2, sort_keys=True, default=float))
    return EXIT_OK


if __name__ == "__main__":
    sys.exit(main())
