"""Command-line entry point: ``usemoc run|resume|report|compare``."""

from __future__ import annotations

import argparse
import logging
import sys

from .errors import UsemocError
from .experiment import compare, load_config, report, resume_experiment, run_experiment


def _run(args):
    config = load_config(args.config, seed=args.seed, output_dir=args.out)
    out = run_experiment(config, args.out)
    print(report(out))


def _resume(args):
    out = resume_experiment(args.out)
    print(report(out))


def _report(args):
    print(report(args.out))


def _compare(args):
    result = compare(args.dirs, args.out)
    print(result["table"])


def build_parser():
    parser = argparse.ArgumentParser(prog="usemoc", description=__doc__)
    parser.add_argument("-v", "--verbose", action="store_true", help="log progress to stderr")
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("run", help="start (or continue) an experiment")
    p.add_argument("--config", required=True, help="flat TOML configuration file")
    p.add_argument("--seed", type=int, help="overrides the seed in the config")
    p.add_argument("--out", required=True, help="output directory")
    p.set_defaults(func=_run)

    p = sub.add_parser("resume", help="continue an interrupted experiment")
    p.add_argument("--out", required=True)
    p.set_defaults(func=_resume)

    p = sub.add_parser("report", help="summarize a run directory")
    p.add_argument("--out", required=True)
    p.set_defaults(func=_report)

    p = sub.add_parser("compare", help="gain-in-simulations table across runs")
    p.add_argument("dirs", nargs="+", help="run directories")
    p.add_argument("--out", help="directory for comparison.csv and merged_curves.csv")
    p.set_defaults(func=_compare)
    return parser


def main(argv=None):
    args = build_parser().parse_args(argv)
    logging.basicConfig(
        level=logging.INFO if args.verbose else logging.WARNING,
        format="%(levelname)s %(name)s: %(message)s",
    )
    try:
        args.func(args)
    except (UsemocError, OSError) as exc:
        print(f"usemoc: error: {exc}", file=sys.stderr)
        return 1
    return 0


if __name__ == "__main__":
    sys.exit(main())
