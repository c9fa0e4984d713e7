"""Command line: ``forage-lab {evolve,qlearn,compare,validate}``.

Exit codes: 0 success, 1 configuration error, 2 I/O error.
"""
from __future__ import annotations

import argparse
import logging
import sys

from .harness import GA, PROFILES, QL, ConfigError, compare, resolve_config, run_experiment

EXIT_OK = 0
EXIT_CONFIG = 1
EXIT_IO = 2


def _add_run_flags(p):
    p.add_argument("config", nargs="?", help="key = value config file")
    p.add_argument("--seed", type=int, help="base seed; replicate r uses seed + r")
    p.add_argument("--replicates", type=int)
    p.add_argument("--out", help="output directory")
    p.add_argument("--profile", choices=sorted(PROFILES))
    p.add_argument("--jobs", type=int, default=1, help="worker processes for replicates")
    p.add_argument("--scheme", help="mean, minimum or maximum")
    p.add_argument("--mode", help="group/inclusive (evolve) or centralized/decentralized (qlearn)")


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="forage-lab", description=__doc__.splitlines()[0])
    parser.add_argument("-v", "--verbose", action="store_true")
    sub = parser.add_subparsers(dest="command", required=True)
    _add_run_flags(sub.add_parser("evolve", help="genetic-algorithm experiment"))
    _add_run_flags(sub.add_parser("qlearn", help="Q-learning experiment"))
    p = sub.add_parser("compare", help="pairwise KS tests and figures over finished runs")
    p.add_argument("runs", nargs="+")
    p.add_argument("--out", required=True)
    p.add_argument("--no-plots", action="store_true")
    p = sub.add_parser("validate", help="check a config file and print the resolved settings")
    p.add_argument("config")
    p.add_argument("--profile", choices=sorted(PROFILES))
    return parser


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING,
                        format="%(levelname)s %(name)s: %(message)s")
    try:
        if args.command in ("evolve", "qlearn"):
            if args.jobs < 1:
                raise ConfigError("--jobs must be at least 1")
            cfg = resolve_config(
                GA if args.command == "evolve" else QL, args.config, args.profile,
                {"seed": args.seed, "replicates": args.replicates, "out": args.out,
                 "scheme": args.scheme, "mode": args.mode})
            out = run_experiment(cfg, jobs=args.jobs)
            print(out)
        elif args.command == "compare":
            rows = compare(args.runs, args.out, plots=not args.no_plots)
            for row in rows:
                print(",".join(str(v) for v in row))
        else:
            cfg = resolve_config(None, args.config, args.profile)
            for key, value in cfg.items():
                print(f"{key} = {value}")
    except ConfigError as exc:
        print(f"config error: {exc}", file=sys.stderr)
        return EXIT_CONFIG
    except OSError as exc:
        print(f"I/O error: {exc}", file=sys.stderr)
        return EXIT_IO
    return EXIT_OK


if __name__ == "__main__":
    sys.exit(main())
