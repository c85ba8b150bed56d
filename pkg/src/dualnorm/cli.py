"""Command-line entry point: ``python3 -m dualnorm <command> [options]``.

Exit codes: 0 success, 1 invariant failure, 2 usage or input error.
"""
from __future__ import annotations

import argparse
import logging
import sys

from .config import ConfigError, ExperimentConfig, load_config
from .pipeline import Experiment, MissingArtifact

EXIT_OK, EXIT_INVARIANT, EXIT_USAGE = 0, 1, 2


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="dualnorm", description="Dual-norm estimation experiments")
    common = argparse.ArgumentParser(add_help=False)
    common.add_argument("--config", metavar="PATH", help="INI experiment configuration")
    common.add_argument("--seed", type=int, help="override the sampling seed")
    common.add_argument("--jobs", type=int, default=1, help="worker threads for parameter sweeps")
    common.add_argument("--out", metavar="DIR", help="override the output directory")
    common.add_argument("-v", "--verbose", action="store_true")
    sub = parser.add_subparsers(dest="command", required=True)
    helps = {
        "generate": "solve the training problems and store Riesz snapshots",
        "build": "build test space, ATI model and quadrature rules",
        "estimate": "per-parameter estimates on the test set (estimates.csv)",
        "compare": "aggregate errors and online costs per method (compare.csv)",
        "verify": "check identities and bounds; exit 1 on any failure",
    }
    for name, text in helps.items():
        sub.add_parser(name, parents=[common], help=text)
    return parser


def resolve_config(args) -> ExperimentConfig:
    cfg = load_config(args.config) if args.config else ExperimentConfig()
    return cfg.with_overrides(seed=args.seed, output_dir=args.out)


def main(argv=None) -> int:
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
    except SystemExit as exc:
        return EXIT_OK if exc.code == 0 else EXIT_USAGE
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING,
                        format="%(levelname)s %(name)s: %(message)s")
    if args.jobs < 1:
        print("error: --jobs must be >= 1", file=sys.stderr)
        return EXIT_USAGE
    try:
        cfg = resolve_config(args)
        exp = Experiment(cfg, jobs=args.jobs)
        if args.command == "generate":
            info = exp.generate()
            print(f"stored {info['stored']} Riesz snapshots ({info['new_riesz']} new, "
                  f"{info['new_solves']} PDE solves), digest {info['digest']}")
        elif args.command == "build":
            exp.riesz_snapshots()
            for kind, size, delta, q, res, secs in exp.build():
                print(f"built {kind} size={size} delta={delta} Q_eq={q} residual={res} in {secs:.2f}s")
        elif args.command == "estimate":
            exp.estimate()
            print(f"wrote {exp.out / 'estimates.csv'}")
        elif args.command == "compare":
            sys.stdout.write(exp.compare())
        elif args.command == "verify":
            checks = exp.verify()
            for c in checks:
                print(f"{'PASS' if c.passed else 'FAIL'}  {c.name}  {c.detail}".rstrip())
            if not all(c.passed for c in checks):
                return EXIT_INVARIANT
    except (ConfigError, MissingArtifact) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_USAGE
    except OSError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_USAGE
    return EXIT_OK


if __name__ == "__main__":
    sys.exit(main())
