"""Full pipeline (generate, build, compare, verify) for one configuration."""
import argparse
import sys

from dualnorm.cli import EXIT_OK, main as cli


def main():
    ap = argparse.ArgumentParser(description=__doc__)
    ap.add_argument("--config", help="INI configuration; defaults are used when omitted")
    ap.add_argument("--out", help="output directory override")
    ap.add_argument("--jobs", type=int, default=1)
    args = ap.parse_args()
    common = ["--jobs", str(args.jobs)]
    if args.config:
        common += ["--config", args.config]
    if args.out:
        common += ["--out", args.out]
    for cmd in ("generate", "build", "compare", "verify"):
        code = cli([cmd, *common])
        if code != EXIT_OK:
            return code
    return EXIT_OK


if __name__ == "__main__":
    sys.exit(main())
