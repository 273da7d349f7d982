"""Command line front door: ``holelab <study> --config cfg.json --out dir``."""

from __future__ import annotations

import argparse
import sys

from .harness import STUDIES, ConfigError, load_config, run
from .harness.config import describe

EXIT_PASS, EXIT_CRITERIA, EXIT_CONFIG, EXIT_NUMERICAL = 0, 1, 2, 3


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="holelab", description="Perforated-domain homogenization lab.")
    sub = parser.add_subparsers(dest="command", required=True)
    check = sub.add_parser("check-config", help="validate a configuration and print its hole schedule")
    check.add_argument("--config", required=True)
    for name in (*STUDIES, "all"):
        p = sub.add_parser(name, help="run every study" if name == "all" else f"run the {name} study")
        p.add_argument("--config", required=True, help="experiment JSON file")
        p.add_argument("--out", required=True, help="output directory")
        p.add_argument("--seed", type=int, default=None, help="override the config seed")
        p.add_argument("--jobs", type=int, default=1, help="worker processes per study")
        p.add_argument("--plots", action="store_true", help="also write SVG convergence plots")
        p.add_argument("--quiet", action="store_true")
    return parser


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    try:
        cfg = load_config(args.config)
    except ConfigError as exc:
        print("configuration error:", file=sys.stderr)
        for msg in exc.problems:
            print(f"  - {msg}", file=sys.stderr)
        return EXIT_CONFIG
    if args.command == "check-config":
        print("\n".join(describe(cfg)))
        return EXIT_PASS
    if args.seed is not None:
        cfg.seed = args.seed
    studies = STUDIES if args.command == "all" else (args.command,)
    log = None if args.quiet else (lambda msg: print(msg, file=sys.stderr))
    summary = run(cfg, studies, args.out, jobs=max(1, args.jobs), plots=args.plots, log=log)
    for key, entry in summary["criteria"].items():
        if entry["status"] != "not_run":
            tag = "asserted" if entry["asserted"] else "info"
            print(f"{key}: {entry['status']} ({tag})")
    return summary["exit_code"]


if __name__ == "__main__":
    sys.exit(main())
