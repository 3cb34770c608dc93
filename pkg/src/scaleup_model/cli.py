"""Command line entry point: ``scaleup-model run|sweep|reproduce``.

Exit codes: 0 success, 2 invalid input, 3 a ``--check`` tolerance failed.
"""
from __future__ import annotations

import argparse
import sys
from pathlib import Path

from .errors import ConfigError
from .scenario import (TARGETS, echo_stderr, load_scenario, reproduce,
                       results_table, run, sweep)

EXIT_OK, EXIT_INVALID, EXIT_CHECK = 0, 2, 3


def _emit(text: str, out: str | None):
    if out:
        Path(out).write_text(text)
    else:
        sys.stdout.write(text)


def _cmd_run(args) -> int:
    scenario = load_scenario(args.file, args.set, echo=echo_stderr)
    row = run(scenario)
    _emit(results_table("run", [row]).csv(), args.out)
    return EXIT_OK


def _cmd_sweep(args) -> int:
    root = Path(args.dir)
    if not root.is_dir():
        raise ConfigError("sweep directory", f"{root} is not a directory")
    paths = sorted(root.glob("*.json"))
    if not paths:
        raise ConfigError("sweep directory", f"no .json scenarios in {root}")
    scenarios = [load_scenario(p, args.set, echo=echo_stderr) for p in paths]
    rows = sweep(scenarios, args.baseline)
    _emit(results_table("sweep", rows).csv(), args.out)
    return EXIT_OK


def _cmd_reproduce(args) -> int:
    try:
        table = reproduce(args.target)
    except KeyError as exc:
        print(f"error: {exc.args[0]}", file=sys.stderr)
        return EXIT_INVALID
    _emit(table.csv(), args.out)
    if not args.check:
        return EXIT_OK
    for label, passed, detail in table.checks:
        print(f"{'PASS' if passed else 'FAIL'} {args.target}: {label}: {detail}",
              file=sys.stderr)
    return EXIT_OK if table.ok else EXIT_CHECK


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="scaleup-model",
        description="Analytical MoE training-time and optical interconnect model.")
    sub = parser.add_subparsers(dest="command", required=True)

    def common(p, overrides=True):
        p.add_argument("--out", help="write CSV here instead of stdout")
        if overrides:
            p.add_argument("--set", action="append", default=[], metavar="KEY=VALUE",
                           help="override a scenario value, e.g. cluster.pod_size=144")

    p = sub.add_parser("run", help="evaluate one scenario file")
    p.add_argument("file")
    common(p)
    p.set_defaults(func=_cmd_run)

    p = sub.add_parser("sweep", help="evaluate every scenario in a directory")
    p.add_argument("dir")
    p.add_argument("--baseline", help="scenario id used for normalization "
                                      "(default: first file in name order)")
    common(p)
    p.set_defaults(func=_cmd_sweep)

    p = sub.add_parser("reproduce", help=f"rebuild a result table: {', '.join(TARGETS)}")
    p.add_argument("target")
    p.add_argument("--check", action="store_true",
                   help="compare against the reference values; exit 3 on mismatch")
    common(p, overrides=False)
    p.set_defaults(func=_cmd_reproduce)
    return parser


def main(argv: list[str] | None = None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    try:
        return args.func(args)
    except ConfigError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_INVALID


if __name__ == "__main__":
    sys.exit(main())
