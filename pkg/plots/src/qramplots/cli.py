"""Command line entry point for rendering figures from experiment tables."""

from __future__ import annotations

import argparse
import sys

from .figures import KINDS, FigureSpec, render
from .tables import PlotError


def _flag(value: str) -> bool:
    return value == "on"


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="qramplots",
        description="Render figures from experiment CSV tables.",
    )
    sub = parser.add_subparsers(dest="command", required=True)
    cmd = sub.add_parser("render", help="render one figure from one or two tables")
    cmd.add_argument("--kind", required=True, choices=KINDS)
    cmd.add_argument("--in", dest="path", required=True, metavar="CSV")
    cmd.add_argument("--in2", dest="second_path", metavar="CSV")
    cmd.add_argument("--out", required=True, metavar="IMG")
    cmd.add_argument("--log-x", choices=("on", "off"))
    cmd.add_argument("--log-y", choices=("on", "off"))
    return parser


def run(argv: list[str] | None = None) -> int:
    args = build_parser().parse_args(argv)
    spec = FigureSpec(
        kind=args.kind,
        path=args.path,
        out=args.out,
        second_path=args.second_path,
        log_x=None if args.log_x is None else _flag(args.log_x),
        log_y=None if args.log_y is None else _flag(args.log_y),
    )
    try:
        result = render(spec)
    except (PlotError, OSError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 2
    print(f"wrote {result.out}")
    for line in result.annotations:
        print(line)
    return 0


def main() -> None:
    raise SystemExit(run())


if __name__ == "__main__":
    main()
