"""Command line wrapper: render one chart from one result CSV."""

from __future__ import annotations

import argparse
import sys

from .charts import KINDS, render
from .frames import FrameError


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="render",
        description="render one chart from a result CSV",
    )
    parser.add_argument("--kind", required=True, choices=KINDS, help="chart layout")
    parser.add_argument(
        "--in", dest="in_path", required=True, metavar="CSV", help="input result CSV"
    )
    parser.add_argument(
        "--out",
        dest="out_path",
        required=True,
        metavar="IMAGE",
        help="output image, format taken from the extension",
    )
    return parser


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    try:
        render(args.in_path, args.kind, args.out_path)
    except (FrameError, OSError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 1
    return 0


if __name__ == "__main__":
    sys.exit(main())
