"""Command line front end: one CSV plus one spec file in, one image out."""

from __future__ import annotations

import argparse
import sys

from .plot import FigureSpec, FigureSpecError, render


def main(argv=None) -> int:
    parser = argparse.ArgumentParser(
        prog="mmep-plot",
        description="Render a sweep figure from harness CSV output.")
    parser.add_argument("--csv", required=True, help="harness CSV file")
    parser.add_argument("--spec", required=True, help="JSON figure spec")
    parser.add_argument("--out", required=True, help="output image path")
    args = parser.parse_args(argv)
    try:
        spec = FigureSpec.from_json(args.spec)
        render(args.csv, spec, args.out)
    except (FigureSpecError, OSError) as exc:
        print(f"mmep-plot: {exc}", file=sys.stderr)
        return 1
    return 0


if __name__ == "__main__":
    sys.exit(main())
