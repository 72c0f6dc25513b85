"""ldrl-plot: render one figure from solver CSVs.

Usage: ldrl-plot <kind> --in data.csv [--in more.csv] --out fig.png
       [--maze maze.txt] [--title ...] [--target x] [--log-x] [--log-y]
"""

from __future__ import annotations

import argparse
import sys

from .figures import RENDERERS, FigureSpec, SchemaError, render


def _build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="ldrl-plot")
    parser.add_argument("kind", choices=sorted(RENDERERS))
    parser.add_argument("--in", dest="inputs", action="append", required=True,
                        help="input CSV (repeat for figures needing several)")
    parser.add_argument("--out", required=True, help="output image path")
    parser.add_argument("--maze", help="maze file for wall/start/goal overlay")
    parser.add_argument("--title")
    parser.add_argument("--target", type=float,
                        help="reference level (theta_convergence)")
    parser.add_argument("--log-x", action="store_true")
    parser.add_argument("--log-y", action="store_true")
    return parser


def main(argv: list | None = None) -> int:
    args = _build_parser().parse_args(argv)
    spec = FigureSpec(kind=args.kind, inputs=args.inputs, output=args.out,
                      maze=args.maze, title=args.title, target=args.target,
                      log_x=args.log_x, log_y=args.log_y)
    try:
        render(spec)
    except (SchemaError, OSError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 2
    return 0


if __name__ == "__main__":
    sys.exit(main())
