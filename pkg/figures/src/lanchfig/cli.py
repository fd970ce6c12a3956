"""Command line for rendering figures from battle-engine artifacts.

Inputs are given as role=path pairs; roles are figure-specific
(trajectory, heatmap, sweep, topology, summary, curve or curve:<label>).
"""
from __future__ import annotations

import argparse
import json
import sys

from .recipes import FIGURES, FigureRecipe, SchemaError
from .render import render


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="lanchfig", description="Render battle-artifact figures."
    )
    parser.add_argument("--figure", choices=FIGURES, required=True)
    parser.add_argument(
        "--input",
        action="append",
        default=[],
        metavar="ROLE=PATH",
        help="artifact inputs, e.g. trajectory=runs/trajectory.csv",
    )
    parser.add_argument("--out", required=True, help="output image path")
    parser.add_argument(
        "--style", default=None, help="JSON object of style overrides"
    )
    return parser


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    inputs = {}
    for item in args.input:
        if "=" not in item:
            print(f"error: input {item!r} is not ROLE=PATH", file=sys.stderr)
            return 2
        role, path = item.split("=", 1)
        inputs[role] = path
    style = json.loads(args.style) if args.style else {}
    recipe = FigureRecipe(
        figure=args.figure, inputs=inputs, output=args.out, style=style
    )
    try:
        path = render(recipe)
    except (SchemaError, OSError, json.JSONDecodeError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 2
    print(path)
    return 0


if __name__ == "__main__":
    sys.exit(main())
