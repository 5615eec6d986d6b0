"""Command line: glob metrics CSVs, aggregate, render one figure."""

from __future__ import annotations

import argparse
import glob
import sys
from pathlib import Path

from .aggregate import aggregate
from .render import render

__all__ = ["main"]


def main(argv: list[str] | None = None) -> int:
    parser = argparse.ArgumentParser(
        prog="plotkit", description="Render learning-curve figures from metrics CSVs."
    )
    parser.add_argument("inputs", nargs="+", help="CSV paths or glob patterns")
    parser.add_argument("--output-dir", type=Path, default=Path("."))
    parser.add_argument("--format", choices=["pdf", "svg", "png"], default="pdf")
    parser.add_argument("--name", default="learning_curves")
    args = parser.parse_args(argv)

    paths: list[str] = []
    for pattern in args.inputs:
        matched = sorted(glob.glob(pattern))
        paths.extend(matched if matched else [pattern])
    try:
        groups = aggregate(paths)
        args.output_dir.mkdir(parents=True, exist_ok=True)
        out = args.output_dir / f"{args.name}.{args.format}"
        render(groups, out)
    except (OSError, ValueError) as error:
        print(f"error: {error}", file=sys.stderr)
        return 2
    print(f"wrote {out}")
    return 0


if __name__ == "__main__":
    raise SystemExit(main())
