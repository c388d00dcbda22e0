#!/usr/bin/env python3
"""Render harness CSV exports as figures.

Consumes only the documented CSV schemas. Sweep exports (one row per
algorithm and swept value) become one labeled line per algorithm;
spectrum exports become a line over the grid axis, split per subcarrier
when an `sc` column is present. Values pass through to the figure
unmodified; this script never rescales or cleans the data.
"""

import argparse
import csv
import sys

import matplotlib

matplotlib.use("Agg")

import matplotlib.pyplot as plt


class PlotError(Exception):
    """Input contract violation; the CLI reports it and writes nothing."""


def read_rows(path: str):
    """Parse a CSV into (fieldnames, rows); empty body is an error."""
    try:
        with open(path, newline="") as fh:
            reader = csv.DictReader(fh)
            if reader.fieldnames is None:
                raise PlotError(f"no header in {path}")
            rows = list(reader)
    except OSError as exc:
        raise PlotError(str(exc)) from exc
    if not rows:
        raise PlotError(f"no data rows in {path}")
    return list(reader.fieldnames), rows


def _require(fieldnames, name, path):
    if name not in fieldnames:
        raise PlotError(f"column '{name}' not found in {path}")


def _series(rows, name):
    return [float(r[name]) for r in rows]


def render(path: str, kind: str, x: str, y: str, logy: bool):
    """Build the figure for one CSV; caller owns saving and closing."""
    fieldnames, rows = read_rows(path)
    _require(fieldnames, x, path)
    _require(fieldnames, y, path)
    fig, ax = plt.subplots(figsize=(6.4, 4.2))
    if kind == "sweep":
        _require(fieldnames, "algorithm", path)
        labels = []
        for r in rows:
            if r["algorithm"] not in labels:
                labels.append(r["algorithm"])
        for label in labels:
            sub = [r for r in rows if r["algorithm"] == label]
            ax.plot(_series(sub, x), _series(sub, y), marker="o",
                    label=label)
        ax.legend()
    elif "sc" in fieldnames:
        for sc in dict.fromkeys(r["sc"] for r in rows):
            sub = [r for r in rows if r["sc"] == sc]
            ax.plot(_series(sub, x), _series(sub, y), label=f"sc {sc}")
        ax.legend()
    else:
        ax.plot(_series(rows, x), _series(rows, y))
    if logy:
        ax.set_yscale("log")
    ax.set_xlabel(x)
    ax.set_ylabel(y)
    ax.grid(True, which="both", alpha=0.3)
    fig.tight_layout()
    return fig


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        description="render a harness CSV as a figure")
    parser.add_argument("--in", dest="path", required=True,
                        help="input CSV (sweep or spectrum export)")
    parser.add_argument("--kind", choices=("sweep", "spectrum"),
                        default="sweep")
    parser.add_argument("--x", default="value", help="x-axis column")
    parser.add_argument("--y", default="nmse_mean", help="y-axis column")
    parser.add_argument("--logy", action="store_true",
                        help="log-scale y axis")
    parser.add_argument("--out", default="fig.png", help="output image")
    return parser


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    try:
        fig = render(args.path, args.kind, args.x, args.y, args.logy)
    except PlotError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 2
    fig.savefig(args.out, dpi=150)
    plt.close(fig)
    print(f"wrote {args.out}")
    return 0


if __name__ == "__main__":
    sys.exit(main())
