"""`plot cdf|bars|timeseries` command-line entry point."""

from __future__ import annotations

import argparse
import sys

from .figures import METRICS, plot_bars, plot_cdf, plot_timeseries
from .io import SchemaError


def _build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="plot", description="Render figures from cfsim CSV reports"
    )
    sub = parser.add_subparsers(dest="kind", required=True)
    for kind, help_text in (
        ("cdf", "per-user throughput CDF curves from users.csv files"),
        ("bars", "aggregate bar chart from users.csv files"),
        ("timeseries", "per-slot traces from slots.csv files"),
    ):
        p = sub.add_parser(kind, help=help_text)
        p.add_argument("--in", dest="inputs", nargs="+", required=True,
                       help="input CSV file(s)")
        p.add_argument("--labels", nargs="+", default=None)
        p.add_argument("--out", required=True, help="output image path")
        if kind == "bars":
            p.add_argument("--metric", choices=METRICS, default="geo_mean")
    return parser


def main(argv=None) -> int:
    args = _build_parser().parse_args(argv)
    try:
        if args.kind == "cdf":
            out = plot_cdf(args.inputs, args.labels, args.out)
        elif args.kind == "bars":
            out = plot_bars(args.inputs, args.metric, args.labels, args.out)
        else:
            out = plot_timeseries(args.inputs, args.labels, args.out)
    except (OSError, ValueError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 1
    print(f"wrote {out}")
    return 0


if __name__ == "__main__":
    sys.exit(main())
