"""Command line: ``kmdplot <kind> --in series.csv --ref <value> --out fig.svg``."""

from __future__ import annotations

import argparse
import sys

from .render import KINDS, PlotSpec, SchemaError, render


def parse_reference(raw: str) -> tuple[str, float]:
    """Either a bare number or ``label=value``."""
    if "=" in raw:
        label, _, value = raw.partition("=")
        return label.strip(), float(value)
    value = float(raw)
    return f"rate {value:g}", value


def main(argv=None) -> int:
    parser = argparse.ArgumentParser(
        prog="kmdplot", description="Render kmdflow CSV output to SVG."
    )
    parser.add_argument("kind", choices=KINDS)
    parser.add_argument("--in", dest="inputs", action="append", required=True,
                        metavar="CSV", help="input CSV (repeatable)")
    parser.add_argument("--out", required=True, help="output SVG path")
    parser.add_argument("--col", default=None,
                        help="series column to plot (default hminus_s, or energy)")
    parser.add_argument("--ref", action="append", default=[],
                        metavar="[LABEL=]VALUE",
                        help="dashed reference rate/exponent (repeatable)")
    parser.add_argument("--label", action="append", default=None,
                        help="legend label per input (repeatable)")
    parser.add_argument("--threshold", type=float, default=0.0,
                        help="density level for the holemap kind")
    args = parser.parse_args(argv)
    try:
        spec = PlotSpec(
            kind=args.kind,
            inputs=args.inputs,
            output=args.out,
            column=args.col or "hminus_s",
            references=[parse_reference(r) for r in args.ref],
            threshold=args.threshold,
            labels=args.label,
        )
        render(spec)
    except (SchemaError, OSError, ValueError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 2
    return 0


if __name__ == "__main__":
    sys.exit(main())
