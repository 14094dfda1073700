"""Command line figure rendering.

Usage::

    covertower-plot <decay|zeros|variance|asconv> --in CSV [--density CSV]
                    --out FILE.svg|png

Exits nonzero on schema mismatches or unreadable inputs.
"""

from __future__ import annotations

import argparse
import sys

from .figures import (
    SchemaError,
    plot_asconv,
    plot_decay,
    plot_variance,
    plot_zeros,
    save_figure,
)

_KINDS = ("decay", "zeros", "variance", "asconv")


def main(argv=None) -> int:
    parser = argparse.ArgumentParser(
        prog="covertower-plot",
        description="Render figures from covertower experiment CSV files.",
    )
    sub = parser.add_subparsers(dest="kind", required=True)
    for kind in _KINDS:
        cmd = sub.add_parser(kind)
        cmd.add_argument("--in", dest="source", required=True, help="input CSV")
        cmd.add_argument("--out", required=True, help="output figure (.svg or .png)")
        if kind == "zeros":
            cmd.add_argument("--density", default=None, help="density CSV overlay")
    try:
        args = parser.parse_args(argv)
    except SystemExit as exc:
        return 2 if exc.code not in (0, None) else 0
    try:
        if args.kind == "decay":
            fig = plot_decay(args.source)
        elif args.kind == "zeros":
            fig = plot_zeros(args.source, args.density)
        elif args.kind == "variance":
            fig = plot_variance(args.source)
        else:
            fig = plot_asconv(args.source)
        save_figure(fig, args.out)
    except (SchemaError, OSError, ValueError) as err:
        print(f"plot error: {err}", file=sys.stderr)
        return 1
    return 0


if __name__ == "__main__":
    sys.exit(main())
