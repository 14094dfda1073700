"""Command line entry point.

Usage::

    covertower <stability|equidist|variance|asconv|gtilde|kernel-table>
               [--config PATH] [--out DIR] [--seed U64]
               [--samples K] [--depth J] [--N INT] [--grid G]

Exit codes: 0 all assertions pass, 2 statistical failure, 3 numerical
failure, 4 usage error.
"""

from __future__ import annotations

import argparse
import sys

from .config import load_config
from .errors import ConfigError, CovertowerError
from .experiments import (
    EXIT_NUMERIC,
    EXIT_USAGE,
    run_as_convergence,
    run_equidistribution,
    run_gtilde,
    run_kernel_table,
    run_stability_scan,
    run_variance_scan,
)

_RUNNERS = {
    "stability": run_stability_scan,
    "equidist": run_equidistribution,
    "variance": run_variance_scan,
    "asconv": run_as_convergence,
    "gtilde": run_gtilde,
    "kernel-table": run_kernel_table,
}


def _build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="covertower",
        description="Kernel stability, zero equidistribution and variance "
        "experiments on covering towers of flat tori.",
    )
    sub = parser.add_subparsers(dest="command", required=True)
    for name in _RUNNERS:
        cmd = sub.add_parser(name)
        cmd.add_argument("--config", default=None, help="flat key=value config file")
        cmd.add_argument("--out", default=None, help="output directory")
        cmd.add_argument("--seed", type=int, default=None, help="master seed")
        cmd.add_argument("--samples", type=int, default=None, help="Monte Carlo samples")
        cmd.add_argument("--depth", type=int, default=None, help="tower depth")
        cmd.add_argument("--N", type=int, default=None, help="tensor power")
        cmd.add_argument("--grid", type=int, default=None, help="quadrature grid")
    return parser


def main(argv=None) -> int:
    parser = _build_parser()
    try:
        args = parser.parse_args(argv)
    except SystemExit as exc:
        return EXIT_USAGE if exc.code not in (0, None) else 0
    overrides = {
        "out_dir": args.out,
        "master_seed": args.seed,
        "n_samples": args.samples,
        "depth": args.depth,
        "N": args.N,
        "grid": args.grid,
    }
    try:
        cfg = load_config(args.config, overrides)
    except (ConfigError, FileNotFoundError, CovertowerError) as err:
        print(f"config error: {err}", file=sys.stderr)
        return EXIT_USAGE
    try:
        return _RUNNERS[args.command](cfg)
    except CovertowerError as err:
        print(f"numerical failure: {err}", file=sys.stderr)
        return EXIT_NUMERIC


if __name__ == "__main__":
    sys.exit(main())
