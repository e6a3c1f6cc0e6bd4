"""Command-line entry point.

Exit status: 0 on success, 2 when the scenario or arguments are invalid,
1 for any other failure.
"""

from __future__ import annotations

import argparse
import sys

from . import __version__
from .errors import FakePathError, ScenarioError
from .experiments import FIGURES, emit, run_figure, run_sweep
from .scenario import dump_scenario, load_scenario

EXIT_OK = 0
EXIT_RUNTIME = 1
EXIT_INVALID = 2


def _common(p: argparse.ArgumentParser) -> None:
    p.add_argument("--scenario", help="YAML scenario file (defaults to the built-in scenario)")
    p.add_argument("--seed", type=int, help="master seed, overrides sweep.seed")
    p.add_argument("--out", help="output file, '-' for stdout (overrides outputs.path)")
    p.add_argument("--format", choices=("csv", "json"), help="output format (overrides outputs.format)")
    p.add_argument("--normalize-power", action="store_true", help="rescale the precoder to keep mean pilot energy")


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="fakepath",
        description="Fisher-information analysis of fake-path injection against an eavesdropping localizer.",
    )
    parser.add_argument("--version", action="version", version=f"%(prog)s {__version__}")
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("sweep", help="CRLBs for both receivers over the SNR grid")
    _common(p)

    p = sub.add_parser("figure", help="plot-ready dataset for one figure")
    p.add_argument("figure_id", choices=FIGURES)
    _common(p)

    p = sub.add_parser("validate", help="check a scenario file and print it with defaults filled")
    p.add_argument("--scenario", help="YAML scenario file")
    p.add_argument("--quiet", action="store_true", help="only report validity")
    return parser


def main(argv=None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    try:
        spec = load_scenario(args.scenario)
    except ScenarioError as exc:
        print(f"invalid scenario: {exc}", file=sys.stderr)
        return EXIT_INVALID
    except OSError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_INVALID

    if args.command == "validate":
        if args.quiet:
            print("ok")
        else:
            sys.stdout.write(dump_scenario(spec))
        return EXIT_OK

    spec = spec.with_overrides(args.seed, args.normalize_power, args.out, args.format)
    try:
        if args.command == "sweep":
            rows = run_sweep(spec)
        else:
            rows = run_figure(spec, args.figure_id)
        emit(rows, spec.outputs.format, spec.outputs.path)
    except ScenarioError as exc:
        print(f"invalid scenario: {exc}", file=sys.stderr)
        return EXIT_INVALID
    except (FakePathError, OSError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_RUNTIME
    return EXIT_OK


if __name__ == "__main__":
    sys.exit(main())
