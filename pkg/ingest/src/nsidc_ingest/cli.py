"""Command-line interface: convert, verify, make-fixture."""

from __future__ import annotations

import argparse
import datetime as dt
import sys

from .convert import convert
from .errors import EXIT_DATA, EXIT_USAGE, SourceDataError, UsageError
from .fixture import make_fixture
from .netcdf import VARIABLE_DATASETS
from .verify import format_report, verify


def _build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="nsidc-ingest",
        description="Convert NSIDC G02202 v4 daily NetCDF files to a floecast "
        "archive directory, and verify converted archives.",
    )
    sub = parser.add_subparsers(dest="command", required=True)

    p_convert = sub.add_parser("convert", help="convert a directory of .nc files")
    p_convert.add_argument(
        "--var", required=True, choices=sorted(VARIABLE_DATASETS),
        help="retrieval algorithm to extract",
    )
    p_convert.add_argument("--src", required=True, help="directory of daily .nc files")
    p_convert.add_argument("--out", required=True, help="archive directory to write")

    p_verify = sub.add_parser("verify", help="check an archive directory")
    p_verify.add_argument("archive", help="archive directory to verify")

    p_fixture = sub.add_parser(
        "make-fixture", help="write the synthetic daily NetCDF fixture"
    )
    p_fixture.add_argument("--out", required=True, help="directory to write .nc files")
    p_fixture.add_argument("--start", default="2020-01-01", help="first day (ISO date)")
    p_fixture.add_argument("--days", type=int, default=8, help="calendar days to span")
    p_fixture.add_argument(
        "--alternating", action="store_true",
        help="write every other day only (early-record cadence)",
    )
    return parser


def main(argv: list[str] | None = None) -> int:
    args = _build_parser().parse_args(argv)
    try:
        if args.command == "convert":
            manifest = convert(args.src, args.var, args.out)
            print(
                f"converted {len(manifest.source_files)} source files -> "
                f"{manifest.n_days} archive days "
                f"({len(manifest.interpolated_days)} interpolated) in {args.out}"
            )
            return 0
        if args.command == "verify":
            report = verify(args.archive)
            print(format_report(report))
            return 0 if report.ok else EXIT_DATA
        if args.command == "make-fixture":
            paths = make_fixture(
                args.out,
                start=dt.date.fromisoformat(args.start),
                n_days=args.days,
                alternating=args.alternating,
            )
            print(f"wrote {len(paths)} daily files to {args.out}")
            return 0
    except UsageError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_USAGE
    except SourceDataError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_DATA
    raise AssertionError(f"unhandled command {args.command}")


if __name__ == "__main__":
    sys.exit(main())
