"""Integrity verification for a converted archive directory.

Re-checks every day file against its manifest checksum, validates value
ranges and date continuity, and reports day counts per evaluation split
against calendar arithmetic. Count mismatches are reported, never enforced:
the published G02202 v4 daily record spans fewer files than calendar days
(early years observe every other day), so both numbers are printed and the
caller decides.
"""

from __future__ import annotations

import datetime as dt
import zlib
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

from .convert import MANIFEST_NAME, MASK_NAME, NAN_BITS, OCEAN

# Standard evaluation split boundaries for the 1979-2024 record.
SPLIT_RANGES = {
    "train": (dt.date(1979, 1, 1), dt.date(2015, 12, 31)),
    "val": (dt.date(2016, 1, 1), dt.date(2019, 12, 31)),
    "test": (dt.date(2020, 1, 1), dt.date(2024, 12, 31)),
}

# Day count of the published daily record through 2024-06-30; reported for
# reference next to the calendar count whenever an archive spans that range.
PUBLISHED_RECORD_DAYS = 16686
PUBLISHED_RECORD_SPAN = (dt.date(1979, 1, 1), dt.date(2024, 6, 30))


@dataclass
class VerifyReport:
    archive: str
    violations: list[str] = field(default_factory=list)
    split_counts: dict[str, dict] = field(default_factory=dict)
    n_days: int = 0
    n_interpolated: int = 0
    start: dt.date | None = None
    end: dt.date | None = None

    @property
    def ok(self) -> bool:
        return not self.violations


def _crc32(data: bytes) -> str:
    return f"{zlib.crc32(data) & 0xFFFFFFFF:08x}"


def verify(archive_dir: str | Path) -> VerifyReport:
    """Check an archive directory; collect every violation rather than
    stopping at the first."""
    path = Path(archive_dir)
    report = VerifyReport(archive=str(path))
    manifest = path / MANIFEST_NAME
    if not manifest.is_file():
        report.violations.append(f"missing {MANIFEST_NAME} in {path}")
        return report
    lines = manifest.read_text().splitlines()
    if not lines:
        report.violations.append("empty manifest")
        return report

    header = dict(item.split("=", 1) for item in lines[0].split() if "=" in item)
    try:
        rows, cols = int(header["rows"]), int(header["cols"])
        if header["version"] != "1":
            report.violations.append(
                f"unsupported archive version {header['version']}"
            )
    except (KeyError, ValueError):
        report.violations.append(f"malformed manifest header: {lines[0]!r}")
        return report

    mask = None
    mask_file = path / MASK_NAME
    if not mask_file.is_file():
        report.violations.append(f"missing {MASK_NAME}")
    else:
        mask_bytes = mask_file.read_bytes()
        if len(mask_bytes) != rows * cols:
            report.violations.append(
                f"{MASK_NAME} has {len(mask_bytes)} bytes, expected {rows * cols}"
            )
        else:
            mask = np.frombuffer(mask_bytes, dtype=np.uint8).reshape(rows, cols)
            if mask.max() > 2:
                report.violations.append(
                    f"{MASK_NAME} contains unknown cell codes "
                    f"{sorted(int(c) for c in np.unique(mask) if c > 2)}"
                )
                mask = None

    dates: list[dt.date] = []
    prev: dt.date | None = None
    for lineno, line in enumerate(lines[1:], start=2):
        if not line.strip():
            continue
        parts = line.split("\t")
        if len(parts) != 5:
            report.violations.append(f"manifest line {lineno}: expected 5 fields")
            continue
        try:
            date = dt.date.fromisoformat(parts[0])
            nbytes = int(parts[2])
        except ValueError:
            report.violations.append(f"manifest line {lineno}: malformed entry")
            continue
        name, crc, gap = parts[1], parts[3], parts[4] == "1"
        dates.append(date)
        report.n_interpolated += gap
        if prev is not None and (date - prev).days != 1:
            report.violations.append(f"dates not consecutive: {prev} -> {date}")
        prev = date

        day_file = path / name
        if not day_file.is_file():
            report.violations.append(f"{date}: missing data file {name}")
            continue
        data = day_file.read_bytes()
        if len(data) != nbytes:
            report.violations.append(
                f"{date}: {name} has {len(data)} bytes, expected {nbytes}"
            )
            continue
        if _crc32(data) != crc:
            report.violations.append(f"{date}: checksum mismatch in {name}")
            continue
        if mask is None:
            continue
        day = np.frombuffer(data, dtype="<f4").reshape(rows, cols)
        ocean_vals = day[mask == OCEAN]
        if ocean_vals.size and (
            not np.all(np.isfinite(ocean_vals))
            or ocean_vals.min() < 0.0
            or ocean_vals.max() > 1.0
        ):
            report.violations.append(f"{date}: ocean values outside [0, 1]")
        if not np.all(np.isnan(day[mask != OCEAN])):
            report.violations.append(f"{date}: non-ocean cells are not NaN")

    report.n_days = len(dates)
    if dates:
        report.start, report.end = dates[0], dates[-1]
        date_set = set(dates)
        for split, (lo, hi) in SPLIT_RANGES.items():
            clipped_lo, clipped_hi = max(lo, dates[0]), min(hi, dates[-1])
            expected = max(0, (clipped_hi - clipped_lo).days + 1)
            actual = sum(1 for d in date_set if lo <= d <= hi)
            report.split_counts[split] = {
                "range": (lo, hi),
                "expected_calendar_days": expected,
                "actual_days": actual,
            }
    return report


def format_report(report: VerifyReport) -> str:
    """Human-readable report: span, per-split counts, then every violation."""
    lines = [f"archive: {report.archive}"]
    if report.start is not None:
        lines.append(
            f"days: {report.n_days} ({report.start}..{report.end}, "
            f"{report.n_interpolated} interpolated)"
        )
        for split, info in report.split_counts.items():
            lo, hi = info["range"]
            lines.append(
                f"split {split} ({lo}..{hi}): expected {info['expected_calendar_days']} "
                f"calendar days in archive span, actual {info['actual_days']}"
            )
        if (report.start, report.end) == PUBLISHED_RECORD_SPAN:
            calendar = (PUBLISHED_RECORD_SPAN[1] - PUBLISHED_RECORD_SPAN[0]).days + 1
            lines.append(
                f"note: published daily record for this span has "
                f"{PUBLISHED_RECORD_DAYS} files vs {calendar} calendar days "
                "(early-record two-day cadence); counts are reported, not enforced"
            )
    if report.violations:
        lines.append(f"FAILED: {len(report.violations)} violation(s)")
        lines.extend(f"  - {v}" for v in report.violations)
    else:
        lines.append("all checks passed")
    return "\n".join(lines)
