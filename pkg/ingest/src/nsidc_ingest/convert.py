"""Conversion from daily NetCDF grids to a floecast archive directory.

The output layout is the archive format the forecasting engine reads:

- ``manifest.tsv``   header line ``version=1 rows=R cols=C cell_area_km2=A``,
  then one tab-separated line per day: date, file name, byte size, CRC-32,
  gap flag (1 = interpolated rather than observed).
- ``mask.bin``       row-major uint8 cell codes (0 ocean, 1 land, 2 pole hole).
- ``YYYY-MM-DD.bin`` row-major little-endian float32 concentration fractions;
  non-ocean cells carry the canonical quiet-NaN bit pattern 0x7FC00000.

A ``conversion.json`` sidecar records the provenance of every output day.
"""

from __future__ import annotations

import datetime as dt
import json
import zlib
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

from .errors import SourceDataError, UsageError
from .netcdf import VARIABLE_DATASETS, read_day, source_date

MANIFEST_NAME = "manifest.tsv"
MASK_NAME = "mask.bin"
SIDECAR_NAME = "conversion.json"

OCEAN, LAND, POLE_HOLE = 0, 1, 2
NAN_BITS = np.uint32(0x7FC00000)
CELL_AREA_KM2 = 625.0  # 25 km polar stereographic grid

# Byte codes above the 0-100 percent range. 253 (coastline) folds into land:
# the archive mask distinguishes only ocean / land / pole hole.
FLAG_POLE_HOLE = 251
FLAG_COAST = 253
FLAG_LAND = 254
FLAG_MISSING = 255
FLAG_TO_MASK = {FLAG_POLE_HOLE: POLE_HOLE, FLAG_COAST: LAND, FLAG_LAND: LAND}


@dataclass
class ConversionManifest:
    """Record of one conversion: every output day is traceable to a source
    file or explicitly marked interpolated."""

    variable: str
    dataset: str
    source_files: list[str]
    flag_mapping: dict[int, str]
    days: list[dict] = field(default_factory=list)
    checksums: dict[str, str] = field(default_factory=dict)

    @property
    def n_days(self) -> int:
        return len(self.days)

    @property
    def interpolated_days(self) -> list[str]:
        return [d["date"] for d in self.days if d["interpolated"]]

    def to_json(self) -> str:
        payload = {
            "variable": self.variable,
            "dataset": self.dataset,
            "source_files": self.source_files,
            "flag_mapping": {str(k): v for k, v in self.flag_mapping.items()},
            "days": self.days,
            "checksums": self.checksums,
        }
        return json.dumps(payload, sort_keys=True, indent=2) + "\n"


def _crc32(data: bytes) -> str:
    return f"{zlib.crc32(data) & 0xFFFFFFFF:08x}"


def _split_flags(grid: np.ndarray, name: str, date: dt.date):
    """Separate a raw byte grid into (mask, percent) or fail on bad codes."""
    over = grid > 100
    codes = np.unique(grid[over])
    unknown = sorted(int(c) for c in codes if int(c) not in FLAG_TO_MASK)
    if FLAG_MISSING in unknown:
        raise SourceDataError(
            f"{date} ({name}): day contains missing-data cells (flag 255); "
            "partially observed days cannot be converted"
        )
    if unknown:
        listed = ", ".join(str(c) for c in unknown)
        raise SourceDataError(f"{date} ({name}): unknown flag value(s) {listed}")
    mask = np.zeros(grid.shape, dtype=np.uint8)
    for code, cell in FLAG_TO_MASK.items():
        mask[grid == code] = cell
    percent = grid.astype(np.float64)
    return mask, percent


def convert(src_dir: str | Path, variable: str, out_dir: str | Path) -> ConversionManifest:
    """Convert every daily file in `src_dir` into a floecast archive at `out_dir`.

    Percent values rescale to [0, 1] fractions. Single missing days between
    two observed days (the early-record two-day cadence) are filled with the
    per-pixel midpoint of their neighbours and gap-flagged; longer gaps and
    duplicate dates abort. All days must agree on the land/pole-hole mask.
    """
    if variable not in VARIABLE_DATASETS:
        raise UsageError(
            f"unknown variable {variable!r}; choose one of {sorted(VARIABLE_DATASETS)}"
        )
    dataset = VARIABLE_DATASETS[variable]
    src_dir = Path(src_dir)
    if not src_dir.is_dir():
        raise SourceDataError(f"source directory {src_dir} does not exist")
    files = sorted(src_dir.glob("*.nc"))
    if not files:
        raise SourceDataError(f"no .nc files in {src_dir}")

    by_date: dict[dt.date, Path] = {}
    for path in files:
        date = source_date(path)
        if date in by_date:
            raise SourceDataError(
                f"duplicate date {date}: {by_date[date].name} and {path.name}"
            )
        by_date[date] = path

    mask: np.ndarray | None = None
    observed: list[tuple[dt.date, np.ndarray, str]] = []
    for date in sorted(by_date):
        path = by_date[date]
        grid = read_day(path, dataset)
        day_mask, percent = _split_flags(grid, path.name, date)
        if mask is None:
            mask = day_mask
        elif not np.array_equal(mask, day_mask):
            raise SourceDataError(
                f"{date} ({path.name}): land/pole-hole cells differ from earlier "
                "days; the archive format requires one mask for all days"
            )
        observed.append((date, percent / 100.0, path.name))

    manifest = ConversionManifest(
        variable=variable,
        dataset=dataset,
        source_files=[by_date[d].name for d in sorted(by_date)],
        flag_mapping={
            FLAG_POLE_HOLE: "pole_hole",
            FLAG_COAST: "land",
            FLAG_LAND: "land",
        },
    )

    # Fill single-day gaps with exact per-pixel midpoints; refuse longer gaps.
    days: list[tuple[dt.date, np.ndarray, str | None]] = []
    for i, (date, fraction, name) in enumerate(observed):
        if i > 0:
            prev_date, prev_fraction, _ = observed[i - 1]
            delta = (date - prev_date).days
            if delta == 2:
                mid_date = prev_date + dt.timedelta(days=1)
                days.append((mid_date, (prev_fraction + fraction) / 2.0, None))
            elif delta > 2:
                raise SourceDataError(
                    f"{delta - 1} consecutive days missing between {prev_date} and "
                    f"{date}; only single-day gaps are interpolated"
                )
        days.append((date, fraction, name))

    out_dir = Path(out_dir)
    out_dir.mkdir(parents=True, exist_ok=True)
    rows, cols = mask.shape
    (out_dir / MASK_NAME).write_bytes(mask.tobytes())
    lines = [f"version=1 rows={rows} cols={cols} cell_area_km2={CELL_AREA_KM2!r}"]
    for date, fraction, name in days:
        day = fraction.astype("<f4")
        day.view(np.uint32)[mask != OCEAN] = NAN_BITS
        data = day.tobytes()
        bin_name = f"{date.isoformat()}.bin"
        (out_dir / bin_name).write_bytes(data)
        gap = 0 if name else 1
        crc = _crc32(data)
        lines.append(f"{date.isoformat()}\t{bin_name}\t{len(data)}\t{crc}\t{gap}")
        manifest.days.append(
            {"date": date.isoformat(), "source": name, "interpolated": name is None}
        )
        manifest.checksums[date.isoformat()] = crc
    (out_dir / MANIFEST_NAME).write_text("\n".join(lines) + "\n")
    (out_dir / SIDECAR_NAME).write_text(manifest.to_json())
    return manifest
