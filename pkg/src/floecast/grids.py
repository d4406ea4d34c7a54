"""Gridded sea-ice concentration data model: daily grids, archives, climatology.

Concentrations are stored as fractions in [0, 1]. Land and pole-hole cells
carry a canonical quiet-NaN sentinel and are excluded from every statistic;
the pole hole counts as ice for extent.
"""

from __future__ import annotations

import datetime as dt
import zlib
from dataclasses import dataclass, field
from pathlib import Path
from typing import Iterator, Sequence

import numpy as np
from scipy.ndimage import gaussian_filter

OCEAN = 0
LAND = 1
POLE_HOLE = 2

# Canonical quiet-NaN bit pattern used for non-ocean cells on disk and in memory.
NAN_BITS = np.uint32(0x7FC00000)

MANIFEST_NAME = "manifest.tsv"
MASK_NAME = "mask.bin"


class ArchiveError(Exception):
    """Base class for archive I/O and validation failures."""


class ArchiveFormatError(ArchiveError):
    """Structurally invalid archive contents (shapes, values, manifest syntax)."""


class ArchiveLoadError(ArchiveError):
    """Missing or corrupt files discovered while loading."""


def clim_doy(date: dt.date) -> int:
    """Day-of-year index 1..366 with Feb 29 folded onto 366.

    Every other calendar date maps to its non-leap-year ordinal, so the same
    month/day always lands on the same index regardless of year.
    """
    if date.month == 2 and date.day == 29:
        return 366
    return dt.date(2001, date.month, date.day).timetuple().tm_yday


@dataclass(frozen=True)
class DateRange:
    """Inclusive range of calendar dates."""

    start: dt.date
    end: dt.date

    def __post_init__(self) -> None:
        if self.end < self.start:
            raise ValueError(f"empty date range: {self.start}..{self.end}")

    @property
    def n_days(self) -> int:
        return (self.end - self.start).days + 1

    def __contains__(self, date: dt.date) -> bool:
        return self.start <= date <= self.end

    def days(self) -> Iterator[dt.date]:
        for i in range(self.n_days):
            yield self.start + dt.timedelta(days=i)

    def to_json(self) -> list[str]:
        return [self.start.isoformat(), self.end.isoformat()]

    @staticmethod
    def from_json(obj: Sequence[str]) -> "DateRange":
        return DateRange(dt.date.fromisoformat(obj[0]), dt.date.fromisoformat(obj[1]))


@dataclass(frozen=True)
class Splits:
    """Disjoint, ordered train/val/test date ranges."""

    train: DateRange
    val: DateRange
    test: DateRange

    def __post_init__(self) -> None:
        if not (self.train.end < self.val.start and self.val.end < self.test.start):
            raise ValueError("splits must be disjoint and ordered train < val < test")


@dataclass(frozen=True)
class SicGrid:
    """One day's concentration field plus the shared cell mask."""

    values: np.ndarray  # float32 (rows, cols); NaN at non-ocean cells
    mask: np.ndarray  # uint8 (rows, cols); OCEAN / LAND / POLE_HOLE
    date: dt.date

    def __post_init__(self) -> None:
        if self.values.shape != self.mask.shape:
            raise ValueError(
                f"values shape {self.values.shape} != mask shape {self.mask.shape}"
            )

    @property
    def ocean(self) -> np.ndarray:
        return self.mask == OCEAN


def validate_day_values(values: np.ndarray, mask: np.ndarray, date: dt.date) -> None:
    ocean = mask == OCEAN
    vals = values[ocean]
    if vals.size and (not np.all(np.isfinite(vals)) or vals.min() < 0.0 or vals.max() > 1.0):
        raise ArchiveFormatError(
            f"{date}: ocean cells must be finite and in [0, 1]"
        )


def _canonicalize(values: np.ndarray, mask: np.ndarray) -> np.ndarray:
    """Force float32 and stamp the canonical NaN pattern into non-ocean cells.

    Accepts a single (rows, cols) grid or a stack with leading axes.
    """
    out = np.ascontiguousarray(values, dtype=np.float32).copy()
    out.view(np.uint32)[..., mask != OCEAN] = NAN_BITS
    return out


class GridArchive:
    """Date-ordered daily grid series sharing one mask.

    Dates are consecutive; days that were filled rather than observed carry a
    gap flag. The archive is immutable after construction and safe to share
    across threads.
    """

    def __init__(
        self,
        values: np.ndarray,
        mask: np.ndarray,
        start: dt.date,
        cell_area_km2: float,
        gap_flags: np.ndarray | None = None,
        splits: Splits | None = None,
        validate: bool = True,
    ):
        values = np.asarray(values, dtype=np.float32)
        if values.ndim != 3:
            raise ArchiveFormatError(f"values must be (days, rows, cols), got {values.shape}")
        mask = np.asarray(mask, dtype=np.uint8)
        if mask.shape != values.shape[1:]:
            raise ArchiveFormatError(
                f"mask shape {mask.shape} != grid shape {values.shape[1:]}"
            )
        n = values.shape[0]
        self.mask = mask.copy()
        self.mask.setflags(write=False)
        self.cell_area_km2 = float(cell_area_km2)
        self.dates = [start + dt.timedelta(days=i) for i in range(n)]
        if gap_flags is None:
            gap_flags = np.zeros(n, dtype=bool)
        self.gap_flags = np.asarray(gap_flags, dtype=bool)
        if self.gap_flags.shape != (n,):
            raise ArchiveFormatError("gap_flags length must match day count")
        self.splits = splits
        canon = np.empty_like(values)
        for i in range(n):
            if validate:
                validate_day_values(values[i], mask, self.dates[i])
            canon[i] = _canonicalize(values[i], mask)
        self.values = canon
        self.values.setflags(write=False)
        self._check_splits()

    def _check_splits(self) -> None:
        if self.splits is None or self.n_days == 0:
            return
        for rng in (self.splits.train, self.splits.val, self.splits.test):
            if rng.start < self.dates[0] or rng.end > self.dates[-1]:
                raise ArchiveFormatError(
                    f"split range {rng.start}..{rng.end} outside archive "
                    f"{self.dates[0]}..{self.dates[-1]}"
                )

    # -- basic accessors ---------------------------------------------------

    @property
    def n_days(self) -> int:
        return self.values.shape[0]

    @property
    def shape(self) -> tuple[int, int]:
        return self.values.shape[1:]

    @property
    def ocean(self) -> np.ndarray:
        return self.mask == OCEAN

    @property
    def start(self) -> dt.date:
        return self.dates[0]

    @property
    def end(self) -> dt.date:
        return self.dates[-1]

    def index_of(self, date: dt.date) -> int:
        i = (date - self.dates[0]).days
        if i < 0 or i >= self.n_days:
            raise KeyError(f"date {date} not in archive {self.start}..{self.end}")
        return i

    def __contains__(self, date: dt.date) -> bool:
        return 0 <= (date - self.dates[0]).days < self.n_days

    def grid(self, date: dt.date) -> SicGrid:
        return SicGrid(self.values[self.index_of(date)], self.mask, date)

    def grid_at(self, i: int) -> SicGrid:
        return SicGrid(self.values[i], self.mask, self.dates[i])

    def __iter__(self) -> Iterator[SicGrid]:
        for i in range(self.n_days):
            yield self.grid_at(i)

    def range(self) -> DateRange:
        return DateRange(self.start, self.end)

    def values_for(self, rng: DateRange) -> np.ndarray:
        """View of the (days, rows, cols) block covering `rng`."""
        i0 = self.index_of(rng.start)
        i1 = self.index_of(rng.end)
        return self.values[i0 : i1 + 1]

    def with_splits(self, splits: Splits) -> "GridArchive":
        out = GridArchive.__new__(GridArchive)
        out.values = self.values
        out.mask = self.mask
        out.dates = self.dates
        out.gap_flags = self.gap_flags
        out.cell_area_km2 = self.cell_area_km2
        out.splits = splits
        out._check_splits()
        return out

    def __eq__(self, other: object) -> bool:
        if not isinstance(other, GridArchive):
            return NotImplemented
        return (
            self.dates == other.dates
            and self.cell_area_km2 == other.cell_area_km2
            and np.array_equal(self.mask, other.mask)
            and np.array_equal(self.gap_flags, other.gap_flags)
            # non-ocean cells are canonical NaN, so compare raw bits
            and self.values.tobytes() == other.values.tobytes()
        )

    def __repr__(self) -> str:
        if self.n_days == 0:
            return f"GridArchive(empty, shape={self.shape})"
        return (
            f"GridArchive({self.n_days} days {self.start}..{self.end}, "
            f"shape={self.shape}, area={self.cell_area_km2} km2)"
        )


@dataclass
class Climatology:
    """Per-pixel, per-day-of-year mean fields (index 1..366, Feb 29 at 366)."""

    fields: np.ndarray  # float32 (366, rows, cols); NaN where undefined
    counts: np.ndarray  # int64 (366,) samples per day-of-year
    mask: np.ndarray  # uint8 (rows, cols)
    source_range: DateRange

    def field_for(self, date: dt.date) -> np.ndarray:
        doy = clim_doy(date)
        if doy == 366 and self.counts[365] == 0:
            # No Feb 29 in the source range: blend the neighbouring days.
            return 0.5 * (self.fields[58] + self.fields[59])
        return self.fields[doy - 1]


def compute_climatology(archive: GridArchive, rng: DateRange) -> Climatology:
    """Mean field per day-of-year over all years of `rng` within `archive`."""
    if rng.start < archive.start or rng.end > archive.end:
        raise ValueError(f"range {rng.start}..{rng.end} not covered by archive")
    rows, cols = archive.shape
    sums = np.zeros((366, rows, cols), dtype=np.float64)
    counts = np.zeros(366, dtype=np.int64)
    i0 = archive.index_of(rng.start)
    for k, date in enumerate(rng.days()):
        doy = clim_doy(date)
        sums[doy - 1] += archive.values[i0 + k]
        counts[doy - 1] += 1
    fields = np.full((366, rows, cols), np.nan, dtype=np.float32)
    defined = counts > 0
    fields[defined] = (sums[defined] / counts[defined, None, None]).astype(np.float32)
    fields[:, archive.mask != OCEAN] = np.float32(np.nan)
    return Climatology(fields=fields, counts=counts, mask=archive.mask, source_range=rng)


def sea_ice_extent(
    grid: SicGrid, threshold: float = 0.15, cell_area_km2: float = 625.0
) -> float:
    """Total area (km^2) of cells strictly above `threshold`.

    Pole-hole cells count as ice by convention; land never does.
    """
    ocean = grid.mask == OCEAN
    n_ice = int(np.count_nonzero(grid.values[ocean] > threshold))
    n_ice += int(np.count_nonzero(grid.mask == POLE_HOLE))
    return n_ice * cell_area_km2


# -- synthetic archives ----------------------------------------------------


@dataclass(frozen=True)
class SynthConfig:
    """Seasonal + trend + AR(1)-anomaly surrogate generator settings.

    `noise_spatial_scale` smooths the AR(1) innovations with a Gaussian
    kernel (in cells) so anomalies concentrate in a few spatial patterns;
    0 gives pixel-independent noise. Per-pixel innovation std stays
    `noise_sd` either way.
    """

    shape: tuple[int, int] = (56, 38)
    n_days: int = 365
    seasonal_amp: float = 0.2
    seasonal_trough_doy: float = 250.0
    trend_per_year: float = 0.0
    ar1_rho: float = 0.8
    noise_sd: float = 0.02
    seed: int = 0
    start: dt.date = dt.date(2000, 1, 1)
    noise_spatial_scale: float = 0.0
    pole_hole_size: int = 0

    def __post_init__(self) -> None:
        if self.n_days < 1:
            raise ValueError("n_days must be >= 1")
        if not (0.0 <= self.ar1_rho < 1.0):
            raise ValueError("ar1_rho must be in [0, 1)")
        if self.noise_sd < 0 or self.seasonal_amp < 0:
            raise ValueError("noise_sd and seasonal_amp must be nonnegative")
        if min(self.shape) < 3:
            raise ValueError("grid must be at least 3x3 to fit a land border")


def synth_mask(shape: tuple[int, int], pole_hole_size: int = 0) -> np.ndarray:
    rows, cols = shape
    mask = np.zeros(shape, dtype=np.uint8)
    mask[0, :] = LAND
    mask[-1, :] = LAND
    mask[:, 0] = LAND
    mask[:, -1] = LAND
    if pole_hole_size > 0:
        r0 = 1
        c0 = max(1, cols // 2 - pole_hole_size // 2)
        mask[r0 : r0 + pole_hole_size, c0 : c0 + pole_hole_size] = POLE_HOLE
    return mask


def synth_archive(config: SynthConfig, splits: Splits | None = None) -> GridArchive:
    """Deterministic synthetic daily archive.

    Per pixel: clip(base + amp*cos(2*pi*(doy - trough_doy)/365.25 + pi
    + phase) + trend*years + AR(1) anomaly, 0, 1), with a land border ring
    in the mask. The cycle bottoms out near ``seasonal_trough_doy`` (early
    September by default, like the Arctic minimum), slightly earlier where
    the per-pixel phase offset is larger.
    """
    rows, cols = config.shape
    rng = np.random.default_rng(config.seed)
    mask = synth_mask(config.shape, config.pole_hole_size)

    ii = np.linspace(0.0, 1.0, rows)[:, None]
    jj = np.linspace(0.0, 1.0, cols)[None, :]
    base = 0.55 + 0.25 * np.cos(np.pi * ii) + 0.03 * np.sin(2 * np.pi * jj)
    phase = 0.15 * ii + 0.08 * jj  # mild phase gradient: seasonal field is rank 2

    # Gaussian smoothing shrinks the innovation variance; rescale so the
    # per-pixel std stays noise_sd.
    if config.noise_spatial_scale > 0:
        impulse = np.zeros(config.shape)
        impulse[rows // 2, cols // 2] = 1.0
        kernel_norm = float(
            np.sqrt(np.sum(gaussian_filter(impulse, config.noise_spatial_scale) ** 2))
        )
    else:
        kernel_norm = 1.0

    def innovation() -> np.ndarray:
        eps = rng.standard_normal(config.shape)
        if config.noise_spatial_scale > 0:
            eps = gaussian_filter(eps, config.noise_spatial_scale) / kernel_norm
        return eps

    stationary_sd = config.noise_sd / np.sqrt(1.0 - config.ar1_rho**2)
    anomaly = innovation() * stationary_sd if config.noise_sd > 0 else np.zeros(config.shape)

    values = np.empty((config.n_days, rows, cols), dtype=np.float32)
    for t in range(config.n_days):
        date = config.start + dt.timedelta(days=t)
        doy = clim_doy(date)
        seasonal = config.seasonal_amp * np.cos(
            2.0 * np.pi * (doy - config.seasonal_trough_doy) / 365.25 + np.pi + phase
        )
        trend = config.trend_per_year * (t / 365.25)
        field = np.clip(base + seasonal + trend + anomaly, 0.0, 1.0)
        values[t] = field.astype(np.float32)
        if config.noise_sd > 0:
            anomaly = config.ar1_rho * anomaly + config.noise_sd * innovation()

    return GridArchive(
        values, mask, config.start, cell_area_km2=625.0, splits=splits
    )


# -- archive directory format ----------------------------------------------


def _crc32(data: bytes) -> str:
    return f"{zlib.crc32(data) & 0xFFFFFFFF:08x}"


def write_archive(archive: GridArchive, path: str | Path) -> None:
    """Write an archive directory: manifest.tsv, mask.bin, per-day .bin files.

    Fails before touching disk if any ocean cell violates the [0, 1] or
    finiteness invariants.
    """
    for i in range(archive.n_days):
        validate_day_values(archive.values[i], archive.mask, archive.dates[i])
    path = Path(path)
    path.mkdir(parents=True, exist_ok=True)
    rows, cols = archive.shape
    (path / MASK_NAME).write_bytes(archive.mask.tobytes())
    lines = [
        f"version=1 rows={rows} cols={cols} cell_area_km2={archive.cell_area_km2!r}"
    ]
    for i, date in enumerate(archive.dates):
        day = archive.values[i].astype("<f4")
        day.view(np.uint32)[archive.mask != OCEAN] = NAN_BITS
        data = day.tobytes()
        name = f"{date.isoformat()}.bin"
        (path / name).write_bytes(data)
        gap = 1 if archive.gap_flags[i] else 0
        lines.append(f"{date.isoformat()}\t{name}\t{len(data)}\t{_crc32(data)}\t{gap}")
    (path / MANIFEST_NAME).write_text("\n".join(lines) + "\n")


def _parse_header(line: str) -> tuple[int, int, float]:
    fields = dict(item.split("=", 1) for item in line.split() if "=" in item)
    try:
        if fields["version"] != "1":
            raise ArchiveFormatError(f"unsupported archive version {fields['version']}")
        return int(fields["rows"]), int(fields["cols"]), float(fields["cell_area_km2"])
    except KeyError as exc:
        raise ArchiveFormatError(f"manifest header missing field {exc}") from exc


def read_archive(path: str | Path, validate_values: bool = True) -> GridArchive:
    """Load an archive directory, verifying checksums and date continuity."""
    path = Path(path)
    manifest = path / MANIFEST_NAME
    if not manifest.is_file():
        raise ArchiveLoadError(f"missing {MANIFEST_NAME} in {path}")
    lines = manifest.read_text().splitlines()
    if not lines:
        raise ArchiveFormatError("empty manifest")
    rows, cols, area = _parse_header(lines[0])

    mask_file = path / MASK_NAME
    if not mask_file.is_file():
        raise ArchiveLoadError(f"missing {MASK_NAME} in {path}")
    mask_bytes = mask_file.read_bytes()
    if len(mask_bytes) != rows * cols:
        raise ArchiveFormatError(
            f"mask.bin has {len(mask_bytes)} bytes, expected {rows * cols}"
        )
    mask = np.frombuffer(mask_bytes, dtype=np.uint8).reshape(rows, cols)
    if not np.all(np.isin(mask, (OCEAN, LAND, POLE_HOLE))):
        raise ArchiveFormatError("mask.bin contains unknown cell codes")

    entries = []
    for lineno, line in enumerate(lines[1:], start=2):
        if not line.strip():
            continue
        parts = line.split("\t")
        if len(parts) != 5:
            raise ArchiveFormatError(f"manifest line {lineno}: expected 5 fields")
        date = dt.date.fromisoformat(parts[0])
        entries.append((date, parts[1], int(parts[2]), parts[3], parts[4] == "1"))

    n = len(entries)
    values = np.empty((n, rows, cols), dtype=np.float32)
    gaps = np.zeros(n, dtype=bool)
    prev: dt.date | None = None
    for i, (date, name, nbytes, crc, gap) in enumerate(entries):
        if prev is not None and (date - prev).days != 1:
            raise ArchiveFormatError(f"dates not consecutive at {date}")
        prev = date
        day_file = path / name
        if not day_file.is_file():
            raise ArchiveLoadError(f"{date}: missing data file {name}")
        data = day_file.read_bytes()
        if len(data) != nbytes:
            raise ArchiveLoadError(f"{date}: {name} has {len(data)} bytes, expected {nbytes}")
        if _crc32(data) != crc:
            raise ArchiveLoadError(f"{date}: checksum mismatch in {name}")
        day = np.frombuffer(data, dtype="<f4").reshape(rows, cols)
        if validate_values:
            validate_day_values(day, mask, date)
        values[i] = day
        gaps[i] = gap

    start = entries[0][0] if entries else dt.date(2000, 1, 1)
    return GridArchive(
        values, mask, start, cell_area_km2=area, gap_flags=gaps, validate=False
    )
