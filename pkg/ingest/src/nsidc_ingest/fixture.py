"""Synthetic daily NetCDF fixture on the full 448x304 grid.

The generator is deterministic and closed-form so tests can recompute any
cell independently: `fixture_mask` and `fixture_percent` are the oracles,
`make_fixture` writes the corresponding NetCDF files.
"""

from __future__ import annotations

import datetime as dt
from pathlib import Path

import h5py
import numpy as np

from .convert import FLAG_COAST, FLAG_LAND, FLAG_POLE_HOLE, LAND, OCEAN, POLE_HOLE
from .netcdf import EXPECTED_SHAPE, VARIABLE_DATASETS

_VARIABLE_SHIFT = {"cdr": 0, "nt": 1, "bt": 2}


def _land(shape: tuple[int, int] = EXPECTED_SHAPE) -> np.ndarray:
    rows, cols = shape
    land = np.zeros(shape, dtype=bool)
    border = max(1, min(rows, cols) // 56)  # 8 cells on the full grid
    land[:border, :] = land[-border:, :] = True
    land[:, :border] = land[:, -border:] = True
    land[2 * rows // 3 :, : cols // 5] = True  # a coastal landmass
    return land


def _coast(land: np.ndarray) -> np.ndarray:
    """Ocean cells orthogonally adjacent to land."""
    near = np.zeros_like(land)
    near[1:, :] |= land[:-1, :]
    near[:-1, :] |= land[1:, :]
    near[:, 1:] |= land[:, :-1]
    near[:, :-1] |= land[:, 1:]
    return near & ~land


def _pole_hole(shape: tuple[int, int] = EXPECTED_SHAPE) -> np.ndarray:
    rows, cols = shape
    rr, cc = np.ogrid[:rows, :cols]
    radius = max(2, min(rows, cols) // 30)  # 10 cells on the full grid
    return (rr - rows // 4) ** 2 + (cc - cols // 2) ** 2 <= radius**2


def fixture_mask(shape: tuple[int, int] = EXPECTED_SHAPE) -> np.ndarray:
    """Archive cell codes the converter should produce for the fixture."""
    land = _land(shape) | _coast(_land(shape))
    mask = np.full(shape, OCEAN, dtype=np.uint8)
    mask[land] = LAND
    hole = _pole_hole(shape) & ~land
    mask[hole] = POLE_HOLE
    return mask


def fixture_percent(
    day_offset: int, variable: str = "cdr", shape: tuple[int, int] = EXPECTED_SHAPE
) -> np.ndarray:
    """Percent concentration for the day `day_offset` days after the fixture
    start, before flag codes are stamped in. Integer-valued by construction."""
    rows, cols = shape
    rr, cc = np.meshgrid(np.arange(rows), np.arange(cols), indexing="ij")
    shift = _VARIABLE_SHIFT[variable]
    return ((3 * rr + 5 * cc + 7 * day_offset + 13 * shift) % 101).astype(np.uint8)


def _day_grid(day_offset: int, variable: str, shape: tuple[int, int]) -> np.ndarray:
    grid = fixture_percent(day_offset, variable, shape)
    land = _land(shape)
    coast = _coast(land)
    hole = _pole_hole(shape) & ~land & ~coast
    grid[land] = FLAG_LAND
    grid[coast] = FLAG_COAST
    grid[hole] = FLAG_POLE_HOLE
    return grid


def make_fixture(
    out_dir: str | Path,
    start: dt.date = dt.date(2020, 1, 1),
    n_days: int = 8,
    alternating: bool = False,
    shape: tuple[int, int] = EXPECTED_SHAPE,
    inject_flag: tuple[int, int, int] | None = None,
) -> list[Path]:
    """Write daily NetCDF files covering `n_days` from `start`.

    With `alternating` only every other calendar day gets a file (the
    early-record cadence). `inject_flag` stamps one raw byte (row, col,
    value) into every variable of the first file, for error-path tests.
    """
    out_dir = Path(out_dir)
    out_dir.mkdir(parents=True, exist_ok=True)
    offsets = range(0, n_days, 2) if alternating else range(n_days)
    paths = []
    for offset in offsets:
        date = start + dt.timedelta(days=offset)
        name = f"seaice_conc_daily_nh_{date:%Y%m%d}_f17_v04r00.nc"
        path = out_dir / name
        with h5py.File(path, "w") as handle:
            handle.attrs["summary"] = "synthetic daily sea-ice concentration fixture"
            handle.attrs["date"] = date.isoformat()
            for variable, dataset in VARIABLE_DATASETS.items():
                grid = _day_grid(offset, variable, shape)
                if inject_flag is not None and offset == next(iter(offsets)):
                    row, col, value = inject_flag
                    grid[row, col] = value
                ds = handle.create_dataset(
                    dataset, data=grid[None, :, :], dtype="uint8"
                )
                ds.attrs["units"] = "percent"
                ds.attrs["valid_range"] = [0, 100]
                ds.attrs["flag_values"] = [251, 253, 254, 255]
                ds.attrs["flag_meanings"] = "pole_hole coastline land missing"
        paths.append(path)
    return paths
