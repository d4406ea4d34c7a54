"""Reading one daily G02202 v4 grid out of a NetCDF-4 file.

NetCDF-4 files are HDF5 containers, so h5py reads them directly. A daily
file carries one byte-encoded concentration grid per retrieval algorithm:

- ``cdr_seaice_conc``      Climate Data Record merge
- ``nsidc_nt_seaice_conc`` NASA Team retrieval
- ``nsidc_bt_seaice_conc`` Bootstrap retrieval

Cell values 0-100 are sea-ice concentration in percent; values above 100
are flag codes (see `convert.FLAG_TO_MASK`). The grid is the 25 km polar
stereographic grid, 448 rows by 304 columns, optionally with a leading
length-1 time axis. The observation date is encoded in the file name as
the first 8-digit run (e.g. ``seaice_conc_daily_nh_20200131_f17_v04r00.nc``).
"""

from __future__ import annotations

import datetime as dt
import re
from pathlib import Path

import h5py
import numpy as np

from .errors import SourceDataError

VARIABLE_DATASETS = {
    "cdr": "cdr_seaice_conc",
    "nt": "nsidc_nt_seaice_conc",
    "bt": "nsidc_bt_seaice_conc",
}

EXPECTED_SHAPE = (448, 304)

_DATE_RUN = re.compile(r"(\d{8})")


def source_date(path: str | Path) -> dt.date:
    """Observation date from the file name's first 8-digit run."""
    match = _DATE_RUN.search(Path(path).name)
    if match is None:
        raise SourceDataError(f"{Path(path).name}: no YYYYMMDD date in file name")
    text = match.group(1)
    try:
        return dt.date(int(text[:4]), int(text[4:6]), int(text[6:8]))
    except ValueError as exc:
        raise SourceDataError(f"{Path(path).name}: invalid date {text}") from exc


def read_day(path: str | Path, dataset: str) -> np.ndarray:
    """The (448, 304) uint8 grid for `dataset` in one daily file."""
    path = Path(path)
    try:
        handle = h5py.File(path, "r")
    except OSError as exc:
        raise SourceDataError(f"{path.name}: not a readable NetCDF/HDF5 file") from exc
    with handle:
        if dataset not in handle:
            available = sorted(k for k in handle.keys())
            raise SourceDataError(
                f"{path.name}: no dataset {dataset!r}; file has {available}"
            )
        raw = np.asarray(handle[dataset][...])
    if raw.ndim == 3 and raw.shape[0] == 1:
        raw = raw[0]
    if raw.shape != EXPECTED_SHAPE:
        raise SourceDataError(
            f"{path.name}: grid shape {raw.shape} != expected "
            f"{EXPECTED_SHAPE[0]}x{EXPECTED_SHAPE[1]}"
        )
    if not np.issubdtype(raw.dtype, np.integer):
        raise SourceDataError(
            f"{path.name}: {dataset} has dtype {raw.dtype}, expected byte-encoded "
            "percent values"
        )
    if raw.min() < 0 or raw.max() > 255:
        raise SourceDataError(f"{path.name}: {dataset} values outside the byte range")
    return raw.astype(np.uint8)
