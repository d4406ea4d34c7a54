"""Converter from NSIDC G02202 v4 daily NetCDF files to the floecast archive format.

The converter is the only component that parses NetCDF; the forecasting
engine consumes the produced archive directory and never sees the source
files. Conversion is deterministic: the same source tree always yields a
byte-identical archive.
"""

from .convert import ConversionManifest, FLAG_TO_MASK, convert
from .errors import IngestError, SourceDataError, UsageError
from .fixture import fixture_mask, fixture_percent, make_fixture
from .netcdf import EXPECTED_SHAPE, VARIABLE_DATASETS, read_day, source_date
from .verify import SPLIT_RANGES, VerifyReport, format_report, verify

__all__ = [
    "ConversionManifest",
    "FLAG_TO_MASK",
    "convert",
    "IngestError",
    "SourceDataError",
    "UsageError",
    "fixture_mask",
    "fixture_percent",
    "make_fixture",
    "EXPECTED_SHAPE",
    "VARIABLE_DATASETS",
    "read_day",
    "source_date",
    "SPLIT_RANGES",
    "VerifyReport",
    "format_report",
    "verify",
]

__version__ = "0.1.0"
