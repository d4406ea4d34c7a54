from __future__ import annotations

import datetime as dt

import numpy as np
import pytest
from hypothesis import HealthCheck, settings

from floecast import (
    DateRange,
    LatentSeries,
    Splits,
    SynthConfig,
    encode_series,
    fit_eof,
    synth_archive,
)

settings.register_profile(
    "suite",
    derandomize=True,
    deadline=None,
    max_examples=40,
    suppress_health_check=[HealthCheck.too_slow],
)
settings.load_profile("suite")


def make_mask(rows: int, cols: int, rng: np.random.Generator | None = None) -> np.ndarray:
    """Mask with a land border, optional random interior land, and a pole hole."""
    mask = np.zeros((rows, cols), dtype=np.uint8)
    mask[0, :] = mask[-1, :] = 1
    mask[:, 0] = mask[:, -1] = 1
    if rng is not None:
        interior = rng.random((rows, cols)) < 0.1
        interior[0, :] = interior[-1, :] = False
        interior[:, 0] = interior[:, -1] = False
        mask[interior] = 1
    mask[1, 1] = 2
    return mask


def random_pair(rng: np.random.Generator, rows: int = 8, cols: int = 8):
    """Random (pred, truth, mask) with garbage in non-ocean cells."""
    mask = make_mask(rows, cols, rng)
    pred = rng.random((rows, cols))
    truth = rng.random((rows, cols))
    garbage = rng.normal(scale=100.0, size=(rows, cols))
    pred = np.where(mask == 0, pred, garbage)
    truth = np.where(mask == 0, truth, garbage[::-1])
    return pred, truth, mask


# -- shared synthetic archives -------------------------------------------------

STANDARD_SYNTH = SynthConfig(
    shape=(56, 38),
    n_days=7305,  # 20 years from 2000-01-01
    seasonal_amp=0.2,
    trend_per_year=0.0,
    ar1_rho=0.8,
    noise_sd=0.02,
    noise_spatial_scale=4.0,
    pole_hole_size=0,
    seed=0,
    start=dt.date(2000, 1, 1),
)

STANDARD_SPLITS = Splits(
    train=DateRange(dt.date(2000, 1, 1), dt.date(2011, 12, 31)),
    val=DateRange(dt.date(2012, 1, 1), dt.date(2015, 12, 31)),
    test=DateRange(dt.date(2016, 1, 1), dt.date(2019, 12, 31)),
)


@pytest.fixture(scope="session")
def standard_archive():
    """The 20-year 56x38 fixture used by the acceptance suite."""
    return synth_archive(STANDARD_SYNTH, splits=STANDARD_SPLITS)


@pytest.fixture(scope="session")
def standard_compressor(standard_archive):
    return fit_eof(standard_archive, k=16, train_range=STANDARD_SPLITS.train)


@pytest.fixture(scope="session")
def standard_series(standard_archive, standard_compressor) -> LatentSeries:
    return encode_series(standard_compressor, standard_archive)


@pytest.fixture(scope="session")
def small_archive():
    """A light general-purpose archive: 3 years of 16x12 grids with splits."""
    cfg = SynthConfig(
        shape=(16, 12),
        n_days=1096,
        seasonal_amp=0.18,
        trend_per_year=-0.01,
        ar1_rho=0.7,
        noise_sd=0.03,
        noise_spatial_scale=1.0,
        pole_hole_size=2,
        seed=11,
        start=dt.date(2001, 1, 1),
    )
    splits = Splits(
        train=DateRange(dt.date(2001, 1, 1), dt.date(2002, 6, 30)),
        val=DateRange(dt.date(2002, 7, 1), dt.date(2003, 3, 31)),
        test=DateRange(dt.date(2003, 4, 1), dt.date(2003, 12, 31)),
    )
    return synth_archive(cfg, splits=splits)


@pytest.fixture(scope="session")
def noise_free_archive():
    """Two noise-free seasonal years; the cycle bottoms out in early September."""
    cfg = SynthConfig(
        shape=(20, 14),
        n_days=731,
        seasonal_amp=0.2,
        trend_per_year=0.0,
        ar1_rho=0.0,
        noise_sd=0.0,
        seed=3,
        start=dt.date(2003, 1, 1),
    )
    return synth_archive(cfg)
