"""Metric definitions checked against independent scalar-loop references."""

from __future__ import annotations

import csv
import datetime as dt
import json
import math

import numpy as np
import pytest
from hypothesis import given, strategies as st

from floecast import (
    Climatology,
    DetrendedScores,
    MetricAccumulator,
    acc_field,
    detrended_metrics,
    mae,
    mse,
    nse,
    psnr,
    r2,
    rmse,
    ssim,
)
from floecast.grids import LAND, OCEAN, POLE_HOLE

from .conftest import make_mask, random_pair
from .oracles import (
    naive_acc,
    naive_detrended,
    naive_mae,
    naive_mse,
    naive_nse,
    naive_psnr,
    naive_r2,
    naive_rmse,
    naive_ssim,
)

TOL = 1e-10


def _clim_like(mask: np.ndarray, rng: np.random.Generator) -> np.ndarray:
    field = rng.uniform(0.1, 0.9, size=mask.shape)
    field[mask != OCEAN] = np.nan
    return field


# -- oracle equivalence on random masked grids --------------------------------


def test_pointwise_metrics_match_naive_loops():
    rng = np.random.default_rng(42)
    ssim_defined = 0
    for trial in range(20):
        if trial % 2:
            # Border-only mask, large enough that 7x7 structural windows fit.
            mask = make_mask(12, 12)
            pred = rng.uniform(0, 1, size=mask.shape)
            truth = rng.uniform(0, 1, size=mask.shape)
            garbage = rng.normal(scale=100.0, size=mask.shape)
            pred = np.where(mask == OCEAN, pred, garbage)
            truth = np.where(mask == OCEAN, truth, garbage[::-1])
        else:
            pred, truth, mask = random_pair(rng)
        clim = _clim_like(mask, rng)
        assert mse(pred, truth, mask) == pytest.approx(
            naive_mse(pred, truth, mask), abs=TOL
        )
        assert rmse(pred, truth, mask) == pytest.approx(
            naive_rmse(pred, truth, mask), abs=TOL
        )
        assert mae(pred, truth, mask) == pytest.approx(
            naive_mae(pred, truth, mask), abs=TOL
        )
        assert nse(pred, truth, mask) == pytest.approx(
            naive_nse(pred[None], truth[None], mask), abs=TOL
        )
        assert acc_field(pred, truth, clim, mask) == pytest.approx(
            naive_acc(pred, truth, clim, mask), abs=TOL
        )
        assert psnr(pred, truth, mask) == pytest.approx(
            naive_psnr(pred, truth, mask), abs=TOL
        )
        got_ssim = ssim(pred, truth, mask)
        want_ssim = naive_ssim(pred, truth, mask)
        if want_ssim is None:
            assert got_ssim is None
        else:
            ssim_defined += 1
            assert got_ssim == pytest.approx(want_ssim, abs=TOL)
    assert ssim_defined >= 3  # the structural comparison was actually exercised


def test_multi_sample_nse_and_r2_match_naive_loops():
    rng = np.random.default_rng(7)
    mask = make_mask(8, 8, rng)
    preds = np.stack([random_pair(rng)[0] for _ in range(5)])
    truths = np.stack([random_pair(rng)[1] for _ in range(5)])
    assert nse(preds, truths, mask) == pytest.approx(
        naive_nse(preds, truths, mask), abs=TOL
    )
    assert r2(preds, truths, mask) == pytest.approx(
        naive_r2(preds, truths, mask), abs=TOL
    )


def test_metrics_ignore_values_under_land_and_pole_hole():
    rng = np.random.default_rng(3)
    pred, truth, mask = random_pair(rng)
    clim = _clim_like(mask, rng)
    baseline = (
        mse(pred, truth, mask),
        mae(pred, truth, mask),
        acc_field(pred, truth, np.nan_to_num(clim, nan=0.5), mask),
        ssim(pred, truth, mask),
    )
    for fill in (0.0, 1e9, np.nan):
        p2, t2 = pred.copy(), truth.copy()
        p2[mask != OCEAN] = fill
        t2[mask != OCEAN] = fill
        refilled = (
            mse(p2, t2, mask),
            mae(p2, t2, mask),
            acc_field(p2, t2, np.nan_to_num(clim, nan=0.5), mask),
            ssim(p2, t2, mask),
        )
        assert refilled == baseline


# -- fixed-value examples ------------------------------------------------------


def test_identical_grids_have_perfect_scores():
    rng = np.random.default_rng(0)
    mask = np.full((8, 8), OCEAN, dtype=np.uint8)
    pred = rng.uniform(0, 1, size=(8, 8))
    assert mse(pred, pred, mask) == 0.0
    assert mae(pred, pred, mask) == 0.0
    assert nse(pred, pred, mask) == 1.0
    assert psnr(pred, pred, mask) == math.inf
    assert ssim(pred, pred, mask) == pytest.approx(1.0, abs=1e-12)


def test_constant_offset_has_exact_error_scores():
    mask = np.full((8, 8), OCEAN, dtype=np.uint8)
    truth = np.full((8, 8), 0.4)
    pred = truth + 0.1
    assert mse(pred, truth, mask) == pytest.approx(0.01, abs=1e-15)
    assert rmse(pred, truth, mask) == pytest.approx(0.1, abs=1e-15)
    assert mae(pred, truth, mask) == pytest.approx(0.1, abs=1e-15)
    # mean error 0.01 against a unit dynamic range is exactly 20 dB down
    assert psnr(pred, truth, mask) == pytest.approx(20.0, abs=1e-12)


def test_nse_zero_when_prediction_is_the_spatial_mean():
    rng = np.random.default_rng(5)
    _, truth, mask = random_pair(rng)
    spatial_mean = float(truth[mask == OCEAN].mean())
    pred = np.full_like(truth, spatial_mean)
    assert nse(pred, truth, mask) == pytest.approx(0.0, abs=1e-12)


def test_r2_zero_when_prediction_is_the_temporal_mean():
    rng = np.random.default_rng(6)
    mask = make_mask(8, 8)
    truths = np.stack([rng.uniform(0, 1, size=(8, 8)) for _ in range(4)])
    temporal_mean = truths.mean(axis=0)
    preds = np.stack([temporal_mean] * 4)
    assert r2(preds, truths, mask) == pytest.approx(0.0, abs=1e-12)


def test_r2_is_undefined_for_a_single_sample():
    rng = np.random.default_rng(8)
    pred, truth, mask = random_pair(rng)
    assert r2(pred[None], truth[None], mask) is None


def test_undefined_cases_return_none():
    mask = np.full((8, 8), OCEAN, dtype=np.uint8)
    constant = np.full((8, 8), 0.3)
    varying = np.linspace(0, 1, 64).reshape(8, 8)
    # constant truth: both skill baselines have zero variance
    assert nse(varying, constant, mask) is None
    assert r2(np.stack([varying] * 3), np.stack([constant] * 3), mask) is None
    # prediction equal to the climatology: zero anomaly norm
    assert acc_field(constant, varying, constant, mask) is None


def test_acc_flips_sign_when_anomalies_flip():
    rng = np.random.default_rng(9)
    pred, truth, mask = random_pair(rng)
    clim = np.full(mask.shape, 0.5)
    forward = acc_field(pred, truth, clim, mask)
    mirrored = acc_field(1.0 - pred, truth, clim, mask)
    assert forward == pytest.approx(-mirrored, abs=1e-12)


def test_ssim_of_inverted_checkerboard_is_low():
    mask = np.full((10, 10), OCEAN, dtype=np.uint8)
    ii, jj = np.meshgrid(np.arange(10), np.arange(10), indexing="ij")
    truth = ((ii + jj) % 2).astype(np.float64)
    pred = 1.0 - truth
    value = ssim(pred, truth, mask)
    assert value is not None and value < 0.5
    assert value == pytest.approx(naive_ssim(pred, truth, mask), abs=TOL)


def test_ssim_of_equal_constants_is_one():
    mask = np.full((8, 8), OCEAN, dtype=np.uint8)
    grid = np.full((8, 8), 0.7)
    assert ssim(grid, grid, mask) == pytest.approx(1.0, abs=1e-12)


def test_ssim_none_when_no_window_fits():
    pred = np.full((6, 6), 0.5)
    small = np.full((6, 6), OCEAN, dtype=np.uint8)
    assert ssim(pred, pred, small) is None  # grid smaller than the 7x7 window
    blocked = np.full((9, 9), OCEAN, dtype=np.uint8)
    blocked[4, 4] = LAND  # centre land cell intersects every candidate window
    pred9 = np.full((9, 9), 0.5)
    assert ssim(pred9, pred9, blocked) is None


# -- metric ranges and identities (property tests) -----------------------------


@st.composite
def grid_pairs(draw):
    seed = draw(st.integers(min_value=0, max_value=2**32 - 1))
    rng = np.random.default_rng(seed)
    return random_pair(rng)


@given(grid_pairs())
def test_error_metric_identities(pair):
    pred, truth, mask = pair
    m, r, a = mse(pred, truth, mask), rmse(pred, truth, mask), mae(pred, truth, mask)
    assert m >= 0 and a >= 0
    assert r == pytest.approx(math.sqrt(m), abs=1e-12)
    assert a <= r + 1e-12  # RMSE dominates MAE (Jensen)


@given(grid_pairs())
def test_bounded_metrics_stay_in_range(pair):
    pred, truth, mask = pair
    clim = np.full(mask.shape, 0.5)
    a = acc_field(pred, truth, clim, mask)
    if a is not None:
        assert -1.0 - 1e-9 <= a <= 1.0 + 1e-9
    s = ssim(pred, truth, mask)
    if s is not None:
        assert -1.0 - 1e-9 <= s <= 1.0 + 1e-9
    n = nse(pred, truth, mask)
    if n is not None:
        assert n <= 1.0 + 1e-9


# -- detrended scalar-series scores --------------------------------------------


def test_detrended_hand_example():
    truth = [5.0, 4.8, 4.9, 4.6]
    pred = [4.9, 4.9, 4.8, 4.7]
    scores = detrended_metrics(pred, truth)
    # Hand derivation: truth OLS line 4.99 - 0.11 x leaves residuals
    # (0.01, -0.08, 0.13, -0.06); pred line 4.93 - 0.07 x leaves
    # (-0.03, 0.04, 0.01, -0.02).
    assert scores.n_years == 4
    assert scores.rmse_detrend == pytest.approx(math.sqrt(0.008), abs=1e-9)
    assert scores.acc_detrend == pytest.approx(
        -0.001 / math.sqrt(0.003 * 0.027), abs=1e-9
    )
    # Plain ACC about the truth mean 4.825.
    assert scores.acc == pytest.approx(0.0375 / math.sqrt(0.0875 * 0.0275), abs=1e-9)
    naive = naive_detrended(np.array(pred), np.array(truth))
    assert scores.rmse_detrend == pytest.approx(naive["rmse_detrend"], abs=TOL)
    assert scores.acc_detrend == pytest.approx(naive["acc_detrend"], abs=TOL)
    assert scores.acc == pytest.approx(naive["acc"], abs=TOL)


def test_detrended_perfect_prediction():
    series = [4.1, 4.7, 3.9, 4.4, 4.0]
    scores = detrended_metrics(series, series)
    assert scores.rmse_detrend == pytest.approx(0.0, abs=1e-12)
    assert scores.acc_detrend == pytest.approx(1.0, abs=1e-12)
    assert scores.acc == pytest.approx(1.0, abs=1e-12)


def test_detrending_removes_constant_offsets():
    rng = np.random.default_rng(10)
    truth = rng.uniform(3, 5, size=12)
    scores = detrended_metrics(truth + 0.7, truth)
    assert scores.rmse_detrend == pytest.approx(0.0, abs=1e-9)
    assert scores.acc_detrend == pytest.approx(1.0, abs=1e-9)


def test_detrended_undefined_below_three_samples():
    one = detrended_metrics([4.0], [4.1])
    assert one.rmse_detrend is None and one.acc_detrend is None and one.acc is None
    assert one.n_years == 1
    two = detrended_metrics([4.0, 4.2], [4.1, 4.3])
    assert two.rmse_detrend is None and two.acc_detrend is None
    assert two.acc is not None  # plain ACC only needs two samples
    assert two.n_years == 2


def test_detrended_acc_undefined_when_truth_is_exactly_linear():
    x = np.arange(6, dtype=np.float64)
    truth = 4.0 - 0.05 * x  # residuals are identically zero
    pred = truth + np.random.default_rng(11).normal(0, 0.1, size=6)
    assert detrended_metrics(pred, truth).acc_detrend is None


def test_detrended_acc_near_zero_for_independent_residuals():
    # Shared trend plus independent noise on each side: the detrended
    # correlation averages to zero across trials.
    rng = np.random.default_rng(12)
    x = np.arange(40, dtype=np.float64)
    values = []
    for _ in range(400):
        line = 5.0 - 0.02 * x
        truth = line + rng.normal(0, 0.1, size=40)
        pred = line + rng.normal(0, 0.1, size=40)
        values.append(detrended_metrics(pred, truth).acc_detrend)
    mean = float(np.mean(values))
    assert abs(mean) < 0.05
    assert float(np.std(values)) < 0.5


def test_detrended_rejects_mismatched_lengths():
    with pytest.raises(ValueError):
        detrended_metrics([1.0, 2.0], [1.0])


# -- pooled accumulation --------------------------------------------------------


def _fixture_days(rng: np.random.Generator, n: int):
    # One shared mask for every day; garbage only under that mask's land cells.
    mask = make_mask(8, 8, rng)
    days = []
    for _ in range(n):
        pred = rng.uniform(0, 1, size=mask.shape)
        truth = rng.uniform(0, 1, size=mask.shape)
        pred[mask != OCEAN] = rng.normal(0, 100, size=int((mask != OCEAN).sum()))
        truth[mask != OCEAN] = rng.normal(0, 100, size=int((mask != OCEAN).sum()))
        days.append((pred, truth))
    return days, mask


def test_pooled_report_matches_naive_over_concatenation():
    rng = np.random.default_rng(13)
    days, mask = _fixture_days(rng, 6)
    acc_grids = MetricAccumulator(mask)
    date = dt.date(2010, 3, 1)
    for i, (p, t) in enumerate(days):
        acc_grids.add(p, t, date + dt.timedelta(days=i), lead=i + 1)
    report = acc_grids.report()
    preds = np.stack([p for p, _ in days])
    truths = np.stack([t for _, t in days])
    assert report.n_samples == 6
    assert report.per_metric["mse"] == pytest.approx(
        naive_mse(preds, truths, mask), abs=TOL
    )
    assert report.per_metric["mae"] == pytest.approx(
        naive_mae(preds, truths, mask), abs=TOL
    )
    assert report.per_metric["rmse"] == pytest.approx(
        naive_rmse(preds, truths, mask), abs=TOL
    )
    assert report.per_metric["nse"] == pytest.approx(
        naive_nse(preds, truths, mask), abs=TOL
    )
    assert report.per_metric["r2"] == pytest.approx(
        naive_r2(preds, truths, mask), abs=TOL
    )
    assert report.per_metric["psnr"] == pytest.approx(
        naive_psnr(preds, truths, mask), abs=TOL
    )


def test_pooled_mse_averages_equal_sized_groups():
    mask = np.full((8, 8), OCEAN, dtype=np.uint8)
    truth = np.full((8, 8), 0.4)
    acc_grids = MetricAccumulator(mask)
    acc_grids.add(truth + 0.1, truth, dt.date(2010, 1, 5), lead=1)  # MSE 0.01
    acc_grids.add(truth + math.sqrt(0.03), truth, dt.date(2010, 1, 6), lead=2)
    report = acc_grids.report()
    assert report.per_lead[1]["mse"] == pytest.approx(0.01, abs=1e-12)
    assert report.per_lead[2]["mse"] == pytest.approx(0.03, abs=1e-12)
    assert report.per_metric["mse"] == pytest.approx(0.02, abs=1e-12)


def test_grouping_keys_follow_lead_and_target_month():
    # Three forecasts from one January init: leads 1 and 2 land in January,
    # lead 20 lands in February, so the month table splits 2/1 while the
    # lead table has three singleton rows.
    rng = np.random.default_rng(14)
    days, mask = _fixture_days(rng, 3)
    init = dt.date(2011, 1, 25)
    acc_grids = MetricAccumulator(mask)
    for lead, (p, t) in zip([1, 2, 20], days):
        acc_grids.add(p, t, init + dt.timedelta(days=lead), lead=lead)
    report = acc_grids.report()
    assert sorted(report.per_lead) == [1, 2, 20]
    assert sorted(report.per_month) == [1, 2]
    jan = np.stack([days[0][0], days[1][0]]), np.stack([days[0][1], days[1][1]])
    assert report.per_month[1]["mse"] == pytest.approx(
        naive_mse(jan[0], jan[1], mask), abs=TOL
    )
    assert report.per_month[2]["mse"] == pytest.approx(
        naive_mse(days[2][0][None], days[2][1][None], mask), abs=TOL
    )
    for lead, (p, t) in zip([1, 2, 20], days):
        assert report.per_lead[lead]["mse"] == pytest.approx(
            naive_mse(p[None], t[None], mask), abs=TOL
        )


def test_accumulator_uses_climatology_and_counts_skips():
    rng = np.random.default_rng(15)
    mask = make_mask(8, 8)
    clim_field = rng.uniform(0.2, 0.8, size=(8, 8))
    truth = np.clip(clim_field + rng.normal(0, 0.05, size=(8, 8)), 0, 1)
    pred = np.clip(clim_field + rng.normal(0, 0.05, size=(8, 8)), 0, 1)
    acc_grids = MetricAccumulator(mask)
    acc_grids.add(pred, truth, dt.date(2012, 7, 1), lead=1, clim_field=clim_field)
    # prediction exactly equal to the baseline: ACC undefined, skip recorded
    acc_grids.add(
        clim_field.copy(), truth, dt.date(2012, 7, 2), lead=2, clim_field=clim_field
    )
    report = acc_grids.report()
    assert report.acc_skipped == 1
    assert report.per_metric["acc"] == pytest.approx(
        naive_acc(pred, truth, clim_field, mask), abs=TOL
    )


def test_accumulator_without_climatology_leaves_acc_undefined():
    rng = np.random.default_rng(16)
    pred, truth, mask = random_pair(rng)
    acc_grids = MetricAccumulator(mask)
    acc_grids.add(pred, truth, dt.date(2012, 7, 1))
    report = acc_grids.report()
    assert report.per_metric["acc"] is None
    assert report.per_lead == {}


def test_accumulator_rejects_all_land_masks():
    with pytest.raises(ValueError):
        MetricAccumulator(np.full((4, 4), LAND, dtype=np.uint8))


# -- report serialization --------------------------------------------------------


def _report_with_edge_values() -> "MetricAccumulator":
    mask = np.full((8, 8), OCEAN, dtype=np.uint8)
    truth = np.linspace(0.2, 0.8, 64).reshape(8, 8)
    acc_grids = MetricAccumulator(mask)
    acc_grids.add(truth.copy(), truth, dt.date(2013, 9, 4), lead=3)
    return acc_grids


def test_report_json_encodes_exact_and_undefined():
    report = _report_with_edge_values().report()
    payload = json.loads(report.to_json())
    assert payload["per_metric"]["psnr"] == "exact"  # zero-error forecast
    assert payload["per_metric"]["acc"] is None  # no climatology given
    assert payload["per_metric"]["r2"] is None  # single sample
    assert payload["per_lead"]["3"]["mse"] == 0.0
    assert payload["n_samples"] == 1
    assert json.loads(report.to_json()) == payload  # stable round-trip


def test_report_csv_layout():
    report = _report_with_edge_values().report()
    path = "/tmp/floecast-report-test.csv"
    report.write_csv(path)
    with open(path, newline="") as fh:
        rows = list(csv.reader(fh))
    assert rows[0] == ["group", "key", "metric", "value"]
    by_key = {(r[0], r[1], r[2]): r[3] for r in rows[1:]}
    assert by_key[("overall", "", "psnr")] == "exact"
    assert by_key[("overall", "", "acc")] == "undefined"
    assert by_key[("lead", "3", "mse")] == repr(0.0)
    assert by_key[("month", "9", "mae")] == repr(0.0)
    # every metric appears once per group row
    assert len(rows) == 1 + 8 * 3  # overall + one lead + one month


def test_detrended_scores_is_a_plain_record():
    scores = DetrendedScores(0.1, 0.9, 0.8, 5)
    assert (scores.rmse_detrend, scores.acc_detrend, scores.acc, scores.n_years) == (
        0.1,
        0.9,
        0.8,
        5,
    )
